/**
 * Export operations: turn a text file or an image directory into a PVPE
 * embedding file plus its labels sidecar.
 */

import { readFileSync, readdirSync } from 'node:fs';
import { join } from 'node:path';

import { loadEmbedder } from './embedder.js';
import { decodeNetpbm } from './images.js';
import { FormatError, writePvpe } from './pvpe.js';
import type { Role } from './pvpe.js';

export class InputError extends Error {}

export interface ExportJob {
  model: string;
  role: Role;
  out: string;
  batchSize?: number;
}

export interface ExportSummary {
  path: string;
  rows: number;
  dim: number;
  role: Role;
  skipped: number;
}

const DEFAULT_BATCH_SIZE = 32;

function batchSizeOf(job: ExportJob): number {
  const size = job.batchSize ?? DEFAULT_BATCH_SIZE;
  if (!Number.isInteger(size) || size < 1) {
    throw new InputError(`batch size must be a positive integer, got ${size}`);
  }
  return size;
}

// Embeds items in sequential batches and quantizes the normalized float64
// rows to a single row-major float32 payload.
function embedAll<T>(
  items: T[],
  embedOne: (item: T) => Float64Array,
  dim: number,
  batchSize: number,
): Float32Array {
  const values = new Float32Array(items.length * dim);
  for (let start = 0; start < items.length; start += batchSize) {
    const stop = Math.min(start + batchSize, items.length);
    for (let row = start; row < stop; row++) {
      values.set(embedOne(items[row]), row * dim);
    }
  }
  return values;
}

/**
 * Embed one text per line of `textsPath` and write them to `job.out`.
 * Empty lines are skipped with a warning; the sidecar carries the kept
 * lines verbatim.
 */
export function exportTextEmbeddings(job: ExportJob, textsPath: string): ExportSummary {
  const batchSize = batchSizeOf(job);
  const embedder = loadEmbedder(job.model);
  const lines = readFileSync(textsPath, 'utf8').split('\n');
  if (lines.length > 0 && lines[lines.length - 1] === '') {
    lines.pop(); // trailing newline
  }
  const texts: string[] = [];
  let skipped = 0;
  lines.forEach((raw, index) => {
    const line = raw.endsWith('\r') ? raw.slice(0, -1) : raw;
    if (line.trim() === '') {
      console.warn(`warning: skipping empty line ${index + 1} of ${textsPath}`);
      skipped++;
      return;
    }
    texts.push(line);
  });
  if (texts.length === 0) {
    throw new InputError(`no non-empty lines in ${textsPath}`);
  }
  const values = embedAll(texts, text => embedder.embedText(text), embedder.dim, batchSize);
  writePvpe(job.out, {
    rows: texts.length,
    dim: embedder.dim,
    role: job.role,
    values,
    labels: texts,
  });
  return { path: job.out, rows: texts.length, dim: embedder.dim, role: job.role, skipped };
}

/**
 * Embed every decodable image in `imagesDir` (sorted by filename) and write
 * them to `job.out`. Undecodable files are skipped with a warning and noted
 * in the sidecar as a comment. An empty or fully undecodable directory is an
 * error and produces no file.
 */
export function exportImageEmbeddings(job: ExportJob, imagesDir: string): ExportSummary {
  const batchSize = batchSizeOf(job);
  const embedder = loadEmbedder(job.model);
  const names = readdirSync(imagesDir, { withFileTypes: true })
    .filter(entry => entry.isFile())
    .map(entry => entry.name)
    .sort();
  const images: { name: string; decoded: ReturnType<typeof decodeNetpbm> }[] = [];
  const comments: string[] = [];
  for (const name of names) {
    try {
      images.push({ name, decoded: decodeNetpbm(readFileSync(join(imagesDir, name))) });
    } catch (err) {
      if (!(err instanceof FormatError)) throw err;
      console.warn(`warning: skipping ${name}: ${err.message}`);
      comments.push(`skipped ${name}: ${err.message}`);
    }
  }
  if (images.length === 0) {
    throw new InputError(`no decodable images in ${imagesDir}`);
  }
  const values = embedAll(
    images,
    image => embedder.embedImage(image.decoded),
    embedder.dim,
    batchSize,
  );
  writePvpe(job.out, {
    rows: images.length,
    dim: embedder.dim,
    role: job.role,
    values,
    labels: images.map(image => image.name),
    comments,
  });
  return {
    path: job.out,
    rows: images.length,
    dim: embedder.dim,
    role: job.role,
    skipped: comments.length,
  };
}

export { loadEmbedder };
export type { Embedder } from './embedder.js';
