/**
 * Embedding backends for the exporter.
 *
 * The only backend that ships with this package is the `dhash/<dim>` family:
 * a deterministic digest-expansion embedder that maps any text or decoded
 * image to a reproducible unit vector of the requested width. It has no
 * semantics, but it exercises the full export path (batching, normalization,
 * container layout) without downloading pretrained weights, and its output
 * is stable across platforms and runs.
 *
 * Pretrained vision-language checkpoints are recognised as "not available"
 * rather than unknown, so callers can distinguish a typo from a missing
 * runtime dependency.
 */

import { createHash } from 'node:crypto';

import type { DecodedImage } from './images.js';

export class ModelUnavailableError extends Error {}

export interface Embedder {
  id: string;
  dim: number;
  embedText(text: string): Float64Array;
  embedImage(image: DecodedImage): Float64Array;
}

const DHASH_FAMILY = 'dhash';
const MAX_DIM = 65536;

function digestBlock(key: Buffer, counter: number): Buffer {
  const block = Buffer.alloc(4);
  block.writeUInt32BE(counter, 0);
  return createHash('sha256').update(key).update(block).digest();
}

// Expands a key into dim floats in (-1, 1), then L2-normalizes in float64.
// Normalization happens before any float32 quantization downstream.
function expand(key: Buffer, dim: number): Float64Array {
  const out = new Float64Array(dim);
  let filled = 0;
  for (let counter = 0; filled < dim; counter++) {
    const digest = digestBlock(key, counter);
    for (let i = 0; i < 8 && filled < dim; i++) {
      const word = digest.readUInt32BE(i * 4);
      out[filled++] = (word + 0.5) / 2147483648 - 1;
    }
  }
  let norm = 0;
  for (let i = 0; i < dim; i++) norm += out[i] * out[i];
  norm = Math.sqrt(norm);
  for (let i = 0; i < dim; i++) out[i] /= norm;
  return out;
}

class DhashEmbedder implements Embedder {
  readonly id: string;
  readonly dim: number;

  constructor(dim: number) {
    this.id = `${DHASH_FAMILY}/${dim}`;
    this.dim = dim;
  }

  embedText(text: string): Float64Array {
    const key = Buffer.concat([
      Buffer.from(`text\0${this.id}\0`, 'utf8'),
      Buffer.from(text, 'utf8'),
    ]);
    return expand(key, this.dim);
  }

  embedImage(image: DecodedImage): Float64Array {
    // keyed on decoded pixel content, so re-encoding the same raster
    // under a different filename embeds identically
    const key = Buffer.concat([
      Buffer.from(
        `image\0${this.id}\0${image.width}x${image.height}x${image.channels}\0`,
        'utf8',
      ),
      Buffer.from(image.pixels),
    ]);
    return expand(key, this.dim);
  }
}

export function loadEmbedder(modelId: string): Embedder {
  const parts = modelId.split('/');
  if (parts.length === 2 && parts[0] === DHASH_FAMILY) {
    const dim = Number(parts[1]);
    if (!Number.isInteger(dim) || dim < 1 || dim > MAX_DIM) {
      throw new ModelUnavailableError(
        `model '${modelId}': dimension must be an integer in 1..${MAX_DIM}`,
      );
    }
    return new DhashEmbedder(dim);
  }
  throw new ModelUnavailableError(
    `model '${modelId}' is not available in this build; only '${DHASH_FAMILY}/<dim>' backends ship with the exporter`,
  );
}
