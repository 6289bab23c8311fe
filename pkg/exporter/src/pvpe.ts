/**
 * PVPE embedding container: read/write support for the binary interchange
 * format shared with the pvplearn toolchain.
 *
 * Layout, little-endian throughout:
 *
 *     offset  size  field
 *     0       4     magic "PVPE"
 *     4       4     u32 format version (currently 1)
 *     8       4     u32 rows
 *     12      4     u32 dim
 *     16      1     u8 role tag
 *     17      7     reserved, must be zero
 *     24      ...   rows*dim float32 values, row-major
 *
 * An optional sidecar at `<path>.labels` carries one UTF-8 label per row;
 * lines starting with '#' are comments.
 */

import { existsSync, readFileSync, writeFileSync } from 'node:fs';

export const MAGIC = 'PVPE';
export const VERSION = 1;
export const HEADER_SIZE = 24;

// role tag byte is the 1-based position in this list
export const ROLES = [
  'global_text',
  'pvp_visual',
  'text_prompt',
  'adapted',
  'test_image',
] as const;

export type Role = (typeof ROLES)[number];

export class FormatError extends Error {}
export class ParameterError extends Error {}

export interface EmbeddingBatch {
  rows: number;
  dim: number;
  role: Role;
  /** row-major, rows*dim values */
  values: Float32Array;
  labels?: string[];
  /** free-form notes written to the sidecar as '#' comment lines */
  comments?: string[];
}

function checkBatch(batch: EmbeddingBatch): void {
  if (batch.rows < 1 || batch.dim < 1) {
    throw new ParameterError(`empty batch: rows=${batch.rows} dim=${batch.dim}`);
  }
  if (batch.values.length !== batch.rows * batch.dim) {
    throw new ParameterError(
      `values length ${batch.values.length} does not match rows*dim = ${batch.rows * batch.dim}`,
    );
  }
  if (!ROLES.includes(batch.role)) {
    throw new ParameterError(`unknown role '${batch.role}'; expected one of ${ROLES.join(', ')}`);
  }
  if (batch.labels !== undefined && batch.labels.length !== batch.rows) {
    throw new ParameterError(`${batch.labels.length} labels for ${batch.rows} rows`);
  }
}

/** Write the batch; a labels sidecar is written iff labels are present. */
export function writePvpe(path: string, batch: EmbeddingBatch): void {
  checkBatch(batch);
  const blob = Buffer.alloc(HEADER_SIZE + batch.rows * batch.dim * 4);
  blob.write(MAGIC, 0, 'ascii');
  blob.writeUInt32LE(VERSION, 4);
  blob.writeUInt32LE(batch.rows, 8);
  blob.writeUInt32LE(batch.dim, 12);
  blob.writeUInt8(ROLES.indexOf(batch.role) + 1, 16);
  for (let i = 0; i < batch.values.length; i++) {
    blob.writeFloatLE(batch.values[i], HEADER_SIZE + i * 4);
  }
  writeFileSync(path, blob);
  if (batch.labels !== undefined) {
    const comments = (batch.comments ?? []).map(note => `# ${note}\n`);
    const lines = batch.labels.map(label => `${label}\n`);
    writeFileSync(path + '.labels', comments.join('') + lines.join(''), 'utf8');
  }
}

/** Read a batch, picking up the labels sidecar when it exists. */
export function readPvpe(path: string): EmbeddingBatch {
  const blob = readFileSync(path);
  if (blob.length < HEADER_SIZE) {
    throw new FormatError(
      `truncated header: expected ${HEADER_SIZE} bytes, got ${blob.length} (at offset 0)`,
    );
  }
  const magic = blob.toString('ascii', 0, 4);
  if (magic !== MAGIC) {
    throw new FormatError(`bad magic '${magic}' at offset 0`);
  }
  const version = blob.readUInt32LE(4);
  if (version !== VERSION) {
    throw new FormatError(`unsupported version ${version} at offset 4`);
  }
  const rows = blob.readUInt32LE(8);
  const dim = blob.readUInt32LE(12);
  if (rows < 1 || dim < 1) {
    throw new FormatError(`degenerate extents rows=${rows} dim=${dim} at offset 8`);
  }
  const roleTag = blob.readUInt8(16);
  if (roleTag < 1 || roleTag > ROLES.length) {
    throw new FormatError(`unknown role tag ${roleTag} at offset 16`);
  }
  for (let i = 17; i < HEADER_SIZE; i++) {
    if (blob[i] !== 0) {
      throw new FormatError('reserved bytes not zero at offset 17');
    }
  }
  const expected = rows * dim * 4;
  const actual = blob.length - HEADER_SIZE;
  if (actual !== expected) {
    throw new FormatError(
      `payload at offset ${HEADER_SIZE}: expected ${expected} bytes, got ${actual}`,
    );
  }
  const values = new Float32Array(rows * dim);
  for (let i = 0; i < values.length; i++) {
    values[i] = blob.readFloatLE(HEADER_SIZE + i * 4);
  }
  let labels: string[] | undefined;
  const sidecar = path + '.labels';
  if (existsSync(sidecar)) {
    const lines = readFileSync(sidecar, 'utf8').split('\n');
    if (lines.length > 0 && lines[lines.length - 1] === '') {
      lines.pop(); // trailing newline, not an empty label
    }
    labels = lines.filter(line => !line.startsWith('#'));
    if (labels.length !== rows) {
      throw new FormatError(`labels sidecar has ${labels.length} entries for ${rows} rows`);
    }
  }
  return { rows, dim, role: ROLES[roleTag - 1], values, labels };
}
