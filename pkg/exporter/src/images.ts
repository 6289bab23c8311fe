/**
 * Minimal decoder for binary netpbm images (P5 grayscale, P6 RGB).
 * These are the raster formats the rest of the toolchain emits, so the
 * exporter can re-ingest its own artifacts without a native image stack.
 */

import { FormatError } from './pvpe.js';

export interface DecodedImage {
  width: number;
  height: number;
  /** 1 for P5, 3 for P6 */
  channels: number;
  maxval: number;
  /** row-major, width*height*channels bytes */
  pixels: Uint8Array;
}

function isSpace(byte: number): boolean {
  return byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d || byte === 0x0c;
}

// Reads the next whitespace-delimited header token, honouring '#' comments.
// Returns the token and the offset just past it.
function nextToken(bytes: Buffer, offset: number): { token: string; offset: number } {
  let i = offset;
  for (;;) {
    while (i < bytes.length && isSpace(bytes[i])) i++;
    if (i < bytes.length && bytes[i] === 0x23) {
      while (i < bytes.length && bytes[i] !== 0x0a) i++;
      continue;
    }
    break;
  }
  const start = i;
  while (i < bytes.length && !isSpace(bytes[i])) i++;
  if (start === i) {
    throw new FormatError('truncated netpbm header');
  }
  return { token: bytes.toString('ascii', start, i), offset: i };
}

export function decodeNetpbm(bytes: Buffer): DecodedImage {
  if (bytes.length < 2) {
    throw new FormatError('not a netpbm image: too short');
  }
  const magic = bytes.toString('ascii', 0, 2);
  if (magic !== 'P5' && magic !== 'P6') {
    throw new FormatError(`not a netpbm image: magic '${magic}'`);
  }
  const channels = magic === 'P5' ? 1 : 3;
  let cursor = 2;
  const fields: number[] = [];
  for (let k = 0; k < 3; k++) {
    const { token, offset } = nextToken(bytes, cursor);
    const value = Number(token);
    if (!Number.isInteger(value) || value <= 0) {
      throw new FormatError(`bad netpbm header field '${token}'`);
    }
    fields.push(value);
    cursor = offset;
  }
  const [width, height, maxval] = fields;
  if (maxval > 255) {
    throw new FormatError(`unsupported netpbm maxval ${maxval} (16-bit rasters not handled)`);
  }
  cursor += 1; // exactly one whitespace byte separates header and raster
  const expected = width * height * channels;
  if (bytes.length - cursor !== expected) {
    throw new FormatError(
      `netpbm raster: expected ${expected} bytes, got ${bytes.length - cursor}`,
    );
  }
  return {
    width,
    height,
    channels,
    maxval,
    pixels: new Uint8Array(bytes.subarray(cursor, cursor + expected)),
  };
}
