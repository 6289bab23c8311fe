import { mkdtempSync, readFileSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import { describe, expect, it } from 'vitest';

import {
  EmbeddingBatch,
  FormatError,
  HEADER_SIZE,
  ParameterError,
  ROLES,
  readPvpe,
  writePvpe,
} from '../src/pvpe.js';

function tmp(): string {
  return mkdtempSync(join(tmpdir(), 'pvpe-'));
}

function sampleBatch(): EmbeddingBatch {
  return {
    rows: 2,
    dim: 3,
    role: 'global_text',
    values: new Float32Array([0.5, -0.25, 1.0, 0.0, 2.5, -3.75]),
    labels: ['first', 'second'],
  };
}

describe('writePvpe', () => {
  it('round trips values, role and labels', () => {
    const path = join(tmp(), 'batch.pvpe');
    writePvpe(path, sampleBatch());
    const back = readPvpe(path);
    expect(back.rows).toBe(2);
    expect(back.dim).toBe(3);
    expect(back.role).toBe('global_text');
    expect(Array.from(back.values)).toEqual([0.5, -0.25, 1.0, 0.0, 2.5, -3.75]);
    expect(back.labels).toEqual(['first', 'second']);
  });

  it('lays the header out byte for byte', () => {
    const path = join(tmp(), 'batch.pvpe');
    writePvpe(path, { ...sampleBatch(), role: 'test_image' });
    const blob = readFileSync(path);
    expect(blob.length).toBe(HEADER_SIZE + 2 * 3 * 4);
    expect(blob.toString('ascii', 0, 4)).toBe('PVPE');
    expect(blob.readUInt32LE(4)).toBe(1);
    expect(blob.readUInt32LE(8)).toBe(2);
    expect(blob.readUInt32LE(12)).toBe(3);
    expect(blob.readUInt8(16)).toBe(ROLES.indexOf('test_image') + 1);
    expect(Array.from(blob.subarray(17, 24))).toEqual([0, 0, 0, 0, 0, 0, 0]);
    expect(blob.readFloatLE(HEADER_SIZE)).toBe(0.5);
  });

  it('write -> read -> write is byte-identical', () => {
    const dir = tmp();
    const first = join(dir, 'a.pvpe');
    const second = join(dir, 'b.pvpe');
    writePvpe(first, sampleBatch());
    writePvpe(second, readPvpe(first));
    expect(readFileSync(first).equals(readFileSync(second))).toBe(true);
    expect(readFileSync(first + '.labels', 'utf8')).toBe(
      readFileSync(second + '.labels', 'utf8'),
    );
  });

  it('writes no sidecar without labels', () => {
    const path = join(tmp(), 'bare.pvpe');
    const { labels: _labels, ...rest } = sampleBatch();
    writePvpe(path, rest);
    expect(readPvpe(path).labels).toBeUndefined();
  });

  it('rejects malformed batches', () => {
    const path = join(tmp(), 'bad.pvpe');
    const base = sampleBatch();
    expect(() => writePvpe(path, { ...base, rows: 0 })).toThrow(ParameterError);
    expect(() => writePvpe(path, { ...base, dim: 4 })).toThrow(/does not match/);
    expect(() =>
      writePvpe(path, { ...base, role: 'bogus' as EmbeddingBatch['role'] }),
    ).toThrow(/unknown role/);
    expect(() => writePvpe(path, { ...base, labels: ['only-one'] })).toThrow(
      /1 labels for 2 rows/,
    );
  });
});

describe('readPvpe', () => {
  function corrupt(mutate: (blob: Buffer) => Buffer): string {
    const path = join(tmp(), 'mut.pvpe');
    writePvpe(path, { ...sampleBatch(), labels: undefined });
    writeFileSync(path, mutate(readFileSync(path)));
    return path;
  }

  it('rejects corrupt headers and payloads', () => {
    expect(() => readPvpe(corrupt(blob => blob.subarray(0, 10)))).toThrow(/truncated header/);
    expect(() =>
      readPvpe(
        corrupt(blob => {
          blob.write('XXXX', 0, 'ascii');
          return blob;
        }),
      ),
    ).toThrow(/bad magic/);
    expect(() =>
      readPvpe(
        corrupt(blob => {
          blob.writeUInt32LE(9, 4);
          return blob;
        }),
      ),
    ).toThrow(/unsupported version/);
    expect(() =>
      readPvpe(
        corrupt(blob => {
          blob.writeUInt32LE(0, 8);
          return blob;
        }),
      ),
    ).toThrow(/degenerate extents/);
    expect(() =>
      readPvpe(
        corrupt(blob => {
          blob.writeUInt8(6, 16);
          return blob;
        }),
      ),
    ).toThrow(/unknown role tag/);
    expect(() =>
      readPvpe(
        corrupt(blob => {
          blob.writeUInt8(1, 20);
          return blob;
        }),
      ),
    ).toThrow(/reserved bytes/);
    expect(() => readPvpe(corrupt(blob => blob.subarray(0, blob.length - 4)))).toThrow(
      /expected 24 bytes, got 20/,
    );
  });

  it('skips comment lines in the sidecar', () => {
    const path = join(tmp(), 'labeled.pvpe');
    writePvpe(path, { ...sampleBatch(), comments: ['provenance note', 'another'] });
    const sidecar = readFileSync(path + '.labels', 'utf8');
    expect(sidecar.startsWith('# provenance note\n# another\n')).toBe(true);
    expect(readPvpe(path).labels).toEqual(['first', 'second']);
  });

  it('rejects a sidecar with the wrong row count', () => {
    const path = join(tmp(), 'short.pvpe');
    writePvpe(path, sampleBatch());
    writeFileSync(path + '.labels', 'just-one\n');
    expect(() => readPvpe(path)).toThrow(FormatError);
  });
});
