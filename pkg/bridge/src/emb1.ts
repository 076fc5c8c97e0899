/**
 * EMB1 binary embedding format (little-endian), byte-compatible with the
 * recognition engine:
 *
 *   bytes  0-3   magic  "MVEM"
 *   bytes  4-7   version  u32 = 1
 *   bytes  8-11  rows     u32
 *   bytes 12-15  cols     u32
 *   bytes 16-19  dtype    u32 (1 = f32)
 *   bytes 20-23  reserved u32 = 0
 *   bytes 24-    payload  rows * cols * 4 bytes, row-major f32
 */

import { readFileSync, writeFileSync } from 'node:fs';

export const EMB1_MAGIC = 'MVEM';
export const EMB1_VERSION = 1;
export const EMB1_DTYPE_F32 = 1;
export const EMB1_HEADER_SIZE = 24;

export interface Emb1Matrix {
  rows: number;
  cols: number;
  /** row-major, rows*cols values */
  data: Float32Array;
}

export function matrixFromRows(rows: Float32Array[] | number[][], cols?: number): Emb1Matrix {
  if (rows.length === 0) {
    if (cols === undefined) throw new Error('empty matrix needs an explicit cols');
    return { rows: 0, cols, data: new Float32Array(0) };
  }
  const width = rows[0].length;
  const data = new Float32Array(rows.length * width);
  rows.forEach((row, i) => {
    if (row.length !== width) {
      throw new Error(`row ${i} has ${row.length} values, expected ${width}`);
    }
    data.set(row instanceof Float32Array ? row : Float32Array.from(row), i * width);
  });
  return { rows: rows.length, cols: width, data };
}

export function encodeEmb1(matrix: Emb1Matrix): Buffer {
  if (matrix.data.length !== matrix.rows * matrix.cols) {
    throw new Error(
      `payload has ${matrix.data.length} values, expected ${matrix.rows * matrix.cols}`
    );
  }
  const buf = Buffer.alloc(EMB1_HEADER_SIZE + matrix.data.length * 4);
  buf.write(EMB1_MAGIC, 0, 'ascii');
  buf.writeUInt32LE(EMB1_VERSION, 4);
  buf.writeUInt32LE(matrix.rows, 8);
  buf.writeUInt32LE(matrix.cols, 12);
  buf.writeUInt32LE(EMB1_DTYPE_F32, 16);
  buf.writeUInt32LE(0, 20);
  for (let i = 0; i < matrix.data.length; i++) {
    buf.writeFloatLE(matrix.data[i], EMB1_HEADER_SIZE + i * 4);
  }
  return buf;
}

export function decodeEmb1(buf: Buffer): Emb1Matrix {
  if (buf.length < EMB1_HEADER_SIZE) {
    throw new Error(`truncated EMB1 stream: ${buf.length} bytes`);
  }
  if (buf.toString('ascii', 0, 4) !== EMB1_MAGIC) {
    throw new Error('bad EMB1 magic');
  }
  const version = buf.readUInt32LE(4);
  if (version !== EMB1_VERSION) throw new Error(`unsupported EMB1 version ${version}`);
  const rows = buf.readUInt32LE(8);
  const cols = buf.readUInt32LE(12);
  const dtype = buf.readUInt32LE(16);
  if (dtype !== EMB1_DTYPE_F32) throw new Error(`unsupported EMB1 dtype ${dtype}`);
  if (buf.readUInt32LE(20) !== 0) throw new Error('nonzero EMB1 reserved field');
  const expected = rows * cols * 4;
  if (buf.length - EMB1_HEADER_SIZE !== expected) {
    throw new Error(
      `EMB1 payload is ${buf.length - EMB1_HEADER_SIZE} bytes, expected ${expected}`
    );
  }
  const data = new Float32Array(rows * cols);
  for (let i = 0; i < data.length; i++) {
    data[i] = buf.readFloatLE(EMB1_HEADER_SIZE + i * 4);
  }
  return { rows, cols, data };
}

export function writeEmb1File(path: string, matrix: Emb1Matrix): void {
  writeFileSync(path, encodeEmb1(matrix));
}

export function readEmb1File(path: string): Emb1Matrix {
  return decodeEmb1(readFileSync(path));
}
