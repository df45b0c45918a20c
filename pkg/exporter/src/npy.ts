/**
 * Minimal NPY v1.0 codec for little-endian float32 arrays.
 *
 * Deliberately narrow: one dtype, version 1.0 only, always row-major on
 * write. The header (magic through the trailing newline) is space-padded so
 * the payload starts on a 64-byte boundary.
 */

const MAGIC = Buffer.from('\x93NUMPY', 'latin1');

export function encodeNpy(data: Float32Array, shape: number[]): Buffer {
  const count = shape.reduce((a, b) => a * b, 1);
  if (count !== data.length) {
    throw new Error(`shape [${shape}] implies ${count} elements, got ${data.length}`);
  }
  const shapeRepr = shape.length === 1 ? `(${shape[0]},)` : `(${shape.join(', ')})`;
  let header = `{'descr': '<f4', 'fortran_order': False, 'shape': ${shapeRepr}, }`;
  const unpadded = 10 + header.length + 1;
  const pad = (64 - (unpadded % 64)) % 64;
  header = header + ' '.repeat(pad) + '\n';

  const out = Buffer.alloc(10 + header.length + 4 * count);
  MAGIC.copy(out, 0);
  out[6] = 1; // major
  out[7] = 0; // minor
  out.writeUInt16LE(header.length, 8);
  out.write(header, 10, 'latin1');
  // normalize byte order explicitly rather than trusting the host buffer view
  for (let i = 0; i < count; i++) {
    out.writeFloatLE(data[i], 10 + header.length + 4 * i);
  }
  return out;
}

export interface NpyArray {
  data: Float32Array;
  shape: number[];
}

/** Strict inverse of encodeNpy; used by the round-trip tests. */
export function decodeNpy(buf: Buffer): NpyArray {
  if (buf.length < 10 || !buf.subarray(0, 6).equals(MAGIC)) {
    throw new Error('not an NPY file (bad magic)');
  }
  if (buf[6] !== 1 || buf[7] !== 0) {
    throw new Error(`unsupported NPY version ${buf[6]}.${buf[7]}`);
  }
  const headerLen = buf.readUInt16LE(8);
  const header = buf.subarray(10, 10 + headerLen).toString('latin1');
  if (!header.includes("'descr': '<f4'")) {
    throw new Error(`unsupported dtype in header: ${header.trim()}`);
  }
  if (!header.includes("'fortran_order': False")) {
    throw new Error('only row-major NPY files are produced or read here');
  }
  const shapeMatch = header.match(/'shape':\s*\(([^)]*)\)/);
  if (!shapeMatch) {
    throw new Error(`no shape in header: ${header.trim()}`);
  }
  const shape = shapeMatch[1]
    .split(',')
    .map((s) => s.trim())
    .filter((s) => s.length > 0)
    .map((s) => parseInt(s, 10));
  const count = shape.reduce((a, b) => a * b, 1);
  const payload = buf.subarray(10 + headerLen);
  if (payload.length !== 4 * count) {
    throw new Error(`payload is ${payload.length} bytes, expected ${4 * count}`);
  }
  const data = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    data[i] = payload.readFloatLE(4 * i);
  }
  return { data, shape };
}
