import { describe, expect, it } from 'vitest';

import { decodeNpy, encodeNpy } from '../src/npy.js';

describe('encodeNpy', () => {
  it('writes the v1.0 header with a 64-byte-aligned payload', () => {
    const buf = encodeNpy(new Float32Array([0, 0, 0, 0]), [2, 2]);
    expect(buf.subarray(0, 6)).toEqual(Buffer.from('\x93NUMPY', 'latin1'));
    expect(buf[6]).toBe(1);
    expect(buf[7]).toBe(0);
    const headerLen = buf.readUInt16LE(8);
    expect((10 + headerLen) % 64).toBe(0);
    const header = buf.subarray(10, 10 + headerLen).toString('latin1');
    expect(header).toContain("'descr': '<f4'");
    expect(header).toContain("'fortran_order': False");
    expect(header).toContain("'shape': (2, 2)");
    expect(header.endsWith('\n')).toBe(true);
  });

  it('writes 1-d shapes with a trailing comma', () => {
    const buf = encodeNpy(new Float32Array([1, 2, 3]), [3]);
    expect(buf.subarray(10).toString('latin1')).toContain("'shape': (3,)");
  });

  it('stores the payload little-endian row-major', () => {
    const buf = encodeNpy(new Float32Array([1.5, -2.25]), [2]);
    const payload = buf.subarray(buf.length - 8);
    expect(payload.readFloatLE(0)).toBe(1.5);
    expect(payload.readFloatLE(4)).toBe(-2.25);
  });

  it('rejects shape/data mismatches', () => {
    expect(() => encodeNpy(new Float32Array(5), [2, 2])).toThrow(/4 elements/);
  });

  it('handles empty arrays', () => {
    const out = decodeNpy(encodeNpy(new Float32Array(0), [0]));
    expect(out.shape).toEqual([0]);
    expect(out.data.length).toBe(0);
  });
});

describe('decodeNpy', () => {
  it('round-trips bit-exactly', () => {
    const data = new Float32Array([1.1, -0.0, 3.4e38, 1e-40, 7]);
    const out = decodeNpy(encodeNpy(data, [5]));
    expect(out.shape).toEqual([5]);
    expect(new Uint32Array(out.data.buffer)).toEqual(new Uint32Array(data.buffer));
  });

  it('round-trips 2-d shapes', () => {
    const data = Float32Array.from({ length: 6 }, (_, i) => i * 0.5);
    const out = decodeNpy(encodeNpy(data, [2, 3]));
    expect(out.shape).toEqual([2, 3]);
    expect(Array.from(out.data)).toEqual(Array.from(data));
  });

  it('rejects bad magic', () => {
    expect(() => decodeNpy(Buffer.from('not an npy file'))).toThrow(/magic/);
  });

  it('rejects other versions', () => {
    const buf = encodeNpy(new Float32Array([1]), [1]);
    buf[6] = 2;
    expect(() => decodeNpy(buf)).toThrow(/version 2\.0/);
  });

  it('rejects truncated payloads', () => {
    const buf = encodeNpy(new Float32Array([1, 2, 3]), [3]);
    expect(() => decodeNpy(buf.subarray(0, buf.length - 4))).toThrow(/payload/);
  });
});
