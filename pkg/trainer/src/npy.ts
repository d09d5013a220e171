/** Minimal reader for .npy files holding little-endian float32 arrays. */

export interface NpyArray {
  shape: number[];
  data: Float32Array;
}

export function parseNpy(bytes: Uint8Array): NpyArray {
  const magic = String.fromCharCode(...bytes.subarray(1, 6));
  if (bytes[0] !== 0x93 || magic !== "NUMPY") throw new Error("not a .npy file");
  const major = bytes[6];
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  let headerLen: number;
  let headerStart: number;
  if (major === 1) {
    headerLen = view.getUint16(8, true);
    headerStart = 10;
  } else {
    headerLen = view.getUint32(8, true);
    headerStart = 12;
  }
  const header = String.fromCharCode(...bytes.subarray(headerStart, headerStart + headerLen));
  if (!header.includes("'<f4'")) throw new Error(`unsupported dtype in ${header.trim()}`);
  if (!/'fortran_order':\s*False/.test(header)) throw new Error("fortran order not supported");
  const shapeMatch = header.match(/'shape':\s*\(([^)]*)\)/);
  if (!shapeMatch) throw new Error("missing shape in npy header");
  const shape = shapeMatch[1]
    .split(",")
    .map((s) => s.trim())
    .filter((s) => s.length > 0)
    .map(Number);
  const count = shape.reduce((a, b) => a * b, 1);
  const start = headerStart + headerLen;
  if (start + 4 * count > bytes.length) throw new Error("npy data truncated");
  // copy realigns the payload regardless of the source buffer offset
  const chunk = bytes.slice(start, start + 4 * count);
  return { shape, data: new Float32Array(chunk.buffer, 0, count) };
}
