/**
 * Typed-array tensor views and the TNS1 container.
 *
 * TNS1 layout (all little-endian): magic "TNS1", u32 rank, u32 dims[rank],
 * u32 dtype code (0 = f32, 1 = f64, 2 = u8), raw payload.
 */

export type Dtype = "f32" | "f64" | "u8";

export type TensorData = Float32Array | Float64Array | Uint8Array;

export interface ArrayView {
  shape: number[];
  dtype: Dtype;
  data: TensorData;
  /** True when `data` aliases the decoded buffer instead of copying it. */
  zeroCopy?: boolean;
}

const MAGIC = 0x31534e54; // "TNS1" read as little-endian u32

const DTYPE_CODES: Record<Dtype, number> = { f32: 0, f64: 1, u8: 2 };

const CODE_DTYPES: Record<number, Dtype> = { 0: "f32", 1: "f64", 2: "u8" };

const BYTES_PER: Record<Dtype, number> = { f32: 4, f64: 8, u8: 1 };

export class DataFormatError extends Error {
  constructor(message: string, readonly offset?: number) {
    super(offset === undefined ? message : `${message} (at byte offset ${offset})`);
    this.name = "DataFormatError";
  }
}

export function elementCount(shape: number[]): number {
  return shape.reduce((a, b) => a * b, 1);
}

function dtypeOf(data: TensorData): Dtype {
  if (data instanceof Float32Array) return "f32";
  if (data instanceof Float64Array) return "f64";
  return "u8";
}

/** Wrap a typed array as an ArrayView, checking the element count. */
export function view(data: TensorData, shape: number[]): ArrayView {
  if (elementCount(shape) !== data.length) {
    throw new DataFormatError(
      `shape [${shape.join(", ")}] needs ${elementCount(shape)} elements, got ${data.length}`,
    );
  }
  return { shape: [...shape], dtype: dtypeOf(data), data };
}

/** Serialize a tensor view into TNS1 bytes. */
export function encodeTns1(tensor: ArrayView): Uint8Array {
  const { shape, dtype, data } = tensor;
  if (elementCount(shape) !== data.length) {
    throw new DataFormatError("tensor shape does not match its data length");
  }
  const headerBytes = 12 + 4 * shape.length;
  const out = new Uint8Array(headerBytes + data.byteLength);
  const dv = new DataView(out.buffer);
  dv.setUint32(0, MAGIC, true);
  dv.setUint32(4, shape.length, true);
  shape.forEach((dim, i) => dv.setUint32(8 + 4 * i, dim, true));
  dv.setUint32(8 + 4 * shape.length, DTYPE_CODES[dtype], true);
  out.set(new Uint8Array(data.buffer, data.byteOffset, data.byteLength), headerBytes);
  return out;
}

/**
 * Parse TNS1 bytes into a tensor view.
 *
 * The payload is aliased zero-copy when its absolute byte offset satisfies
 * the element alignment; otherwise the data is copied once. Never aliases
 * memory it does not own a reference to.
 */
export function decodeTns1(bytes: Uint8Array): ArrayView {
  if (bytes.byteLength < 8) {
    throw new DataFormatError("TNS1 blob shorter than fixed header", 0);
  }
  const dv = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  if (dv.getUint32(0, true) !== MAGIC) {
    throw new DataFormatError("bad magic, expected TNS1", 0);
  }
  const rank = dv.getUint32(4, true);
  if (rank > 32) {
    throw new DataFormatError(`implausible rank ${rank}`, 4);
  }
  if (bytes.byteLength < 12 + 4 * rank) {
    throw new DataFormatError("truncated TNS1 header", bytes.byteLength);
  }
  const shape: number[] = [];
  for (let i = 0; i < rank; i++) shape.push(dv.getUint32(8 + 4 * i, true));
  const code = dv.getUint32(8 + 4 * rank, true);
  const dtype = CODE_DTYPES[code];
  if (dtype === undefined) {
    throw new DataFormatError(`unknown dtype code ${code}`, 8 + 4 * rank);
  }
  const headerBytes = 12 + 4 * rank;
  const count = elementCount(shape);
  const expected = count * BYTES_PER[dtype];
  if (bytes.byteLength - headerBytes !== expected) {
    throw new DataFormatError(
      `payload is ${bytes.byteLength - headerBytes} bytes, expected ${expected}`,
      headerBytes,
    );
  }
  const absOffset = bytes.byteOffset + headerBytes;
  const aligned = absOffset % BYTES_PER[dtype] === 0;
  let data: TensorData;
  if (dtype === "f32") {
    data = aligned
      ? new Float32Array(bytes.buffer, absOffset, count)
      : new Float32Array(bytes.slice(headerBytes).buffer, 0, count);
  } else if (dtype === "f64") {
    data = aligned
      ? new Float64Array(bytes.buffer, absOffset, count)
      : new Float64Array(bytes.slice(headerBytes).buffer, 0, count);
  } else {
    data = new Uint8Array(bytes.buffer, absOffset, count);
  }
  return { shape, dtype, data, zeroCopy: aligned };
}

/** Base64 helpers for tensors travelling over the HTTP API. */
export function tensorToB64(tensor: ArrayView): string {
  const bytes = encodeTns1(tensor);
  return Buffer.from(bytes.buffer, bytes.byteOffset, bytes.byteLength).toString("base64");
}

export function tensorFromB64(payload: string): ArrayView {
  return decodeTns1(new Uint8Array(Buffer.from(payload, "base64")));
}

/** Raw float32 row block (the on-disk .bin cloud layout) to base64. */
export function cloudToB64(points: Float32Array): string {
  return Buffer.from(points.buffer, points.byteOffset, points.byteLength).toString("base64");
}

export function cloudFromB64(payload: string, attrDim: number): ArrayView {
  const buf = Buffer.from(payload, "base64");
  const width = 3 + attrDim;
  if (buf.byteLength % (4 * width) !== 0) {
    throw new DataFormatError(
      `cloud payload of ${buf.byteLength} bytes is not rows of ${width} float32`,
    );
  }
  const data = toAlignedFloat32(buf);
  return { shape: [data.length / width, width], dtype: "f32", data };
}

/** Float32 view over a buffer, copying only when misaligned. */
export function toAlignedFloat32(buf: Buffer | Uint8Array): Float32Array {
  if (buf.byteOffset % 4 === 0) {
    return new Float32Array(buf.buffer, buf.byteOffset, buf.byteLength / 4);
  }
  const copy = new Uint8Array(buf);
  return new Float32Array(copy.buffer, 0, copy.byteLength / 4);
}
