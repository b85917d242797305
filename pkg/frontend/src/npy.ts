/**
 * NPY array file reading and writing.
 *
 * The writer emits format version 1.0 with the same header layout and
 * 64-byte padding rule as the reference scientific stack, so a file
 * built here is byte-identical to one written there for the same data.
 * The parser additionally accepts version 2.0/3.0 headers.
 */

import { BoundaryError } from "./errors.js";

const MAGIC = Buffer.from("\x93NUMPY", "latin1");

export type NpyData =
  | Float64Array
  | Float32Array
  | Uint8Array
  | Int32Array
  | BigInt64Array;

export interface NpyArray {
  /** dtype string as stored in the header, e.g. '<f8' or '|u1' */
  descr: string;
  shape: number[];
  fortranOrder: boolean;
  data: NpyData;
}

interface DtypeInfo {
  bytes: number;
  ctor: new (buf: ArrayBuffer) => NpyData;
}

const DTYPES: Record<string, DtypeInfo> = {
  "<f8": { bytes: 8, ctor: Float64Array },
  "<f4": { bytes: 4, ctor: Float32Array },
  "|u1": { bytes: 1, ctor: Uint8Array },
  "<u1": { bytes: 1, ctor: Uint8Array },
  "<i4": { bytes: 4, ctor: Int32Array },
  "<i8": { bytes: 8, ctor: BigInt64Array },
};

/** Canonical header spelling for a dtype (single-byte types use '|'). */
function canonicalDescr(descr: string): string {
  return descr === "<u1" ? "|u1" : descr;
}

function elementCount(shape: number[]): number {
  return shape.reduce((a, b) => a * b, 1);
}

export function parseNpy(buf: Buffer): NpyArray {
  if (buf.length < 10 || !buf.subarray(0, 6).equals(MAGIC)) {
    throw new BoundaryError("not an NPY file (bad magic)");
  }
  const major = buf[6];
  let headerLen: number;
  let headerStart: number;
  if (major === 1) {
    headerLen = buf.readUInt16LE(8);
    headerStart = 10;
  } else if (major === 2 || major === 3) {
    if (buf.length < 12) throw new BoundaryError("truncated NPY header");
    headerLen = buf.readUInt32LE(8);
    headerStart = 12;
  } else {
    throw new BoundaryError(`unsupported NPY version ${major}`);
  }
  const dataStart = headerStart + headerLen;
  if (buf.length < dataStart) throw new BoundaryError("truncated NPY header");
  const header = buf.subarray(headerStart, dataStart).toString("latin1");

  const descrMatch = header.match(/'descr':\s*'([^']+)'/);
  const orderMatch = header.match(/'fortran_order':\s*(True|False)/);
  const shapeMatch = header.match(/'shape':\s*\(([^)]*)\)/);
  if (!descrMatch || !orderMatch || !shapeMatch) {
    throw new BoundaryError("malformed NPY header dict");
  }
  const descr = descrMatch[1];
  const info = DTYPES[descr];
  if (!info) throw new BoundaryError(`unsupported dtype '${descr}'`);
  const shape = shapeMatch[1]
    .split(",")
    .map((s) => s.trim())
    .filter((s) => s.length > 0)
    .map((s) => {
      const v = Number(s);
      if (!Number.isInteger(v) || v < 0) {
        throw new BoundaryError(`bad shape entry '${s}'`);
      }
      return v;
    });

  const expected = elementCount(shape) * info.bytes;
  const available = buf.length - dataStart;
  if (available !== expected) {
    throw new BoundaryError(
      `NPY payload size mismatch: expected ${expected} bytes for shape ` +
        `(${shape.join(", ")}) ${descr}, got ${available}`,
    );
  }
  // copy into a fresh buffer so the typed view is aligned and detached
  const copy = new Uint8Array(expected);
  copy.set(buf.subarray(dataStart, dataStart + expected));
  return {
    descr,
    shape,
    fortranOrder: orderMatch[1] === "True",
    data: new info.ctor(copy.buffer),
  };
}

/**
 * Serialize a C-ordered array as NPY version 1.0.
 * @param descr dtype string; must match the typed array handed in
 */
export function buildNpy(descr: string, shape: number[], data: NpyData): Buffer {
  const canonical = canonicalDescr(descr);
  const info = DTYPES[canonical];
  if (!info) throw new BoundaryError(`unsupported dtype '${descr}'`);
  const count = elementCount(shape);
  if (data.length !== count) {
    throw new BoundaryError(
      `shape (${shape.join(", ")}) needs ${count} elements, got ${data.length}`,
    );
  }
  if (data.BYTES_PER_ELEMENT !== info.bytes) {
    throw new BoundaryError(
      `dtype '${canonical}' is ${info.bytes} bytes/element, ` +
        `array has ${data.BYTES_PER_ELEMENT}`,
    );
  }
  const shapeTuple =
    shape.length === 0
      ? "()"
      : shape.length === 1
        ? `(${shape[0]},)`
        : `(${shape.join(", ")})`;
  const dict = `{'descr': '${canonical}', 'fortran_order': False, 'shape': ${shapeTuple}, }`;
  const unpadded = 10 + dict.length + 1;
  const pad = (64 - (unpadded % 64)) % 64;
  const header = dict + " ".repeat(pad) + "\n";
  if (header.length > 0xffff) throw new BoundaryError("NPY header too long");
  const lenBuf = Buffer.alloc(2);
  lenBuf.writeUInt16LE(header.length);
  return Buffer.concat([
    MAGIC,
    Buffer.from([1, 0]),
    lenBuf,
    Buffer.from(header, "latin1"),
    Buffer.from(data.buffer, data.byteOffset, data.byteLength),
  ]);
}

/** Parse and require a specific dtype/rank, with a readable error. */
export function expectNpy(
  arr: NpyArray,
  descr: string,
  rank: number,
  what: string,
): NpyArray {
  if (canonicalDescr(arr.descr) !== canonicalDescr(descr)) {
    throw new BoundaryError(
      `${what}: expected dtype '${descr}', got '${arr.descr}'`,
    );
  }
  if (arr.shape.length !== rank) {
    throw new BoundaryError(
      `${what}: expected a rank-${rank} array, got shape (${arr.shape.join(", ")})`,
    );
  }
  if (arr.fortranOrder) {
    throw new BoundaryError(`${what}: Fortran-ordered arrays not supported`);
  }
  return arr;
}
