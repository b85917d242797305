/**
 * Reader for label submission archives.
 *
 * A submission is a plain ZIP whose entries are one uint8 NPY per zone.
 * The core writes entries uncompressed with zeroed timestamps so the
 * bytes are reproducible; this reader also inflates deflated entries so
 * archives from other tooling still load.
 */

import { inflateRawSync } from "node:zlib";
import { readFileSync } from "node:fs";
import { BoundaryError } from "./errors.js";
import { parseNpy, expectNpy } from "./npy.js";

const EOCD_SIG = 0x06054b50;
const CENTRAL_SIG = 0x02014b50;
const LOCAL_SIG = 0x04034b50;

interface ZipEntry {
  name: string;
  data: Buffer;
}

function findEocd(buf: Buffer): number {
  // comment may trail the record, so scan backwards over its max span
  const lo = Math.max(0, buf.length - 22 - 0xffff);
  for (let i = buf.length - 22; i >= lo; i--) {
    if (buf.readUInt32LE(i) === EOCD_SIG) return i;
  }
  throw new BoundaryError("not a ZIP archive (no end-of-directory record)");
}

/** List the entries of a ZIP archive, decompressing where needed. */
export function readZip(buf: Buffer): ZipEntry[] {
  if (buf.length < 22) throw new BoundaryError("not a ZIP archive (too short)");
  const eocd = findEocd(buf);
  const count = buf.readUInt16LE(eocd + 10);
  let off = buf.readUInt32LE(eocd + 16);
  const entries: ZipEntry[] = [];
  for (let i = 0; i < count; i++) {
    if (buf.readUInt32LE(off) !== CENTRAL_SIG) {
      throw new BoundaryError("corrupt ZIP central directory");
    }
    const method = buf.readUInt16LE(off + 10);
    const csize = buf.readUInt32LE(off + 20);
    const nameLen = buf.readUInt16LE(off + 28);
    const extraLen = buf.readUInt16LE(off + 30);
    const commentLen = buf.readUInt16LE(off + 32);
    const localOff = buf.readUInt32LE(off + 42);
    const name = buf
      .subarray(off + 46, off + 46 + nameLen)
      .toString("utf8");

    if (buf.readUInt32LE(localOff) !== LOCAL_SIG) {
      throw new BoundaryError(`corrupt ZIP local header for '${name}'`);
    }
    const localNameLen = buf.readUInt16LE(localOff + 26);
    const localExtraLen = buf.readUInt16LE(localOff + 28);
    const dataStart = localOff + 30 + localNameLen + localExtraLen;
    const raw = buf.subarray(dataStart, dataStart + csize);
    let data: Buffer;
    if (method === 0) {
      data = Buffer.from(raw);
    } else if (method === 8) {
      data = inflateRawSync(raw);
    } else {
      throw new BoundaryError(
        `unsupported compression method ${method} for '${name}'`,
      );
    }
    entries.push({ name, data });
    off += 46 + nameLen + extraLen + commentLen;
  }
  return entries;
}

export interface SubmissionOptions {
  /** Reject labels outside [0, nClasses) that are not the 255 sentinel. */
  nClasses?: number;
  /** When given, the archive must contain exactly these zones. */
  expectedZones?: string[];
}

/** Zone name to label vector, in archive order. */
export function readSubmission(
  source: string | Buffer,
  options: SubmissionOptions = {},
): Map<string, Uint8Array> {
  const nClasses = options.nClasses ?? 11;
  const buf = typeof source === "string" ? readFileSync(source) : source;
  const out = new Map<string, Uint8Array>();
  for (const entry of readZip(buf)) {
    if (!entry.name.endsWith(".npy")) {
      throw new BoundaryError(
        `unexpected archive entry '${entry.name}' (zones are stored as .npy)`,
      );
    }
    const zone = entry.name.slice(0, -4);
    const arr = expectNpy(parseNpy(entry.data), "|u1", 1, `zone '${zone}'`);
    const labels = arr.data as Uint8Array;
    for (let i = 0; i < labels.length; i++) {
      const v = labels[i];
      if (v >= nClasses && v !== 255) {
        throw new BoundaryError(
          `zone '${zone}': label ${v} at index ${i} is outside ` +
            `[0, ${nClasses}) and is not the 255 unlabeled sentinel`,
        );
      }
    }
    if (out.has(zone)) {
      throw new BoundaryError(`duplicate zone '${zone}' in archive`);
    }
    out.set(zone, labels);
  }
  if (options.expectedZones) {
    const want = [...options.expectedZones].sort();
    const got = [...out.keys()].sort();
    const missing = want.filter((z) => !out.has(z));
    const extra = got.filter((z) => !want.includes(z));
    if (missing.length || extra.length) {
      const parts: string[] = [];
      if (missing.length) parts.push(`missing zones: ${missing.join(", ")}`);
      if (extra.length) parts.push(`unexpected zones: ${extra.join(", ")}`);
      throw new BoundaryError(parts.join("; "));
    }
  }
  return out;
}
