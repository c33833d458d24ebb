/**
 * Minimal ZIP reader: enough to pull classes*.dex out of an APK.
 *
 * Walks the end-of-central-directory record and the central directory,
 * then reads each entry through its local header. Supports stored (0)
 * and deflate (8) entries. CRCs are not verified here; the DEX parser
 * performs its own structural validation.
 */

import { inflateRawSync } from "node:zlib";

const EOCD_SIG = 0x06054b50;
const CDIR_SIG = 0x02014b50;
const LOCAL_SIG = 0x04034b50;

export class ZipError extends Error {}

export interface ZipEntry {
  name: string;
  method: number;
  compressedSize: number;
  uncompressedSize: number;
  localHeaderOffset: number;
}

function findEocd(buf: Buffer): number {
  // EOCD is at the end, possibly followed by a comment up to 64 KiB
  const min = Math.max(0, buf.length - 22 - 0xffff);
  for (let pos = buf.length - 22; pos >= min; pos--) {
    if (buf.readUInt32LE(pos) === EOCD_SIG) {
      return pos;
    }
  }
  throw new ZipError("no end-of-central-directory record (not a ZIP/APK)");
}

export function listEntries(buf: Buffer): ZipEntry[] {
  if (buf.length < 22) {
    throw new ZipError("file too small to be a ZIP/APK");
  }
  const eocd = findEocd(buf);
  const count = buf.readUInt16LE(eocd + 10);
  let pos = buf.readUInt32LE(eocd + 16);
  const entries: ZipEntry[] = [];
  for (let i = 0; i < count; i++) {
    if (pos + 46 > buf.length || buf.readUInt32LE(pos) !== CDIR_SIG) {
      throw new ZipError(`corrupt central directory at entry ${i}`);
    }
    const method = buf.readUInt16LE(pos + 10);
    const compressedSize = buf.readUInt32LE(pos + 20);
    const uncompressedSize = buf.readUInt32LE(pos + 24);
    const nameLen = buf.readUInt16LE(pos + 28);
    const extraLen = buf.readUInt16LE(pos + 30);
    const commentLen = buf.readUInt16LE(pos + 32);
    const localHeaderOffset = buf.readUInt32LE(pos + 42);
    const name = buf.subarray(pos + 46, pos + 46 + nameLen).toString("utf8");
    entries.push({ name, method, compressedSize, uncompressedSize, localHeaderOffset });
    pos += 46 + nameLen + extraLen + commentLen;
  }
  return entries;
}

export function readEntry(buf: Buffer, entry: ZipEntry): Buffer {
  const pos = entry.localHeaderOffset;
  if (pos + 30 > buf.length || buf.readUInt32LE(pos) !== LOCAL_SIG) {
    throw new ZipError(`corrupt local header for ${entry.name}`);
  }
  const nameLen = buf.readUInt16LE(pos + 26);
  const extraLen = buf.readUInt16LE(pos + 28);
  const start = pos + 30 + nameLen + extraLen;
  const raw = buf.subarray(start, start + entry.compressedSize);
  if (raw.length !== entry.compressedSize) {
    throw new ZipError(`truncated data for ${entry.name}`);
  }
  if (entry.method === 0) {
    return Buffer.from(raw);
  }
  if (entry.method === 8) {
    try {
      return inflateRawSync(raw);
    } catch (err) {
      throw new ZipError(`failed to inflate ${entry.name}: ${String(err)}`);
    }
  }
  throw new ZipError(`unsupported compression method ${entry.method} for ${entry.name}`);
}

/** classes.dex, classes2.dex, ... in deterministic (numeric) order. */
export function dexEntries(buf: Buffer): ZipEntry[] {
  const pattern = /^classes(\d*)\.dex$/;
  const hits = listEntries(buf).filter((e) => pattern.test(e.name));
  hits.sort((a, b) => {
    const na = Number(a.name.match(pattern)![1] || "1");
    const nb = Number(b.name.match(pattern)![1] || "1");
    return na - nb;
  });
  return hits;
}
