/**
 * DEX (Dalvik executable) parser: just enough structure to recover the
 * method call graph: string/type/proto/method tables, class definitions
 * with their code items, and the invoke instructions inside them.
 *
 * Format reference: the published dex file layout (v035+). Checksums are
 * not re-verified; structural bounds are.
 */

export class DexError extends Error {}

const HEADER_SIZE = 0x70;
const ENDIAN_CONSTANT = 0x12345678;

export interface DexMethodRef {
  classDescriptor: string;
  name: string;
  protoShorty: string;
  paramDescriptors: string[];
  returnDescriptor: string;
}

export interface DexMethodDef {
  methodIdx: number;
  accessFlags: number;
  invokes: number[]; // method_idx of every call site, in code order
}

export interface DexFile {
  methodRefs: DexMethodRef[];
  definitions: DexMethodDef[];
}

class Reader {
  constructor(readonly buf: Buffer) {}

  u8(pos: number): number {
    this.check(pos, 1);
    return this.buf.readUInt8(pos);
  }

  u16(pos: number): number {
    this.check(pos, 2);
    return this.buf.readUInt16LE(pos);
  }

  u32(pos: number): number {
    this.check(pos, 4);
    return this.buf.readUInt32LE(pos);
  }

  uleb128(pos: number): [value: number, next: number] {
    let result = 0;
    let shift = 0;
    for (;;) {
      const byte = this.u8(pos++);
      result |= (byte & 0x7f) << shift;
      if ((byte & 0x80) === 0) {
        return [result >>> 0, pos];
      }
      shift += 7;
      if (shift > 35) {
        throw new DexError("uleb128 runs too long");
      }
    }
  }

  mutf8(pos: number): string {
    // modified UTF-8: NUL-terminated, 1-3 byte sequences
    const out: number[] = [];
    for (;;) {
      const a = this.u8(pos++);
      if (a === 0) {
        break;
      }
      if (a < 0x80) {
        out.push(a);
      } else if ((a & 0xe0) === 0xc0) {
        const b = this.u8(pos++);
        out.push(((a & 0x1f) << 6) | (b & 0x3f));
      } else if ((a & 0xf0) === 0xe0) {
        const b = this.u8(pos++);
        const c = this.u8(pos++);
        out.push(((a & 0x0f) << 12) | ((b & 0x3f) << 6) | (c & 0x3f));
      } else {
        throw new DexError(`bad MUTF-8 lead byte 0x${a.toString(16)}`);
      }
    }
    return String.fromCharCode(...out);
  }

  private check(pos: number, len: number): void {
    if (pos < 0 || pos + len > this.buf.length) {
      throw new DexError(`read past end of dex (offset ${pos})`);
    }
  }
}

/**
 * Instruction widths in 16-bit code units, indexed by opcode. Payload
 * pseudo-instructions (packed-switch / sparse-switch / fill-array-data
 * under opcode 0x00) are handled separately.
 */
const WIDTHS = new Uint8Array(256);
{
  const set = (lo: number, hi: number, w: number) => {
    for (let op = lo; op <= hi; op++) {
      WIDTHS[op] = w;
    }
  };
  set(0x00, 0x01, 1);
  set(0x02, 0x02, 2);
  set(0x03, 0x03, 3);
  set(0x04, 0x04, 1);
  set(0x05, 0x05, 2);
  set(0x06, 0x06, 3);
  set(0x07, 0x07, 1);
  set(0x08, 0x08, 2);
  set(0x09, 0x09, 3);
  set(0x0a, 0x12, 1); // move-result*..const/4
  set(0x13, 0x13, 2);
  set(0x14, 0x14, 3);
  set(0x15, 0x16, 2);
  set(0x17, 0x17, 3);
  set(0x18, 0x18, 5); // const-wide
  set(0x19, 0x1a, 2);
  set(0x1b, 0x1b, 3); // const-string/jumbo
  set(0x1c, 0x1c, 2);
  set(0x1d, 0x1e, 1);
  set(0x1f, 0x20, 2);
  set(0x21, 0x21, 1);
  set(0x22, 0x23, 2);
  set(0x24, 0x26, 3); // filled-new-array*, fill-array-data
  set(0x27, 0x28, 1);
  set(0x29, 0x29, 2);
  set(0x2a, 0x2c, 3); // goto/32, packed-switch, sparse-switch
  set(0x2d, 0x3d, 2); // cmp*, if-test*, if-testz*
  set(0x3e, 0x43, 1); // unused
  set(0x44, 0x6d, 2); // aget*..sput*
  set(0x6e, 0x72, 3); // invoke-kind
  set(0x73, 0x73, 1); // unused
  set(0x74, 0x78, 3); // invoke-kind/range
  set(0x79, 0x7a, 1); // unused
  set(0x7b, 0x8f, 1); // unop
  set(0x90, 0xaf, 2); // binop
  set(0xb0, 0xcf, 1); // binop/2addr
  set(0xd0, 0xd7, 2); // binop/lit16
  set(0xd8, 0xe2, 2); // binop/lit8
  set(0xe3, 0xff, 1); // unused / odex-only
}

const INVOKE_OPS = new Set([0x6e, 0x6f, 0x70, 0x71, 0x72, 0x74, 0x75, 0x76, 0x77, 0x78]);

function payloadWidth(r: Reader, insnsOff: number, unit: number): number {
  const ident = r.u16(insnsOff + unit * 2);
  if (ident === 0x0100) {
    // packed-switch-payload: ident, size, first_key(2), size targets(2 each)
    const size = r.u16(insnsOff + (unit + 1) * 2);
    return size * 2 + 4;
  }
  if (ident === 0x0200) {
    // sparse-switch-payload: ident, size, keys(2*size), targets(2*size)
    const size = r.u16(insnsOff + (unit + 1) * 2);
    return size * 4 + 2;
  }
  if (ident === 0x0300) {
    // fill-array-data-payload: ident, element_width, size(u32), data
    const width = r.u16(insnsOff + (unit + 1) * 2);
    const size = r.u32(insnsOff + (unit + 2) * 2);
    return Math.floor((size * width + 1) / 2) + 4;
  }
  return WIDTHS[0x00];
}

function scanInvokes(r: Reader, insnsOff: number, insnsSize: number): number[] {
  const invokes: number[] = [];
  let unit = 0;
  while (unit < insnsSize) {
    const first = r.u16(insnsOff + unit * 2);
    const op = first & 0xff;
    let width: number;
    if (op === 0x00 && (first >> 8) !== 0) {
      width = payloadWidth(r, insnsOff, unit);
    } else {
      width = WIDTHS[op];
    }
    if (INVOKE_OPS.has(op)) {
      invokes.push(r.u16(insnsOff + (unit + 1) * 2));
    }
    if (width < 1) {
      throw new DexError(`zero-width opcode 0x${op.toString(16)} at unit ${unit}`);
    }
    unit += width;
  }
  return invokes;
}

export function parseDex(buf: Buffer): DexFile {
  const r = new Reader(buf);
  if (buf.length < HEADER_SIZE) {
    throw new DexError("file too small to be a dex");
  }
  const magic = buf.subarray(0, 4).toString("latin1");
  if (magic !== "dex\n") {
    throw new DexError("bad dex magic");
  }
  const version = buf.subarray(4, 7).toString("latin1");
  if (!/^\d{3}$/.test(version)) {
    throw new DexError(`bad dex version ${JSON.stringify(version)}`);
  }
  if (r.u32(40) !== ENDIAN_CONSTANT) {
    throw new DexError("big-endian dex files are not supported");
  }

  const stringIdsSize = r.u32(56);
  const stringIdsOff = r.u32(60);
  const typeIdsSize = r.u32(64);
  const typeIdsOff = r.u32(68);
  const protoIdsSize = r.u32(72);
  const protoIdsOff = r.u32(76);
  const methodIdsSize = r.u32(88);
  const methodIdsOff = r.u32(92);
  const classDefsSize = r.u32(96);
  const classDefsOff = r.u32(100);

  const strings: string[] = new Array(stringIdsSize);
  for (let i = 0; i < stringIdsSize; i++) {
    const dataOff = r.u32(stringIdsOff + i * 4);
    const [, afterLen] = r.uleb128(dataOff);
    strings[i] = r.mutf8(afterLen);
  }

  const types: string[] = new Array(typeIdsSize);
  for (let i = 0; i < typeIdsSize; i++) {
    types[i] = strings[r.u32(typeIdsOff + i * 4)];
  }

  const protoParams: string[][] = new Array(protoIdsSize);
  const protoReturn: string[] = new Array(protoIdsSize);
  const protoShorty: string[] = new Array(protoIdsSize);
  for (let i = 0; i < protoIdsSize; i++) {
    const base = protoIdsOff + i * 12;
    protoShorty[i] = strings[r.u32(base)];
    protoReturn[i] = types[r.u32(base + 4)];
    const paramsOff = r.u32(base + 8);
    if (paramsOff === 0) {
      protoParams[i] = [];
    } else {
      const size = r.u32(paramsOff);
      const params: string[] = [];
      for (let j = 0; j < size; j++) {
        params.push(types[r.u16(paramsOff + 4 + j * 2)]);
      }
      protoParams[i] = params;
    }
  }

  const methodRefs: DexMethodRef[] = new Array(methodIdsSize);
  for (let i = 0; i < methodIdsSize; i++) {
    const base = methodIdsOff + i * 8;
    const classIdx = r.u16(base);
    const protoIdx = r.u16(base + 2);
    const nameIdx = r.u32(base + 4);
    methodRefs[i] = {
      classDescriptor: types[classIdx],
      name: strings[nameIdx],
      protoShorty: protoShorty[protoIdx],
      paramDescriptors: protoParams[protoIdx],
      returnDescriptor: protoReturn[protoIdx],
    };
  }

  const definitions: DexMethodDef[] = [];
  for (let i = 0; i < classDefsSize; i++) {
    const classDataOff = r.u32(classDefsOff + i * 32 + 24);
    if (classDataOff === 0) {
      continue;
    }
    let pos = classDataOff;
    let staticFields: number, instanceFields: number, directMethods: number, virtualMethods: number;
    [staticFields, pos] = r.uleb128(pos);
    [instanceFields, pos] = r.uleb128(pos);
    [directMethods, pos] = r.uleb128(pos);
    [virtualMethods, pos] = r.uleb128(pos);
    for (let f = 0; f < staticFields + instanceFields; f++) {
      [, pos] = r.uleb128(pos); // field_idx_diff
      [, pos] = r.uleb128(pos); // access_flags
    }
    for (const count of [directMethods, virtualMethods]) {
      let methodIdx = 0;
      for (let m = 0; m < count; m++) {
        let diff: number, access: number, codeOff: number;
        [diff, pos] = r.uleb128(pos);
        [access, pos] = r.uleb128(pos);
        [codeOff, pos] = r.uleb128(pos);
        methodIdx = m === 0 ? diff : methodIdx + diff;
        const invokes =
          codeOff === 0 ? [] : scanInvokes(r, codeOff + 16, r.u32(codeOff + 12));
        definitions.push({ methodIdx, accessFlags: access, invokes });
      }
    }
  }

  return { methodRefs, definitions };
}

/** "Lcom/foo/Bar;" -> "com.foo.Bar"; primitives/arrays pass through. */
export function descriptorToDotted(descriptor: string): string {
  if (descriptor.startsWith("L") && descriptor.endsWith(";")) {
    return descriptor.slice(1, -1).replace(/\//g, ".");
  }
  return descriptor;
}

/** Dotted class.method form, the registry's signature convention. */
export function dottedSignature(ref: DexMethodRef): string {
  return `${descriptorToDotted(ref.classDescriptor)}.${ref.name}`;
}

/** Full signature with descriptors: unique per overload, used as node id. */
export function fullSignature(ref: DexMethodRef): string {
  return `${descriptorToDotted(ref.classDescriptor)}.${ref.name}` +
    `(${ref.paramDescriptors.join("")})${ref.returnDescriptor}`;
}
