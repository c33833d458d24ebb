/**
 * Builders for structurally valid DEX and APK (ZIP) fixtures.
 *
 * The DEX builder lays out real string/type/proto/method tables, class
 * data, code items (including a packed-switch payload to exercise the
 * instruction walker) and a map list, then fills in the adler32 checksum
 * and sha1 signature the format requires.
 */

import { createHash } from "node:crypto";
import { deflateRawSync } from "node:zlib";

export interface InvokeSpec {
  classDesc: string;
  name: string;
  params: string[];
  ret: string;
  /** use the /range encoding instead of the 35c encoding */
  range?: boolean;
}

export interface MethodSpec {
  name: string;
  params: string[];
  ret: string;
  invokes: InvokeSpec[];
  /** prepend a packed-switch + payload to the code (walker stress) */
  withSwitchPayload?: boolean;
}

export interface ClassSpec {
  descriptor: string;
  methods: MethodSpec[];
}

function shortyOf(ret: string, params: string[]): string {
  const ch = (d: string) => (d.startsWith("L") || d.startsWith("[") ? "L" : d);
  return ch(ret) + params.map(ch).join("");
}

class Cursor {
  chunks: Buffer[] = [];
  length = 0;

  u8(v: number) {
    const b = Buffer.alloc(1);
    b.writeUInt8(v);
    this.push(b);
  }

  u16(v: number) {
    const b = Buffer.alloc(2);
    b.writeUInt16LE(v);
    this.push(b);
  }

  u32(v: number) {
    const b = Buffer.alloc(4);
    b.writeUInt32LE(v >>> 0);
    this.push(b);
  }

  uleb(v: number) {
    do {
      let byte = v & 0x7f;
      v >>>= 7;
      if (v !== 0) {
        byte |= 0x80;
      }
      this.u8(byte);
    } while (v !== 0);
  }

  bytes(b: Buffer) {
    this.push(b);
  }

  align(n: number) {
    while (this.length % n !== 0) {
      this.u8(0);
    }
  }

  private push(b: Buffer) {
    this.chunks.push(b);
    this.length += b.length;
  }

  build(): Buffer {
    return Buffer.concat(this.chunks);
  }
}

function adler32(buf: Buffer): number {
  let a = 1;
  let b = 0;
  for (const byte of buf) {
    a = (a + byte) % 65521;
    b = (b + a) % 65521;
  }
  return ((b << 16) | a) >>> 0;
}

export function buildDex(classes: ClassSpec[]): Buffer {
  // ---- intern pools -------------------------------------------------
  const stringSet = new Set<string>();
  const typeSet = new Set<string>();
  const protoKeys = new Map<string, { shorty: string; ret: string; params: string[] }>();
  const methodKeys = new Map<string, { cls: string; name: string; protoKey: string }>();

  const protoKeyOf = (ret: string, params: string[]) => `${ret}|${params.join(",")}`;
  const methodKeyOf = (cls: string, name: string, protoKey: string) =>
    `${cls}|${name}|${protoKey}`;

  const addMethod = (cls: string, name: string, params: string[], ret: string) => {
    stringSet.add(name);
    typeSet.add(cls);
    typeSet.add(ret);
    params.forEach((p) => typeSet.add(p));
    const shorty = shortyOf(ret, params);
    stringSet.add(shorty);
    const pk = protoKeyOf(ret, params);
    protoKeys.set(pk, { shorty, ret, params });
    methodKeys.set(methodKeyOf(cls, name, pk), { cls, name, protoKey: pk });
  };

  for (const cls of classes) {
    typeSet.add(cls.descriptor);
    for (const m of cls.methods) {
      addMethod(cls.descriptor, m.name, m.params, m.ret);
      for (const inv of m.invokes) {
        addMethod(inv.classDesc, inv.name, inv.params, inv.ret);
      }
    }
  }
  typeSet.forEach((t) => stringSet.add(t));

  const strings = [...stringSet].sort();
  const stringIdx = new Map(strings.map((s, i) => [s, i]));
  const types = [...typeSet].sort((a, b) => stringIdx.get(a)! - stringIdx.get(b)!);
  const typeIdx = new Map(types.map((t, i) => [t, i]));
  const protos = [...protoKeys.entries()].sort(([, a], [, b]) => {
    const ra = typeIdx.get(a.ret)! - typeIdx.get(b.ret)!;
    if (ra !== 0) return ra;
    return a.params.join() < b.params.join() ? -1 : a.params.join() > b.params.join() ? 1 : 0;
  });
  const protoIdx = new Map(protos.map(([key], i) => [key, i]));
  const methods = [...methodKeys.entries()].sort(([, a], [, b]) => {
    const c = typeIdx.get(a.cls)! - typeIdx.get(b.cls)!;
    if (c !== 0) return c;
    const n = stringIdx.get(a.name)! - stringIdx.get(b.name)!;
    if (n !== 0) return n;
    return protoIdx.get(a.protoKey)! - protoIdx.get(b.protoKey)!;
  });
  const methodIdx = new Map(methods.map(([key], i) => [key, i]));
  const midOf = (cls: string, name: string, params: string[], ret: string) =>
    methodIdx.get(methodKeyOf(cls, name, protoKeyOf(ret, params)))!;

  // ---- section offsets ----------------------------------------------
  const HEADER = 0x70;
  const stringIdsOff = HEADER;
  const typeIdsOff = stringIdsOff + 4 * strings.length;
  const protoIdsOff = typeIdsOff + 4 * types.length;
  const methodIdsOff = protoIdsOff + 12 * protos.length;
  const classDefsOff = methodIdsOff + 8 * methods.length;
  const dataOff = classDefsOff + 32 * classes.length;

  const data = new Cursor();
  const at = () => dataOff + data.length;

  // type lists for non-empty parameter lists
  const typeListOff = new Map<string, number>();
  for (const [key, proto] of protos) {
    if (proto.params.length === 0) {
      typeListOff.set(key, 0);
      continue;
    }
    data.align(4);
    typeListOff.set(key, at());
    data.u32(proto.params.length);
    proto.params.forEach((p) => data.u16(typeIdx.get(p)!));
  }

  // code items
  const codeOff = new Map<string, number>();
  for (const cls of classes) {
    for (const m of cls.methods) {
      data.align(4);
      const key = `${cls.descriptor}|${m.name}`;
      codeOff.set(key, at());
      const insns: number[] = [];
      if (m.withSwitchPayload) {
        // packed-switch v0, +4 ; return-void ; payload(1 target)
        insns.push(0x002b, 0x0004, 0x0000); // 0x2b with 32-bit offset 4
        insns.push(0x000e);
        insns.push(0x0100, 0x0001, 0x0000, 0x0000, 0x0002, 0x0000); // payload
      }
      for (const inv of m.invokes) {
        const target = midOf(inv.classDesc, inv.name, inv.params, inv.ret);
        if (inv.range) {
          insns.push(0x0074, target, 0x0000); // invoke-virtual/range, AA=0
        } else {
          insns.push(0x0071, target, 0x0000); // invoke-static, A=0
        }
      }
      if (!m.withSwitchPayload) {
        insns.push(0x000e); // return-void
      }
      data.u16(2); // registers_size
      data.u16(0); // ins_size
      data.u16(1); // outs_size
      data.u16(0); // tries_size
      data.u32(0); // debug_info_off
      data.u32(insns.length);
      insns.forEach((u) => data.u16(u));
    }
  }

  // class data
  const classDataOff = new Map<string, number>();
  for (const cls of classes) {
    classDataOff.set(cls.descriptor, at());
    data.uleb(0); // static fields
    data.uleb(0); // instance fields
    data.uleb(cls.methods.length); // direct methods
    data.uleb(0); // virtual methods
    const ordered = [...cls.methods].sort(
      (a, b) =>
        midOf(cls.descriptor, a.name, a.params, a.ret) -
        midOf(cls.descriptor, b.name, b.params, b.ret),
    );
    let prev = 0;
    ordered.forEach((m, i) => {
      const mid = midOf(cls.descriptor, m.name, m.params, m.ret);
      data.uleb(i === 0 ? mid : mid - prev);
      prev = mid;
      data.uleb(0x0008 | 0x0001); // ACC_PUBLIC | ACC_STATIC
      data.uleb(codeOff.get(`${cls.descriptor}|${m.name}`)!);
    });
  }

  // string data
  const stringDataOff = new Map<string, number>();
  for (const s of strings) {
    stringDataOff.set(s, at());
    data.uleb(s.length);
    data.bytes(Buffer.from(s, "utf8")); // fixture strings are ASCII
    data.u8(0);
  }

  // map list
  data.align(4);
  const mapOff = at();
  const mapEntries: Array<[number, number, number]> = [
    [0x0000, 1, 0],
    [0x0001, strings.length, stringIdsOff],
    [0x0002, types.length, typeIdsOff],
    [0x0003, protos.length, protoIdsOff],
    [0x0005, methods.length, methodIdsOff],
    [0x0006, classes.length, classDefsOff],
    [0x1000, 1, mapOff],
  ];
  data.u32(mapEntries.length);
  for (const [kind, size, off] of mapEntries) {
    data.u16(kind);
    data.u16(0);
    data.u32(size);
    data.u32(off);
  }

  const dataBuf = data.build();
  const fileSize = dataOff + dataBuf.length;

  // ---- fixed tables ---------------------------------------------------
  const tables = new Cursor();
  strings.forEach((s) => tables.u32(stringDataOff.get(s)!));
  types.forEach((t) => tables.u32(stringIdx.get(t)!));
  for (const [key, proto] of protos) {
    tables.u32(stringIdx.get(proto.shorty)!);
    tables.u32(typeIdx.get(proto.ret)!);
    tables.u32(typeListOff.get(key)!);
  }
  for (const [, m] of methods) {
    tables.u16(typeIdx.get(m.cls)!);
    tables.u16(protoIdx.get(m.protoKey)!);
    tables.u32(stringIdx.get(m.name)!);
  }
  for (const cls of classes) {
    tables.u32(typeIdx.get(cls.descriptor)!);
    tables.u32(0x0001); // access: public
    tables.u32(0xffffffff); // superclass: NO_INDEX
    tables.u32(0); // interfaces_off
    tables.u32(0xffffffff); // source_file: NO_INDEX
    tables.u32(0); // annotations_off
    tables.u32(classDataOff.get(cls.descriptor)!);
    tables.u32(0); // static_values_off
  }

  // ---- header ---------------------------------------------------------
  const header = Buffer.alloc(HEADER);
  Buffer.from("dex\n035\0", "latin1").copy(header, 0);
  header.writeUInt32LE(fileSize, 32);
  header.writeUInt32LE(HEADER, 36);
  header.writeUInt32LE(0x12345678, 40);
  header.writeUInt32LE(0, 44); // link_size
  header.writeUInt32LE(0, 48); // link_off
  header.writeUInt32LE(mapOff, 52);
  header.writeUInt32LE(strings.length, 56);
  header.writeUInt32LE(stringIdsOff, 60);
  header.writeUInt32LE(types.length, 64);
  header.writeUInt32LE(typeIdsOff, 68);
  header.writeUInt32LE(protos.length, 72);
  header.writeUInt32LE(protoIdsOff, 76);
  header.writeUInt32LE(0, 80); // field_ids_size
  header.writeUInt32LE(0, 84); // field_ids_off
  header.writeUInt32LE(methods.length, 88);
  header.writeUInt32LE(methodIdsOff, 92);
  header.writeUInt32LE(classes.length, 96);
  header.writeUInt32LE(classDefsOff, 100);
  header.writeUInt32LE(dataBuf.length, 104);
  header.writeUInt32LE(dataOff, 108);

  const file = Buffer.concat([header, tables.build(), dataBuf]);
  if (file.length !== fileSize) {
    throw new Error(`dex layout bug: ${file.length} != ${fileSize}`);
  }
  const sha1 = createHash("sha1").update(file.subarray(32)).digest();
  sha1.copy(file, 12);
  file.writeUInt32LE(adler32(file.subarray(12)), 8);
  return file;
}

// ---- zip ----------------------------------------------------------------

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(buf: Buffer): number {
  let c = 0xffffffff;
  for (const byte of buf) {
    c = CRC_TABLE[(c ^ byte) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

export function buildZip(files: Array<{ name: string; data: Buffer; deflate?: boolean }>): Buffer {
  const locals: Buffer[] = [];
  const centrals: Buffer[] = [];
  let offset = 0;
  for (const file of files) {
    const nameBuf = Buffer.from(file.name, "utf8");
    const method = file.deflate ? 8 : 0;
    const payload = file.deflate ? deflateRawSync(file.data) : file.data;
    const crc = crc32(file.data);

    const local = Buffer.alloc(30);
    local.writeUInt32LE(0x04034b50, 0);
    local.writeUInt16LE(20, 4);
    local.writeUInt16LE(0, 6);
    local.writeUInt16LE(method, 8);
    local.writeUInt32LE(crc, 14);
    local.writeUInt32LE(payload.length, 18);
    local.writeUInt32LE(file.data.length, 22);
    local.writeUInt16LE(nameBuf.length, 26);
    locals.push(Buffer.concat([local, nameBuf, payload]));

    const central = Buffer.alloc(46);
    central.writeUInt32LE(0x02014b50, 0);
    central.writeUInt16LE(20, 4);
    central.writeUInt16LE(20, 6);
    central.writeUInt16LE(method, 10);
    central.writeUInt32LE(crc, 16);
    central.writeUInt32LE(payload.length, 20);
    central.writeUInt32LE(file.data.length, 24);
    central.writeUInt16LE(nameBuf.length, 28);
    central.writeUInt32LE(offset, 42);
    centrals.push(Buffer.concat([central, nameBuf]));
    offset += 30 + nameBuf.length + payload.length;
  }
  const centralStart = offset;
  const centralBuf = Buffer.concat(centrals);
  const eocd = Buffer.alloc(22);
  eocd.writeUInt32LE(0x06054b50, 0);
  eocd.writeUInt16LE(files.length, 8);
  eocd.writeUInt16LE(files.length, 10);
  eocd.writeUInt32LE(centralBuf.length, 12);
  eocd.writeUInt32LE(centralStart, 16);
  return Buffer.concat([...locals, centralBuf, eocd]);
}

/** A small app: Main.main calls Util.helper and two sensitive APIs;
 * Util.helper calls one more API. */
export function sampleClasses(): ClassSpec[] {
  return [
    {
      descriptor: "Lcom/example/app/Main;",
      methods: [
        {
          name: "main",
          params: ["[Ljava/lang/String;"],
          ret: "V",
          withSwitchPayload: true,
          invokes: [
            { classDesc: "Lcom/example/app/Util;", name: "helper", params: [], ret: "V" },
            {
              classDesc: "Landroid/telephony/SmsManager;",
              name: "sendTextMessage",
              params: [
                "Ljava/lang/String;",
                "Ljava/lang/String;",
                "Ljava/lang/String;",
                "Landroid/app/PendingIntent;",
                "Landroid/app/PendingIntent;",
              ],
              ret: "V",
              range: true,
            },
          ],
        },
      ],
    },
    {
      descriptor: "Lcom/example/app/Util;",
      methods: [
        {
          name: "helper",
          params: [],
          ret: "V",
          invokes: [
            {
              classDesc: "Landroid/telephony/SmsManager;",
              name: "getDefault",
              params: [],
              ret: "Landroid/telephony/SmsManager;",
            },
            {
              classDesc: "Ljava/io/File;",
              name: "createNewFile",
              params: [],
              ret: "Z",
            },
          ],
        },
      ],
    },
  ];
}

export function sampleApk(options: { deflate?: boolean } = {}): Buffer {
  const dex = buildDex(sampleClasses());
  return buildZip([
    { name: "AndroidManifest.xml", data: Buffer.from("<manifest/>") },
    { name: "classes.dex", data: dex, deflate: options.deflate },
  ]);
}
