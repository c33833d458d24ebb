export { parseDex, descriptorToDotted, dottedSignature, fullSignature, DexError } from "./dex.js";
export type { DexFile, DexMethodDef, DexMethodRef } from "./dex.js";
export { listEntries, readEntry, dexEntries, ZipError } from "./zip.js";
export type { ZipEntry } from "./zip.js";
export { parseRegistry, RegistryError } from "./registry.js";
export {
  extractCallGraph,
  renderDocument,
  buildRecord,
  ExtractError,
  TOOL_VERSION,
} from "./extract.js";
export type { GraphDocument, ExtractionRecord } from "./extract.js";
export { main } from "./cli.js";
