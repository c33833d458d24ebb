#!/usr/bin/env node
/**
 * apk-extract <apk> --registry <file> --out <file> [--record <file>]
 *
 * Exit codes mirror the primary CLI: 1 usage, 2 input format.
 */

import { readFileSync, writeFileSync } from "node:fs";
import process from "node:process";

import { ExtractError, buildRecord, extractCallGraph, renderDocument } from "./extract.js";
import { RegistryError, parseRegistry } from "./registry.js";

function usage(message: string): number {
  process.stderr.write(`${message}\n`);
  process.stderr.write(
    "usage: apk-extract <apk> --registry <file> --out <file> [--record <file>]\n",
  );
  return 1;
}

export function main(argv: string[]): number {
  let apkPath: string | undefined;
  let registryPath: string | undefined;
  let outPath: string | undefined;
  let recordPath: string | undefined;
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "--registry") {
      registryPath = argv[++i];
    } else if (arg === "--out") {
      outPath = argv[++i];
    } else if (arg === "--record") {
      recordPath = argv[++i];
    } else if (arg.startsWith("-")) {
      return usage(`unknown option ${arg}`);
    } else if (apkPath === undefined) {
      apkPath = arg;
    } else {
      return usage(`unexpected argument ${arg}`);
    }
  }
  if (!apkPath || !registryPath || !outPath) {
    return usage("missing required argument");
  }

  let apk: Buffer;
  let registry: string[];
  try {
    apk = readFileSync(apkPath);
  } catch (err) {
    process.stderr.write(`cannot read APK ${apkPath}: ${String(err)}\n`);
    return 2;
  }
  try {
    registry = parseRegistry(readFileSync(registryPath, "utf8"));
  } catch (err) {
    if (err instanceof RegistryError) {
      process.stderr.write(`bad registry ${registryPath}: ${err.message}\n`);
      return 2;
    }
    process.stderr.write(`cannot read registry ${registryPath}: ${String(err)}\n`);
    return 2;
  }

  try {
    const { document, dexCount, sensitiveMatches } = extractCallGraph(apk, registry);
    writeFileSync(outPath, renderDocument(document), "utf8");
    const record = buildRecord(apk, document, dexCount, sensitiveMatches, outPath);
    if (recordPath) {
      writeFileSync(recordPath, JSON.stringify(record, null, 1) + "\n", "utf8");
    }
    process.stderr.write(
      `extracted ${record.node_count} nodes, ${record.edge_count} edges ` +
        `(${record.sensitive_matches} sensitive) from ${dexCount} dex file(s)\n`,
    );
    return 0;
  } catch (err) {
    if (err instanceof ExtractError) {
      process.stderr.write(`extraction failed: ${err.message}\n`);
      return 2;
    }
    throw err;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
