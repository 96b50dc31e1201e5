#!/usr/bin/env node
/**
 * embed-export CLI.
 *
 *   embed-export export --strings FILE --model ID [--pooling mean|first-token]
 *                       [--no-normalize] --out FILE
 *   embed-export sanity --file FILE [--groups FILE]
 *
 * The strings file holds one sentence per line; blank lines are skipped.
 */

import { readFileSync } from "node:fs";
import process from "node:process";

import { Pooling } from "./encoder.js";
import { runExport } from "./exporter.js";
import { formatReport, sanityReport } from "./sanity.js";

function parseFlags(argv: string[]): Map<string, string | boolean> {
  const flags = new Map<string, string | boolean>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith("--")) {
      throw new Error(`unexpected argument ${arg}`);
    }
    const name = arg.slice(2);
    if (i + 1 < argv.length && !argv[i + 1].startsWith("--")) {
      flags.set(name, argv[++i]);
    } else {
      flags.set(name, true);
    }
  }
  return flags;
}

function requireString(flags: Map<string, string | boolean>, name: string): string {
  const value = flags.get(name);
  if (typeof value !== "string") {
    throw new Error(`missing required flag --${name}`);
  }
  return value;
}

function cmdExport(argv: string[]): number {
  const flags = parseFlags(argv);
  const stringsPath = requireString(flags, "strings");
  const modelId = requireString(flags, "model");
  const out = requireString(flags, "out");
  const pooling = (flags.get("pooling") ?? "mean") as Pooling;
  if (pooling !== "mean" && pooling !== "first-token") {
    throw new Error(`pooling must be "mean" or "first-token", got ${pooling}`);
  }
  const normalize = !flags.has("no-normalize");
  const strings = readFileSync(stringsPath, "utf-8")
    .split("\n")
    .map((line) => line.trimEnd())
    .filter((line) => line.length > 0);
  const result = runExport({ strings, modelId, pooling, normalize, outputPath: out });
  console.log(`wrote ${result.count} embeddings (dim ${result.dim}, ${result.provider}) to ${out}`);
  return 0;
}

function cmdSanity(argv: string[]): number {
  const flags = parseFlags(argv);
  const file = requireString(flags, "file");
  const groups = flags.get("groups");
  const report = sanityReport(file, typeof groups === "string" ? groups : undefined);
  console.log(formatReport(report));
  return 0;
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    if (command === "export") return cmdExport(rest);
    if (command === "sanity") return cmdSanity(rest);
    console.error("usage: embed-export <export|sanity> [flags]");
    return 2;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 2;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
