/**
 * Export sentence embeddings in the reward learner's interchange format:
 *   {"dim": int, "normalized": bool, "provider": string,
 *    "embeddings": {string: [float, ...]}}
 *
 * JSON.stringify emits shortest round-trip float literals, so the file is
 * bit-exact across the language boundary.
 */

import { mkdirSync, renameSync, writeFileSync } from "node:fs";
import { dirname, resolve } from "node:path";

import { Pooling, SentenceEncoder, loadModel } from "./encoder.js";

export class ExportError extends Error {}

export interface ExportRequest {
  strings: string[];
  modelId: string;
  pooling: Pooling;
  normalize: boolean;
  outputPath: string;
}

export interface ExportResult {
  dim: number;
  count: number;
  provider: string;
}

export function validateStrings(strings: string[]): void {
  if (strings.length === 0) {
    throw new ExportError("no strings to export");
  }
  const seen = new Set<string>();
  for (const s of strings) {
    if (s.length === 0) {
      throw new ExportError("cannot export an empty string");
    }
    if (seen.has(s)) {
      throw new ExportError(`duplicate string ${JSON.stringify(s)}`);
    }
    seen.add(s);
  }
}

export function buildPayload(req: ExportRequest, encoder: SentenceEncoder) {
  const embeddings: Record<string, number[]> = {};
  for (const s of req.strings) {
    embeddings[s] = Array.from(encoder.embed(s, req.pooling, req.normalize));
  }
  return {
    dim: encoder.dim,
    normalized: req.normalize,
    provider: `${encoder.id}[pooling=${req.pooling}]`,
    embeddings,
  };
}

/** Run one export request; the file appears atomically at the output path. */
export function runExport(req: ExportRequest): ExportResult {
  validateStrings(req.strings);
  const encoder = loadModel(req.modelId);
  const payload = buildPayload(req, encoder);
  const out = resolve(req.outputPath);
  mkdirSync(dirname(out), { recursive: true });
  const tmp = `${out}.tmp`;
  writeFileSync(tmp, JSON.stringify(payload), "utf-8");
  renameSync(tmp, out);
  return { dim: encoder.dim, count: req.strings.length, provider: payload.provider };
}
