/**
 * Cosine sanity report over an exported embedding file: the full pairwise
 * matrix, plus intra- versus inter-group statistics when a groups file names
 * which strings belong together.
 */

import { readFileSync } from "node:fs";

import { cosine } from "./encoder.js";

export class SanityError extends Error {}

export interface EmbeddingFile {
  dim: number;
  normalized: boolean;
  provider: string;
  embeddings: Record<string, number[]>;
}

export interface GroupsFile {
  groups: { group_id: string; member_strings: string[] }[];
}

export interface SanityReport {
  strings: string[];
  matrix: number[][];
  intra: { mean: number; min: number; count: number } | null;
  inter: { mean: number; max: number; count: number } | null;
}

export function readEmbeddingFile(path: string): EmbeddingFile {
  let raw: unknown;
  try {
    raw = JSON.parse(readFileSync(path, "utf-8"));
  } catch (err) {
    throw new SanityError(`cannot parse embedding file ${path}: ${err}`);
  }
  const file = raw as EmbeddingFile;
  if (
    typeof file !== "object" ||
    file === null ||
    typeof file.dim !== "number" ||
    typeof file.embeddings !== "object"
  ) {
    throw new SanityError(`embedding file ${path} is missing required fields`);
  }
  for (const [key, vec] of Object.entries(file.embeddings)) {
    if (!Array.isArray(vec) || vec.length !== file.dim) {
      throw new SanityError(`embedding for ${JSON.stringify(key)} has the wrong dimension`);
    }
  }
  return file;
}

export function sanityReport(path: string, groupsPath?: string): SanityReport {
  const file = readEmbeddingFile(path);
  const strings = Object.keys(file.embeddings);
  const vectors = strings.map((s) => Float64Array.from(file.embeddings[s]));
  const matrix = vectors.map((a) => vectors.map((b) => cosine(a, b)));

  let intra: SanityReport["intra"] = null;
  let inter: SanityReport["inter"] = null;
  if (groupsPath) {
    const groups = (JSON.parse(readFileSync(groupsPath, "utf-8")) as GroupsFile).groups;
    const groupOf = new Map<string, string>();
    for (const g of groups) {
      for (const m of g.member_strings) groupOf.set(m, g.group_id);
    }
    const intraVals: number[] = [];
    const interVals: number[] = [];
    for (let i = 0; i < strings.length; i++) {
      for (let j = i + 1; j < strings.length; j++) {
        const gi = groupOf.get(strings[i]);
        const gj = groupOf.get(strings[j]);
        if (gi === undefined || gj === undefined) continue;
        (gi === gj ? intraVals : interVals).push(matrix[i][j]);
      }
    }
    if (intraVals.length) {
      intra = {
        mean: intraVals.reduce((a, b) => a + b, 0) / intraVals.length,
        min: Math.min(...intraVals),
        count: intraVals.length,
      };
    }
    if (interVals.length) {
      inter = {
        mean: interVals.reduce((a, b) => a + b, 0) / interVals.length,
        max: Math.max(...interVals),
        count: interVals.length,
      };
    }
  }
  return { strings, matrix, intra, inter };
}

export function formatReport(report: SanityReport): string {
  const lines: string[] = [];
  lines.push(`${report.strings.length} strings`);
  for (let i = 0; i < report.strings.length; i++) {
    const row = report.matrix[i].map((c) => c.toFixed(3)).join(" ");
    lines.push(`${report.strings[i].slice(0, 32).padEnd(34)} ${row}`);
  }
  if (report.intra) {
    lines.push(
      `intra-group cosine: mean ${report.intra.mean.toFixed(3)} min ${report.intra.min.toFixed(3)} (n=${report.intra.count})`
    );
  }
  if (report.inter) {
    lines.push(
      `inter-group cosine: mean ${report.inter.mean.toFixed(3)} max ${report.inter.max.toFixed(3)} (n=${report.inter.count})`
    );
  }
  return lines.join("\n");
}
