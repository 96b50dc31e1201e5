import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { ExportError, runExport } from "../src/exporter.js";

function tmpPath(name: string): string {
  return join(mkdtempSync(join(tmpdir(), "embx-")), name);
}

const REQ = {
  strings: ["cube is larger", "cube is bigger", "finishes at goal spot"],
  modelId: "lexical-ngram-64",
  pooling: "mean" as const,
  normalize: true,
};

describe("runExport", () => {
  it("writes the interchange format", () => {
    const out = tmpPath("emb.json");
    const result = runExport({ ...REQ, outputPath: out });
    expect(result.count).toBe(3);
    const payload = JSON.parse(readFileSync(out, "utf-8"));
    expect(payload.dim).toBe(64);
    expect(payload.normalized).toBe(true);
    expect(payload.provider).toBe("lexical-ngram-64[pooling=mean]");
    expect(Object.keys(payload.embeddings)).toEqual(REQ.strings);
    for (const vec of Object.values(payload.embeddings)) {
      expect((vec as number[]).length).toBe(64);
    }
  });

  it("is byte-identical across runs", () => {
    const a = tmpPath("a.json");
    const b = tmpPath("b.json");
    runExport({ ...REQ, outputPath: a });
    runExport({ ...REQ, outputPath: b });
    expect(readFileSync(a, "utf-8")).toBe(readFileSync(b, "utf-8"));
  });

  it("records pooling in the provider tag", () => {
    const out = tmpPath("ft.json");
    const result = runExport({ ...REQ, pooling: "first-token", outputPath: out });
    expect(result.provider).toBe("lexical-ngram-64[pooling=first-token]");
  });

  it("rejects duplicate strings", () => {
    expect(() =>
      runExport({ ...REQ, strings: ["a b", "a b"], outputPath: tmpPath("x.json") })
    ).toThrow(ExportError);
  });

  it("rejects empty strings and empty lists", () => {
    expect(() => runExport({ ...REQ, strings: [""], outputPath: tmpPath("x.json") })).toThrow(
      ExportError
    );
    expect(() => runExport({ ...REQ, strings: [], outputPath: tmpPath("x.json") })).toThrow(
      ExportError
    );
  });

  it("fails on unobtainable models", () => {
    expect(() =>
      runExport({ ...REQ, modelId: "no-such-model", outputPath: tmpPath("x.json") })
    ).toThrow(/cannot load model/);
  });
});
