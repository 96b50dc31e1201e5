import { describe, expect, it } from "vitest";

import { EncodingError, ModelLoadError, cosine, loadModel } from "../src/encoder.js";

const model = loadModel("lexical-ngram-64");

describe("loadModel", () => {
  it("resolves the lexical family by dim", () => {
    expect(loadModel("lexical-ngram-128").dim).toBe(128);
    expect(loadModel("lexical-ngram-64").id).toBe("lexical-ngram-64");
  });

  it("rejects unknown model identifiers", () => {
    expect(() => loadModel("t5-base")).toThrow(ModelLoadError);
    expect(() => loadModel("lexical-ngram-2")).toThrow(ModelLoadError);
  });
});

describe("embed", () => {
  it("is deterministic", () => {
    const a = model.embed("push the cube to the goal", "mean", true);
    const b = model.embed("push the cube to the goal", "mean", true);
    expect(Array.from(a)).toEqual(Array.from(b));
  });

  it("normalizes to unit length", () => {
    const v = model.embed("maintains firm grip on puck", "mean", true);
    let norm = 0;
    for (const x of v) norm += x * x;
    expect(Math.abs(Math.sqrt(norm) - 1)).toBeLessThan(1e-12);
  });

  it("places paraphrases closer than unrelated sentences", () => {
    const a = model.embed("cube is larger", "mean", true);
    const b = model.embed("cube is bigger", "mean", true);
    const c = model.embed("finishes at goal spot", "mean", true);
    expect(cosine(a, b)).toBeGreaterThan(cosine(a, c));
    expect(cosine(a, b)).toBeGreaterThan(cosine(b, c));
  });

  it("sees shared subwords across word forms", () => {
    const a = model.embed("picked", "mean", true);
    const b = model.embed("picking", "mean", true);
    const c = model.embed("zyxwv", "mean", true);
    expect(cosine(a, b)).toBeGreaterThan(cosine(a, c));
  });

  it("pools differently under first-token", () => {
    const mean = model.embed("lifts puck cleanly", "mean", true);
    const first = model.embed("lifts puck cleanly", "first-token", true);
    const only = model.embed("lifts", "mean", true);
    expect(cosine(first, only)).toBeCloseTo(1.0, 10);
    expect(cosine(mean, first)).toBeLessThan(0.999);
  });

  it("rejects empty and token-free strings", () => {
    expect(() => model.embed("", "mean", true)).toThrow(EncodingError);
    expect(() => model.embed("!!! ???", "mean", true)).toThrow(EncodingError);
  });
});
