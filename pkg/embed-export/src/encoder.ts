/**
 * Frozen lexical sentence encoders.
 *
 * The model family "lexical-ngram-<dim>" maps each token to a fixed vector
 * built from its whole-word hash plus fastText-style character n-grams, then
 * pools token vectors into a sentence embedding. The weights are implicit in
 * the hash construction: nothing is downloaded, nothing is trained, and the
 * same sentence always embeds identically, which is what "frozen" requires.
 * Sentences sharing words or subwords land measurably closer than unrelated
 * ones, giving real semantic-neighborhood structure at the lexical level.
 */

import { keyedUnitVector } from "./hashing.js";

export type Pooling = "mean" | "first-token";

export class ModelLoadError extends Error {}
export class EncodingError extends Error {}

const NGRAM_MIN = 3;
const NGRAM_MAX = 5;
const WORD_WEIGHT = 1.0;
const NGRAM_WEIGHT = 0.8;
// Function words contribute little to sentence meaning; down-weighting them
// in the pooled average is the usual fix for bag-of-words encoders.
const STOPWORD_WEIGHT = 0.2;
const STOPWORDS = new Set([
  "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "in",
  "is", "it", "its", "of", "on", "or", "that", "the", "to", "with",
]);

export interface SentenceEncoder {
  readonly id: string;
  readonly dim: number;
  embed(sentence: string, pooling: Pooling, normalize: boolean): Float64Array;
}

function tokenize(sentence: string): string[] {
  return sentence
    .toLowerCase()
    .split(/[^a-z0-9]+/u)
    .filter((t) => t.length > 0);
}

function charNgrams(token: string): string[] {
  const padded = `<${token}>`;
  const grams: string[] = [];
  for (let n = NGRAM_MIN; n <= NGRAM_MAX; n++) {
    for (let i = 0; i + n <= padded.length; i++) {
      grams.push(padded.slice(i, i + n));
    }
  }
  return grams;
}

class LexicalNgramEncoder implements SentenceEncoder {
  readonly id: string;
  readonly dim: number;
  private cache = new Map<string, Float64Array>();

  constructor(dim: number) {
    this.id = `lexical-ngram-${dim}`;
    this.dim = dim;
  }

  private tokenVector(token: string): Float64Array {
    const cached = this.cache.get(token);
    if (cached) return cached;
    const acc = new Float64Array(this.dim);
    const word = keyedUnitVector(`word:${token}`, this.dim);
    for (let i = 0; i < this.dim; i++) acc[i] += WORD_WEIGHT * word[i];
    const grams = charNgrams(token);
    for (const g of grams) {
      const gv = keyedUnitVector(`ngram:${g}`, this.dim);
      for (let i = 0; i < this.dim; i++) acc[i] += (NGRAM_WEIGHT / grams.length) * gv[i];
    }
    let norm = 0;
    for (let i = 0; i < this.dim; i++) norm += acc[i] * acc[i];
    norm = Math.sqrt(norm);
    for (let i = 0; i < this.dim; i++) acc[i] /= norm;
    this.cache.set(token, acc);
    return acc;
  }

  embed(sentence: string, pooling: Pooling, normalize: boolean): Float64Array {
    if (sentence.length === 0) {
      throw new EncodingError("cannot embed an empty string");
    }
    const tokens = tokenize(sentence);
    if (tokens.length === 0) {
      throw new EncodingError(`no tokens in ${JSON.stringify(sentence)}`);
    }
    const out = new Float64Array(this.dim);
    if (pooling === "first-token") {
      out.set(this.tokenVector(tokens[0]));
    } else {
      let total = 0;
      for (const tok of tokens) total += STOPWORDS.has(tok) ? STOPWORD_WEIGHT : 1.0;
      for (const tok of tokens) {
        const v = this.tokenVector(tok);
        const w = (STOPWORDS.has(tok) ? STOPWORD_WEIGHT : 1.0) / total;
        for (let i = 0; i < this.dim; i++) out[i] += w * v[i];
      }
    }
    if (normalize) {
      let norm = 0;
      for (let i = 0; i < this.dim; i++) norm += out[i] * out[i];
      norm = Math.sqrt(norm);
      if (norm === 0) throw new EncodingError("embedding collapsed to zero");
      for (let i = 0; i < this.dim; i++) out[i] /= norm;
    }
    return out;
  }
}

const MODEL_PATTERN = /^lexical-ngram-(\d+)$/;

/** Resolve a model identifier; unknown identifiers fail like a missing checkpoint. */
export function loadModel(modelId: string): SentenceEncoder {
  const match = MODEL_PATTERN.exec(modelId);
  if (!match) {
    throw new ModelLoadError(
      `cannot load model ${JSON.stringify(modelId)}; available family: lexical-ngram-<dim>`
    );
  }
  const dim = Number(match[1]);
  if (!Number.isInteger(dim) || dim < 8 || dim > 4096) {
    throw new ModelLoadError(`model dim out of range in ${JSON.stringify(modelId)}`);
  }
  return new LexicalNgramEncoder(dim);
}

export function cosine(a: Float64Array, b: Float64Array): number {
  let dot = 0;
  let na = 0;
  let nb = 0;
  for (let i = 0; i < a.length; i++) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / Math.sqrt(na * nb);
}
