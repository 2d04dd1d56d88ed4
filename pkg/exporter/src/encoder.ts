/**
 * A tiny self-contained sentence encoder.
 *
 * No downloaded weights: token vectors come from a hash of the token
 * string and the mixing layers from a seed derived from the model name,
 * so the same model name and text always produce the same vector. Each
 * layer transforms every position and blends in the sequence mean, so the
 * leading pseudo-token sees the whole text; its final state is the
 * sentence embedding (first-token pooling).
 */

export interface ModelSpec {
  name: string;
  dim: number;
  maxTokens: number; // including the leading pseudo-token
  layers: number;
}

const MODELS: Record<string, Omit<ModelSpec, "name">> = {
  "tiny-16": { dim: 16, maxTokens: 64, layers: 2 },
  "tiny-32": { dim: 32, maxTokens: 128, layers: 2 },
};

export function loadModel(name: string): Encoder {
  const spec = MODELS[name];
  if (!spec) {
    const known = Object.keys(MODELS).sort().join(", ");
    throw new Error(`unknown model '${name}' (available: ${known})`);
  }
  return new Encoder({ name, ...spec });
}

export function modelNames(): string[] {
  return Object.keys(MODELS).sort();
}

/** FNV-1a 32-bit hash of a string. */
export function fnv1a(text: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return h >>> 0;
}

/** Deterministic PRNG (mulberry32) returning floats in [0, 1). */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Lowercased alphanumeric runs; everything else separates tokens. */
export function tokenize(text: string): string[] {
  const tokens = text.toLowerCase().match(/[a-z0-9]+/g);
  return tokens ? tokens : [];
}

function randomVector(rand: () => number, n: number, scale: number): Float64Array {
  const v = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    v[i] = (rand() * 2 - 1) * scale;
  }
  return v;
}

export class Encoder {
  readonly spec: ModelSpec;
  private readonly mixSelf: Float64Array[]; // per layer, dim x dim
  private readonly mixMean: Float64Array[]; // per layer, dim x dim

  constructor(spec: ModelSpec) {
    this.spec = spec;
    const rand = mulberry32(fnv1a(`weights:${spec.name}`));
    const scale = 1.0 / Math.sqrt(spec.dim);
    this.mixSelf = [];
    this.mixMean = [];
    for (let l = 0; l < spec.layers; l++) {
      this.mixSelf.push(randomVector(rand, spec.dim * spec.dim, scale));
      this.mixMean.push(randomVector(rand, spec.dim * spec.dim, scale));
    }
  }

  private tokenVector(token: string): Float64Array {
    const rand = mulberry32(fnv1a(`token:${token}`));
    return randomVector(rand, this.spec.dim, 1.0);
  }

  /** First-token pooled embedding of the text. */
  encode(text: string): Float64Array {
    const words = tokenize(text);
    if (words.length === 0) {
      throw new Error("cannot encode a text with no tokens");
    }
    const { dim, maxTokens, layers } = this.spec;
    const tokens = ["<s>", ...words].slice(0, maxTokens);
    let states = tokens.map((t) => this.tokenVector(t));
    for (let l = 0; l < layers; l++) {
      const mean = new Float64Array(dim);
      for (const s of states) {
        for (let i = 0; i < dim; i++) {
          mean[i] += s[i];
        }
      }
      for (let i = 0; i < dim; i++) {
        mean[i] /= states.length;
      }
      const wSelf = this.mixSelf[l];
      const wMean = this.mixMean[l];
      states = states.map((s) => {
        const next = new Float64Array(dim);
        for (let i = 0; i < dim; i++) {
          let acc = 0;
          for (let j = 0; j < dim; j++) {
            acc += wSelf[i * dim + j] * s[j] + wMean[i * dim + j] * mean[j];
          }
          next[i] = Math.tanh(acc);
        }
        return next;
      });
    }
    return states[0];
  }
}
