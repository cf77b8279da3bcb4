/**
 * Frozen deterministic contextual encoder.
 *
 * `local-bigru-v1` maps token ids to hash-derived base vectors and mixes
 * them with a fixed-weight bidirectional recurrent pass, so the same token
 * gets different vectors in different sentence contexts while re-encoding
 * the same sentence is bit-identical. All weights derive from a constant
 * seed baked into the model name: there is nothing to download and nothing
 * to train, which keeps exports reproducible byte for byte.
 */

export class ModelUnavailableError extends Error {}

export interface ContextualEncoder {
  readonly name: string;
  readonly dim: number;
  /** Hard cap on tokens per sentence, mirroring positional-embedding limits. */
  readonly maxTokens: number;
  /** One vector per token, plus a sentence-level CLS vector. */
  encode(tokens: number[]): { vectors: Float32Array[]; cls: Float32Array };
}

const LOCAL_MODEL_NAME = "local-bigru-v1";
const LOCAL_MODEL_SEED = 0x5c09e17;
const LOCAL_MODEL_MAX_TOKENS = 512;

/** Deterministic 32-bit PRNG (mulberry32). */
function mulberry32(seed: number): () => number {
  let a = seed | 0;
  return () => {
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function randomMatrix(rng: () => number, rows: number, cols: number, scale: number): Float64Array {
  const m = new Float64Array(rows * cols);
  for (let i = 0; i < m.length; i++) {
    m[i] = (rng() * 2 - 1) * scale;
  }
  return m;
}

function matVec(m: Float64Array, rows: number, cols: number, v: Float64Array, out: Float64Array): void {
  for (let r = 0; r < rows; r++) {
    let acc = 0;
    const base = r * cols;
    for (let c = 0; c < cols; c++) {
      acc += m[base + c] * v[c];
    }
    out[r] = acc;
  }
}

class LocalBigruEncoder implements ContextualEncoder {
  readonly name = LOCAL_MODEL_NAME;
  readonly maxTokens = LOCAL_MODEL_MAX_TOKENS;

  private readonly wIn: Float64Array; // dim x dim, input projection (both directions)
  private readonly uFwd: Float64Array; // dim x dim, forward recurrence
  private readonly uBwd: Float64Array; // dim x dim, backward recurrence
  private readonly pOut: Float64Array; // dim x 2*dim, per-token output head
  private readonly pCls: Float64Array; // dim x 2*dim, sentence head
  private readonly baseCache = new Map<number, Float64Array>();

  constructor(readonly dim: number) {
    const rng = mulberry32(LOCAL_MODEL_SEED);
    const scale = 1 / Math.sqrt(dim);
    this.wIn = randomMatrix(rng, dim, dim, scale);
    this.uFwd = randomMatrix(rng, dim, dim, scale);
    this.uBwd = randomMatrix(rng, dim, dim, scale);
    this.pOut = randomMatrix(rng, dim, 2 * dim, scale);
    this.pCls = randomMatrix(rng, dim, 2 * dim, scale);
  }

  private baseVector(tokenId: number): Float64Array {
    const cached = this.baseCache.get(tokenId);
    if (cached !== undefined) {
      return cached;
    }
    const rng = mulberry32((LOCAL_MODEL_SEED + Math.imul(tokenId + 1, 0x9e3779b9)) | 0);
    const v = new Float64Array(this.dim);
    for (let i = 0; i < this.dim; i++) {
      v[i] = rng() - 0.5;
    }
    this.baseCache.set(tokenId, v);
    return v;
  }

  encode(tokens: number[]): { vectors: Float32Array[]; cls: Float32Array } {
    const T = tokens.length;
    const dim = this.dim;
    const inputs: Float64Array[] = new Array(T);
    for (let t = 0; t < T; t++) {
      const projected = new Float64Array(dim);
      matVec(this.wIn, dim, dim, this.baseVector(tokens[t]), projected);
      inputs[t] = projected;
    }
    const fwd: Float64Array[] = new Array(T);
    const bwd: Float64Array[] = new Array(T);
    const scratch = new Float64Array(dim);
    let h = new Float64Array(dim);
    for (let t = 0; t < T; t++) {
      matVec(this.uFwd, dim, dim, h, scratch);
      const next = new Float64Array(dim);
      for (let i = 0; i < dim; i++) {
        next[i] = Math.tanh(inputs[t][i] + scratch[i]);
      }
      fwd[t] = next;
      h = next;
    }
    h = new Float64Array(dim);
    for (let t = T - 1; t >= 0; t--) {
      matVec(this.uBwd, dim, dim, h, scratch);
      const next = new Float64Array(dim);
      for (let i = 0; i < dim; i++) {
        next[i] = Math.tanh(inputs[t][i] + scratch[i]);
      }
      bwd[t] = next;
      h = next;
    }
    const joined = new Float64Array(2 * dim);
    const head = new Float64Array(dim);
    const vectors: Float32Array[] = new Array(T);
    for (let t = 0; t < T; t++) {
      joined.set(fwd[t], 0);
      joined.set(bwd[t], dim);
      matVec(this.pOut, dim, 2 * dim, joined, head);
      const out = new Float32Array(dim);
      for (let i = 0; i < dim; i++) {
        out[i] = Math.fround(Math.tanh(head[i]));
      }
      vectors[t] = out;
    }
    joined.set(fwd[T - 1], 0);
    joined.set(bwd[0], dim);
    matVec(this.pCls, dim, 2 * dim, joined, head);
    const cls = new Float32Array(dim);
    for (let i = 0; i < dim; i++) {
      cls[i] = Math.fround(Math.tanh(head[i]));
    }
    return { vectors, cls };
  }
}

export function loadEncoder(modelName: string, dim: number): ContextualEncoder {
  if (modelName === LOCAL_MODEL_NAME) {
    return new LocalBigruEncoder(dim);
  }
  throw new ModelUnavailableError(
    `model ${modelName} is unavailable in this environment; ` +
      `the built-in deterministic encoder is ${LOCAL_MODEL_NAME}`,
  );
}

export { LOCAL_MODEL_NAME };
