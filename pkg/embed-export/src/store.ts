/**
 * Binary embedding-store writer.
 *
 * Layout (little-endian), identical to the Python reader's contract:
 *
 *     magic    8 bytes  "EMBSTORE"
 *     u32      format version (1)
 *     u32      embedding dim E
 *     u16      vocabulary hash length, then UTF-8 hash
 *     u32      document count
 *     u8       has_cls
 *     u32      record count
 *     per record, sorted by (doc id, sentence index):
 *         u16   doc id length, then UTF-8 doc id
 *         u32   sentence index
 *         u32   token count
 *         f32*E CLS vector (only when has_cls)
 *         f32*(token count * E) token vectors, row-major
 */

export const MAGIC = "EMBSTORE";
export const FORMAT_VERSION = 1;

export interface StoreRecord {
  docId: string;
  sentenceIndex: number;
  vectors: Float32Array[]; // one per token, each of length dim
  cls?: Float32Array;
}

export interface StoreHeader {
  dim: number;
  vocabHash: string;
  hasCls: boolean;
}

function compareByCodePoint(a: string, b: string): number {
  // Matches Python's tuple sort for BMP strings (doc ids are ASCII here).
  const an = [...a];
  const bn = [...b];
  const n = Math.min(an.length, bn.length);
  for (let i = 0; i < n; i++) {
    const d = an[i].codePointAt(0)! - bn[i].codePointAt(0)!;
    if (d !== 0) {
      return d;
    }
  }
  return an.length - bn.length;
}

export function serializeStore(header: StoreHeader, records: StoreRecord[]): Buffer {
  const sorted = [...records].sort(
    (a, b) => compareByCodePoint(a.docId, b.docId) || a.sentenceIndex - b.sentenceIndex,
  );
  const chunks: Buffer[] = [];
  const u32 = (v: number) => {
    const b = Buffer.alloc(4);
    b.writeUInt32LE(v);
    return b;
  };
  const u16 = (v: number) => {
    const b = Buffer.alloc(2);
    b.writeUInt16LE(v);
    return b;
  };
  chunks.push(Buffer.from(MAGIC, "ascii"));
  chunks.push(u32(FORMAT_VERSION));
  chunks.push(u32(header.dim));
  const hash = Buffer.from(header.vocabHash, "utf-8");
  chunks.push(u16(hash.length), hash);
  const docCount = new Set(sorted.map((r) => r.docId)).size;
  chunks.push(u32(docCount));
  chunks.push(Buffer.from([header.hasCls ? 1 : 0]));
  chunks.push(u32(sorted.length));
  for (const record of sorted) {
    const id = Buffer.from(record.docId, "utf-8");
    chunks.push(u16(id.length), id);
    chunks.push(u32(record.sentenceIndex));
    chunks.push(u32(record.vectors.length));
    if (header.hasCls) {
      if (record.cls === undefined || record.cls.length !== header.dim) {
        throw new Error(`record ${record.docId}[${record.sentenceIndex}] lacks a CLS vector`);
      }
      chunks.push(float32Buffer(record.cls));
    }
    for (const vec of record.vectors) {
      if (vec.length !== header.dim) {
        throw new Error(
          `record ${record.docId}[${record.sentenceIndex}] has a ${vec.length}-dim vector, expected ${header.dim}`,
        );
      }
      chunks.push(float32Buffer(vec));
    }
  }
  return Buffer.concat(chunks);
}

function float32Buffer(vec: Float32Array): Buffer {
  const b = Buffer.alloc(vec.length * 4);
  for (let i = 0; i < vec.length; i++) {
    b.writeFloatLE(vec[i], i * 4);
  }
  return b;
}
