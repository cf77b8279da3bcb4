/**
 * Reads the tokenized JSON-lines produced by the primary `preprocess`
 * subcommand and writes the binary embedding store. Consuming pre-tokenized
 * input (never re-tokenizing) is what guarantees token-count alignment with
 * the training pipeline.
 */

import { readFileSync, writeFileSync } from "node:fs";

import { ContextualEncoder, loadEncoder } from "./model.js";
import { serializeStore, StoreRecord } from "./store.js";

export interface TokenizedRecord {
  id: string;
  tokens: number[][];
  lengths: number[];
  vocab_id: string;
}

export interface ExportSummary {
  documents: number;
  sentences: number;
  vectors: number;
  truncated: { docId: string; sentenceIndex: number; from: number; to: number }[];
  vocabHash: string;
  dim: number;
}

export class CorpusFormatError extends Error {}

export function parseTokenizedCorpus(text: string): TokenizedRecord[] {
  const records: TokenizedRecord[] = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) {
      continue;
    }
    let raw: unknown;
    try {
      raw = JSON.parse(line);
    } catch {
      throw new CorpusFormatError(`line ${i + 1}: not valid JSON`);
    }
    const record = raw as Partial<TokenizedRecord>;
    if (
      typeof record.id !== "string" ||
      !Array.isArray(record.tokens) ||
      !Array.isArray(record.lengths) ||
      typeof record.vocab_id !== "string"
    ) {
      throw new CorpusFormatError(
        `line ${i + 1}: expected {"id", "tokens", "lengths", "vocab_id"} from the preprocess step`,
      );
    }
    if (record.tokens.length !== record.lengths.length) {
      throw new CorpusFormatError(`line ${i + 1}: tokens and lengths disagree`);
    }
    record.tokens.forEach((sentence, s) => {
      if (!Array.isArray(sentence) || sentence.length !== record.lengths![s]) {
        throw new CorpusFormatError(
          `line ${i + 1}: sentence ${s} length ${sentence.length} != recorded ${record.lengths![s]}`,
        );
      }
    });
    records.push(record as TokenizedRecord);
  }
  return records;
}

export function exportCorpus(
  records: TokenizedRecord[],
  encoder: ContextualEncoder,
  withCls: boolean,
  warn: (message: string) => void = () => {},
): { bytes: Buffer; summary: ExportSummary } {
  if (records.length === 0) {
    throw new CorpusFormatError("tokenized corpus is empty");
  }
  const vocabHash = records[0].vocab_id;
  const storeRecords: StoreRecord[] = [];
  const summary: ExportSummary = {
    documents: records.length,
    sentences: 0,
    vectors: 0,
    truncated: [],
    vocabHash,
    dim: encoder.dim,
  };
  for (const record of records) {
    if (record.vocab_id !== vocabHash) {
      throw new CorpusFormatError(
        `document ${record.id} was tokenized with a different vocabulary (${record.vocab_id})`,
      );
    }
    record.tokens.forEach((sentence, index) => {
      let tokens = sentence;
      if (tokens.length > encoder.maxTokens) {
        summary.truncated.push({
          docId: record.id,
          sentenceIndex: index,
          from: tokens.length,
          to: encoder.maxTokens,
        });
        warn(
          `${record.id}[${index}]: ${tokens.length} tokens exceed the model limit ` +
            `${encoder.maxTokens}; truncating`,
        );
        tokens = tokens.slice(0, encoder.maxTokens);
      }
      const { vectors, cls } = encoder.encode(tokens);
      storeRecords.push({
        docId: record.id,
        sentenceIndex: index,
        vectors,
        cls: withCls ? cls : undefined,
      });
      summary.sentences += 1;
      summary.vectors += vectors.length;
    });
  }
  const bytes = serializeStore(
    { dim: encoder.dim, vocabHash, hasCls: withCls },
    storeRecords,
  );
  return { bytes, summary };
}

export function exportFile(
  inputPath: string,
  outputPath: string,
  modelName: string,
  dim: number,
  withCls: boolean,
  warn: (message: string) => void = (m) => console.warn(m),
): ExportSummary {
  const encoder = loadEncoder(modelName, dim);
  const records = parseTokenizedCorpus(readFileSync(inputPath, "utf-8"));
  const { bytes, summary } = exportCorpus(records, encoder, withCls, warn);
  writeFileSync(outputPath, bytes);
  return summary;
}
