#!/usr/bin/env node
/** CLI wrapper: tokenized JSON-lines in, embedding store out. */

import { parseArgs } from "node:util";

import { CorpusFormatError, exportFile } from "./export.js";
import { LOCAL_MODEL_NAME, ModelUnavailableError } from "./model.js";

function main(): number {
  const { values } = parseArgs({
    options: {
      in: { type: "string" },
      out: { type: "string" },
      model: { type: "string", default: LOCAL_MODEL_NAME },
      dim: { type: "string", default: "32" },
      "no-cls": { type: "boolean", default: false },
    },
  });
  if (!values.in || !values.out) {
    console.error(
      "usage: embed-export --in tokenized.jsonl --out store.bin " +
        `[--model ${LOCAL_MODEL_NAME}] [--dim 32] [--no-cls]`,
    );
    return 1;
  }
  const dim = Number(values.dim);
  if (!Number.isInteger(dim) || dim <= 0) {
    console.error(`--dim must be a positive integer, got ${values.dim}`);
    return 1;
  }
  try {
    const summary = exportFile(values.in, values.out, values.model!, dim, !values["no-cls"]);
    console.log(JSON.stringify({
      documents: summary.documents,
      sentences: summary.sentences,
      vectors: summary.vectors,
      truncated: summary.truncated.length,
      dim: summary.dim,
      vocab_hash: summary.vocabHash,
      out: values.out,
    }));
    return 0;
  } catch (err) {
    if (err instanceof ModelUnavailableError) {
      console.error(`error: ${err.message}`);
      return 2;
    }
    if (err instanceof CorpusFormatError) {
      console.error(`error: ${err.message}`);
      return 2;
    }
    throw err;
  }
}

process.exit(main());
