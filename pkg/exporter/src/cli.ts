#!/usr/bin/env node
/**
 * export --input abstracts.csv --model <name> --out emb.tsv
 *
 * Encodes each abstract and writes the embeddings TSV the retrieval
 * engine ingests. Rows with an empty abstract are skipped with a warning;
 * an unknown model name exits nonzero.
 */

import * as fs from "node:fs";

import { parseAbstracts } from "./csv";
import { loadModel, modelNames } from "./encoder";
import { formatEmbeddings } from "./tsv";

function usage(): string {
  return (
    "usage: techrec-export export --input abstracts.csv " +
    `--model <name> --out emb.tsv (models: ${modelNames().join(", ")})`
  );
}

function parseArgs(argv: string[]): { input: string; model: string; out: string } {
  if (argv[0] !== "export") {
    throw new Error(usage());
  }
  const values: Record<string, string> = {};
  for (let i = 1; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (!flag.startsWith("--") || value === undefined) {
      throw new Error(usage());
    }
    values[flag.slice(2)] = value;
  }
  for (const key of ["input", "model", "out"]) {
    if (!(key in values)) {
      throw new Error(`missing --${key}\n${usage()}`);
    }
  }
  return { input: values.input, model: values.model, out: values.out };
}

export function main(argv: string[]): number {
  let args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error((err as Error).message);
    return 1;
  }
  try {
    const encoder = loadModel(args.model);
    console.log(`Loading embedding model: ${args.model} (dim ${encoder.spec.dim})`);
    const { records, skipped } = parseAbstracts(fs.readFileSync(args.input, "utf8"));
    for (const entity of skipped) {
      console.warn(`warning: skipping '${entity}': empty abstract`);
    }
    const vectors = new Map<string, Float64Array>();
    for (const record of records) {
      vectors.set(record.entity, encoder.encode(record.abstract));
    }
    fs.writeFileSync(args.out, formatEmbeddings(encoder.spec.dim, vectors));
    console.log(`wrote ${vectors.size} embeddings (dim ${encoder.spec.dim}) to ${args.out}`);
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
