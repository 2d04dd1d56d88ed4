/**
 * Writer for the embeddings TSV the retrieval engine ingests:
 * a `dim=N` first line, then one `id<TAB>v1,v2,...` row per entity,
 * sorted by id. JavaScript's shortest round-trip number formatting keeps
 * the float64 values exact on re-parse.
 */

export function formatEmbeddings(
  dim: number,
  vectors: Map<string, Float64Array>
): string {
  const lines = [`dim=${dim}`];
  for (const id of [...vectors.keys()].sort()) {
    const vec = vectors.get(id)!;
    if (vec.length !== dim) {
      throw new Error(`'${id}': expected ${dim} values, got ${vec.length}`);
    }
    lines.push(`${id}\t${Array.from(vec, (v) => String(v)).join(",")}`);
  }
  return lines.join("\n") + "\n";
}

/** Re-parse a TSV produced by formatEmbeddings (used by the tests). */
export function parseEmbeddings(text: string): {
  dim: number;
  vectors: Map<string, Float64Array>;
} {
  const lines = text.split("\n");
  const m = /^dim=(\d+)$/.exec(lines[0] ?? "");
  if (!m) {
    throw new Error("expected a 'dim=N' first line");
  }
  const dim = Number(m[1]);
  const vectors = new Map<string, Float64Array>();
  for (let i = 1; i < lines.length; i++) {
    if (lines[i] === "") {
      continue;
    }
    const parts = lines[i].split("\t");
    if (parts.length !== 2) {
      throw new Error(`line ${i + 1}: expected id<TAB>values`);
    }
    const values = parts[1].split(",").map(Number);
    if (values.length !== dim || values.some((v) => !Number.isFinite(v))) {
      throw new Error(`line ${i + 1}: expected ${dim} finite values`);
    }
    vectors.set(parts[0], Float64Array.from(values));
  }
  return { dim, vectors };
}
