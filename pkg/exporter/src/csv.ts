/** Reader for the abstracts CSV: header `entity,abstract`, RFC-4180 quoting. */

export interface AbstractRecord {
  entity: string;
  abstract: string;
}

/** Split CSV text into rows of fields, honoring quoted fields. */
export function parseCsv(text: string): string[][] {
  const rows: string[][] = [];
  let row: string[] = [];
  let field = "";
  let quoted = false;
  let i = 0;
  while (i < text.length) {
    const ch = text[i];
    if (quoted) {
      if (ch === '"') {
        if (text[i + 1] === '"') {
          field += '"';
          i += 2;
          continue;
        }
        quoted = false;
        i += 1;
        continue;
      }
      field += ch;
      i += 1;
      continue;
    }
    if (ch === '"') {
      quoted = true;
      i += 1;
    } else if (ch === ",") {
      row.push(field);
      field = "";
      i += 1;
    } else if (ch === "\n" || ch === "\r") {
      if (ch === "\r" && text[i + 1] === "\n") {
        i += 1;
      }
      row.push(field);
      rows.push(row);
      row = [];
      field = "";
      i += 1;
    } else {
      field += ch;
      i += 1;
    }
  }
  if (quoted) {
    throw new Error("unterminated quoted field");
  }
  if (field !== "" || row.length > 0) {
    row.push(field);
    rows.push(row);
  }
  return rows;
}

/**
 * Parse the abstracts file. Records with an empty abstract are returned
 * under `skipped` so the caller can warn; duplicate entity ids are an
 * error.
 */
export function parseAbstracts(text: string): {
  records: AbstractRecord[];
  skipped: string[];
} {
  const rows = parseCsv(text).filter((r) => !(r.length === 1 && r[0] === ""));
  if (rows.length === 0 || rows[0].join(",") !== "entity,abstract") {
    throw new Error("expected CSV header 'entity,abstract'");
  }
  const records: AbstractRecord[] = [];
  const skipped: string[] = [];
  const seen = new Set<string>();
  for (let r = 1; r < rows.length; r++) {
    const row = rows[r];
    if (row.length !== 2) {
      throw new Error(`row ${r + 1}: expected 2 fields, got ${row.length}`);
    }
    const [entity, abstract] = row;
    if (entity === "") {
      throw new Error(`row ${r + 1}: empty entity id`);
    }
    if (seen.has(entity)) {
      throw new Error(`row ${r + 1}: duplicate entity '${entity}'`);
    }
    seen.add(entity);
    if (abstract.trim() === "") {
      skipped.push(entity);
      continue;
    }
    records.push({ entity, abstract });
  }
  return { records, skipped };
}
