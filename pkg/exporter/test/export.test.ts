import assert from "node:assert/strict";
import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { test } from "node:test";

import { parseAbstracts, parseCsv } from "../src/csv";
import { main } from "../src/cli";
import { formatEmbeddings, parseEmbeddings } from "../src/tsv";

const ABSTRACTS =
  "entity,abstract\n" +
  'robot-arm,"Articulated arms, used in assembly lines."\n' +
  "alloy-x,A lightweight alloy for aircraft frames.\n" +
  "cafeteria,\n" +
  'lidar,"Laser ranging sensors\nfor autonomous vehicles."\n';

function tmpdir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), "exporter-"));
}

test("parseCsv handles quotes, escapes, and embedded newlines", () => {
  const rows = parseCsv('a,"b,c"\n"say ""hi""","x\ny"\n');
  assert.deepEqual(rows, [
    ["a", "b,c"],
    ['say "hi"', "x\ny"],
  ]);
  assert.throws(() => parseCsv('a,"unterminated\n'), /unterminated/);
});

test("parseAbstracts validates the header and splits out empty abstracts", () => {
  const { records, skipped } = parseAbstracts(ABSTRACTS);
  assert.deepEqual(records.map((r) => r.entity), ["robot-arm", "alloy-x", "lidar"]);
  assert.deepEqual(skipped, ["cafeteria"]);
  assert.throws(() => parseAbstracts("id,text\nx,y\n"), /header/);
  assert.throws(
    () => parseAbstracts("entity,abstract\na,one\na,two\n"),
    /duplicate entity 'a'/
  );
  assert.throws(() => parseAbstracts("entity,abstract\n,text\n"), /empty entity/);
});

test("TSV grammar round-trips through its own parser", () => {
  const vectors = new Map<string, Float64Array>([
    ["b", Float64Array.from([0.25, -1.5, 3.141592653589793])],
    ["a", Float64Array.from([1e-9, 2, -0.1])],
  ]);
  const text = formatEmbeddings(3, vectors);
  const lines = text.split("\n");
  assert.equal(lines[0], "dim=3");
  assert.ok(lines[1].startsWith("a\t")); // sorted by id
  const back = parseEmbeddings(text);
  assert.equal(back.dim, 3);
  assert.deepEqual(Array.from(back.vectors.get("a")!), [1e-9, 2, -0.1]);
  assert.deepEqual(
    Array.from(back.vectors.get("b")!),
    [0.25, -1.5, 3.141592653589793]
  );
});

test("export writes one row per nonempty abstract", () => {
  const dir = tmpdir();
  const input = path.join(dir, "abstracts.csv");
  const out = path.join(dir, "emb.tsv");
  fs.writeFileSync(input, ABSTRACTS);
  const code = main(["export", "--input", input, "--model", "tiny-16", "--out", out]);
  assert.equal(code, 0);
  const { dim, vectors } = parseEmbeddings(fs.readFileSync(out, "utf8"));
  assert.equal(dim, 16);
  assert.deepEqual([...vectors.keys()].sort(), ["alloy-x", "lidar", "robot-arm"]);
});

test("repeated runs produce identical files", () => {
  const dir = tmpdir();
  const input = path.join(dir, "abstracts.csv");
  fs.writeFileSync(input, ABSTRACTS);
  const outs = [path.join(dir, "one.tsv"), path.join(dir, "two.tsv")];
  for (const out of outs) {
    assert.equal(
      main(["export", "--input", input, "--model", "tiny-16", "--out", out]),
      0
    );
  }
  assert.deepEqual(fs.readFileSync(outs[0]), fs.readFileSync(outs[1]));
});

test("identical abstracts give identical vectors", () => {
  const dir = tmpdir();
  const input = path.join(dir, "abstracts.csv");
  const out = path.join(dir, "emb.tsv");
  fs.writeFileSync(input, "entity,abstract\nfirst,shared text\nsecond,shared text\n");
  assert.equal(main(["export", "--input", input, "--model", "tiny-16", "--out", out]), 0);
  const { vectors } = parseEmbeddings(fs.readFileSync(out, "utf8"));
  assert.deepEqual(
    Array.from(vectors.get("first")!),
    Array.from(vectors.get("second")!)
  );
});

test("the CLI exits nonzero on an unknown model or bad usage", () => {
  const dir = tmpdir();
  const input = path.join(dir, "abstracts.csv");
  fs.writeFileSync(input, ABSTRACTS);
  const cli = path.join(__dirname, "..", "src", "cli.js");
  assert.throws(() =>
    execFileSync(
      process.execPath,
      [cli, "export", "--input", input, "--model", "nope", "--out", path.join(dir, "o")],
      { stdio: "pipe" }
    )
  );
  assert.throws(() => execFileSync(process.execPath, [cli], { stdio: "pipe" }));
  assert.equal(main(["export", "--input", input, "--model", "nope", "--out", "x"]), 1);
  assert.equal(main(["wrong-command"]), 1);
});

test("a missing input file is a clean error, not a crash", () => {
  assert.equal(
    main(["export", "--input", "/no/such/file.csv", "--model", "tiny-16", "--out", "x"]),
    1
  );
});
