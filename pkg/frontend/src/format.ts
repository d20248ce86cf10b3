/*
Strict parsers for the selection-run artifact files.

Every file is plain text: a magic line naming the format, a
`# config=<12 hex>` line tying it to the producing configuration, an
optional `# key=value ...` meta line, a fixed header, then comma-separated
data rows. Parsers keep the raw field tokens of every row (`rows`) so the
dump mode can reproduce the numbers byte for byte; typed values are
derived alongside and never written back.
*/

export const TREE_MAGIC = "# schmidt-histories tree v1";
export const CONSISTENCY_MAGIC = "# schmidt-histories consistency v1";
export const PROJECTIONS_MAGIC = "# schmidt-histories projections v1";
export const PERCENTILES_MAGIC = "# schmidt-histories percentiles v1";

export const TREE_HEADER = "id,parent,time,partition,probability";
export const CONSISTENCY_HEADER = "t,min_dhp,epsilon,leaf_count,projection";
export const PROJECTIONS_HEADER =
  "t,leaf,partition,dhp,epsilon,child_s,child_c,prob_s,prob_c";
export const PERCENTILES_HEADER = "k,p,epsilon,samples,seed";

export interface TreeNode {
  id: number;
  parent: number | null;
  time: number;
  partition: number[] | null;
  probability: number;
}

export interface TreeDocument {
  configHash: string;
  d1: number;
  d2: number;
  finalTime: number;
  nodes: TreeNode[];
  header: string;
  rows: string[][];
}

export interface ConsistencyStep {
  t: number;
  minDhp: number | null;
  epsilon: number;
  leafCount: number;
  projected: boolean;
}

export interface ConsistencyDocument {
  configHash: string;
  steps: ConsistencyStep[];
  header: string;
  rows: string[][];
}

export interface ProjectionEvent {
  t: number;
  leaf: number;
  partition: number[];
  dhp: number;
  epsilon: number;
  childS: number;
  childC: number;
  probS: number;
  probC: number;
}

export interface ProjectionsDocument {
  configHash: string;
  events: ProjectionEvent[];
  header: string;
  rows: string[][];
}

export interface PercentileCell {
  k: number;
  p: number;
  pToken: string;
  epsilon: number;
  samples: number;
  seed: number;
}

export interface PercentilesDocument {
  configHash: string;
  d1: number;
  d2: number;
  kind: string;
  cells: PercentileCell[];
  kValues: number[];
  pTokens: string[];
  header: string;
  rows: string[][];
}

const NUMBER_TOKEN = /^-?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$/;
const INT_TOKEN = /^\d+$/;
const CONFIG_LINE = /^# config=([0-9a-f]{12})$/;

function splitBody(text: string, path: string): string[] {
  if (text.includes("\r")) {
    throw new Error(`${path}: carriage returns are not part of the format`);
  }
  if (!text.endsWith("\n")) {
    throw new Error(`${path}: missing trailing newline`);
  }
  return text.slice(0, -1).split("\n");
}

function line(lines: string[], index: number, path: string): string {
  const got = lines[index];
  if (got === undefined) {
    throw new Error(`${path}: truncated at line ${index + 1}`);
  }
  return got;
}

function expectMagic(lines: string[], magic: string, path: string): void {
  const got = line(lines, 0, path);
  if (got !== magic) {
    throw new Error(`${path} line 1: expected magic "${magic}" (got "${got}")`);
  }
}

function configHash(lines: string[], path: string): string {
  const got = line(lines, 1, path);
  const m = CONFIG_LINE.exec(got);
  if (!m || m[1] === undefined) {
    throw new Error(`${path} line 2: expected "# config=<12 hex digits>" (got "${got}")`);
  }
  return m[1];
}

function metaPairs(raw: string, keys: string[], path: string, lineNo: number): Record<string, string> {
  const where = `${path} line ${lineNo}`;
  if (!raw.startsWith("# ")) {
    throw new Error(`${where}: expected a "# key=value ..." meta line (got "${raw}")`);
  }
  const pairs: Record<string, string> = {};
  for (const token of raw.slice(2).split(" ")) {
    const eq = token.indexOf("=");
    if (eq <= 0) {
      throw new Error(`${where}: malformed meta token "${token}"`);
    }
    pairs[token.slice(0, eq)] = token.slice(eq + 1);
  }
  for (const key of keys) {
    if (!(key in pairs)) {
      throw new Error(`${where}: meta line is missing ${key}`);
    }
  }
  return pairs;
}

function expectHeader(lines: string[], index: number, header: string, path: string): void {
  const got = line(lines, index, path);
  if (got !== header) {
    throw new Error(`${path} line ${index + 1}: expected header "${header}" (got "${got}")`);
  }
}

function parseNumber(token: string, field: string, where: string): number {
  if (!NUMBER_TOKEN.test(token)) {
    throw new Error(`${where}: ${field} must be a finite number (got "${token}")`);
  }
  return Number(token);
}

function parseInt_(token: string, field: string, where: string): number {
  if (!INT_TOKEN.test(token)) {
    throw new Error(`${where}: ${field} must be a non-negative integer (got "${token}")`);
  }
  return Number(token);
}

// Partitions serialize as dimension indices joined by "+", e.g. "0+2".
function parsePartition(token: string, field: string, where: string): number[] {
  const sides = token.split("+").map((part) => parseInt_(part, field, where));
  for (let i = 1; i < sides.length; i++) {
    const prev = sides[i - 1]!;
    const cur = sides[i]!;
    if (cur <= prev) {
      throw new Error(`${where}: ${field} indices must be strictly increasing (got "${token}")`);
    }
  }
  return sides;
}

function dataRows(
  lines: string[],
  start: number,
  fieldCount: number,
  header: string,
  path: string,
): { fields: string[][]; lineNos: number[] } {
  const fields: string[][] = [];
  const lineNos: number[] = [];
  for (let i = start; i < lines.length; i++) {
    const raw = lines[i]!;
    const parts = raw.split(",");
    if (parts.length !== fieldCount) {
      throw new Error(
        `${path} line ${i + 1}: expected ${fieldCount} fields as in "${header}" (got ${parts.length})`,
      );
    }
    fields.push(parts);
    lineNos.push(i + 1);
  }
  return { fields, lineNos };
}

export function parseTree(text: string, path = "tree.txt"): TreeDocument {
  const lines = splitBody(text, path);
  expectMagic(lines, TREE_MAGIC, path);
  const hash = configHash(lines, path);
  const meta = metaPairs(line(lines, 2, path), ["d1", "d2", "time"], path, 3);
  expectHeader(lines, 3, TREE_HEADER, path);
  const { fields, lineNos } = dataRows(lines, 4, 5, TREE_HEADER, path);
  if (fields.length === 0) {
    throw new Error(`${path}: tree has no nodes`);
  }

  const d1 = parseInt_(meta["d1"]!, "d1", `${path} line 3`);
  const nodes: TreeNode[] = [];
  for (let i = 0; i < fields.length; i++) {
    const row = fields[i]!;
    const where = `${path} line ${lineNos[i]}`;
    const id = parseInt_(row[0]!, "id", where);
    if (id !== i) {
      throw new Error(`${where}: node ids must be consecutive from 0 (got ${id})`);
    }
    let parent: number | null = null;
    let partition: number[] | null = null;
    if (i === 0) {
      if (row[1] !== "" || row[3] !== "") {
        throw new Error(`${where}: the root row must leave parent and partition empty`);
      }
    } else {
      if (row[1] === "" || row[3] === "") {
        throw new Error(`${where}: node must name a parent and a partition`);
      }
      parent = parseInt_(row[1]!, "parent", where);
      if (parent >= id) {
        throw new Error(`${where}: parent must be an earlier node (got ${parent})`);
      }
      partition = parsePartition(row[3]!, "partition", where);
      if (partition[partition.length - 1]! >= d1) {
        throw new Error(`${where}: partition index out of range for d1=${d1}`);
      }
    }
    const time = parseNumber(row[2]!, "time", where);
    const probability = parseNumber(row[4]!, "probability", where);
    if (probability < 0) {
      throw new Error(`${where}: probability must be non-negative (got ${probability})`);
    }
    nodes.push({ id, parent, time, partition, probability });
  }

  return {
    configHash: hash,
    d1,
    d2: parseInt_(meta["d2"]!, "d2", `${path} line 3`),
    finalTime: parseNumber(meta["time"]!, "time", `${path} line 3`),
    nodes,
    header: TREE_HEADER,
    rows: fields,
  };
}

export function parseConsistency(text: string, path = "consistency.csv"): ConsistencyDocument {
  const lines = splitBody(text, path);
  expectMagic(lines, CONSISTENCY_MAGIC, path);
  const hash = configHash(lines, path);
  expectHeader(lines, 2, CONSISTENCY_HEADER, path);
  const { fields, lineNos } = dataRows(lines, 3, 5, CONSISTENCY_HEADER, path);

  const steps: ConsistencyStep[] = [];
  for (let i = 0; i < fields.length; i++) {
    const row = fields[i]!;
    const where = `${path} line ${lineNos[i]}`;
    const flag = row[4]!;
    if (flag !== "0" && flag !== "1") {
      throw new Error(`${where}: projection must be 0 or 1 (got "${flag}")`);
    }
    steps.push({
      t: parseNumber(row[0]!, "t", where),
      minDhp: row[1] === "" ? null : parseNumber(row[1]!, "min_dhp", where),
      epsilon: parseNumber(row[2]!, "epsilon", where),
      leafCount: parseInt_(row[3]!, "leaf_count", where),
      projected: flag === "1",
    });
  }

  return { configHash: hash, steps, header: CONSISTENCY_HEADER, rows: fields };
}

export function parseProjections(text: string, path = "projections.csv"): ProjectionsDocument {
  const lines = splitBody(text, path);
  expectMagic(lines, PROJECTIONS_MAGIC, path);
  const hash = configHash(lines, path);
  expectHeader(lines, 2, PROJECTIONS_HEADER, path);
  const { fields, lineNos } = dataRows(lines, 3, 9, PROJECTIONS_HEADER, path);

  const events: ProjectionEvent[] = [];
  for (let i = 0; i < fields.length; i++) {
    const row = fields[i]!;
    const where = `${path} line ${lineNos[i]}`;
    events.push({
      t: parseNumber(row[0]!, "t", where),
      leaf: parseInt_(row[1]!, "leaf", where),
      partition: parsePartition(row[2]!, "partition", where),
      dhp: parseNumber(row[3]!, "dhp", where),
      epsilon: parseNumber(row[4]!, "epsilon", where),
      childS: parseInt_(row[5]!, "child_s", where),
      childC: parseInt_(row[6]!, "child_c", where),
      probS: parseNumber(row[7]!, "prob_s", where),
      probC: parseNumber(row[8]!, "prob_c", where),
    });
  }

  return { configHash: hash, events, header: PROJECTIONS_HEADER, rows: fields };
}

export function parsePercentiles(text: string, path = "percentiles.csv"): PercentilesDocument {
  const lines = splitBody(text, path);
  expectMagic(lines, PERCENTILES_MAGIC, path);
  const hash = configHash(lines, path);
  const meta = metaPairs(line(lines, 2, path), ["d1", "d2", "kind"], path, 3);
  expectHeader(lines, 3, PERCENTILES_HEADER, path);
  const { fields, lineNos } = dataRows(lines, 4, 5, PERCENTILES_HEADER, path);
  if (fields.length === 0) {
    throw new Error(`${path}: percentile table has no cells`);
  }

  const cells: PercentileCell[] = [];
  for (let i = 0; i < fields.length; i++) {
    const row = fields[i]!;
    const where = `${path} line ${lineNos[i]}`;
    const p = parseNumber(row[1]!, "p", where);
    if (p < 0 || p > 1) {
      throw new Error(`${where}: p must lie in [0, 1] (got ${p})`);
    }
    cells.push({
      k: parseInt_(row[0]!, "k", where),
      p,
      pToken: row[1]!,
      epsilon: parseNumber(row[2]!, "epsilon", where),
      samples: parseInt_(row[3]!, "samples", where),
      seed: parseInt_(row[4]!, "seed", where),
    });
  }

  // Rows come k-major over a full (k, p) grid; the curve extraction below
  // relies on that, so validate the shape here.
  const pTokens: string[] = [];
  for (const cell of cells) {
    if (pTokens.length > 0 && cell.pToken === pTokens[0]) break;
    pTokens.push(cell.pToken);
  }
  if (cells.length % pTokens.length !== 0) {
    throw new Error(`${path}: rows do not form a full k-by-p grid`);
  }
  const kValues: number[] = [];
  for (let block = 0; block < cells.length / pTokens.length; block++) {
    const first = cells[block * pTokens.length]!;
    for (let j = 0; j < pTokens.length; j++) {
      const cell = cells[block * pTokens.length + j]!;
      const where = `${path} line ${lineNos[block * pTokens.length + j]}`;
      if (cell.pToken !== pTokens[j]) {
        throw new Error(`${where}: p must repeat the first block's sequence (got ${cell.pToken})`);
      }
      if (cell.k !== first.k) {
        throw new Error(`${where}: k must be constant within a block (got ${cell.k})`);
      }
      if (cell.samples !== cells[0]!.samples || cell.seed !== cells[0]!.seed) {
        throw new Error(`${where}: samples and seed must be constant across the table`);
      }
    }
    if (kValues.length > 0 && first.k <= kValues[kValues.length - 1]!) {
      throw new Error(`${path}: k blocks must be strictly increasing (got ${first.k})`);
    }
    kValues.push(first.k);
  }

  return {
    configHash: hash,
    d1: parseInt_(meta["d1"]!, "d1", `${path} line 3`),
    d2: parseInt_(meta["d2"]!, "d2", `${path} line 3`),
    kind: meta["kind"]!,
    cells,
    kValues,
    pTokens,
    header: PERCENTILES_HEADER,
    rows: fields,
  };
}

// One curve per p, in table order, each over the full k grid.
export function percentileCurves(
  doc: PercentilesDocument,
): { pToken: string; points: { k: number; epsilon: number }[] }[] {
  return doc.pTokens.map((pToken, j) => ({
    pToken,
    points: doc.kValues.map((k, block) => {
      const cell = doc.cells[block * doc.pTokens.length + j]!;
      return { k, epsilon: cell.epsilon };
    }),
  }));
}
