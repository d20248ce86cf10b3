import { describe, expect, it } from "vitest";

import {
  parseConsistency,
  parsePercentiles,
  parseProjections,
  parseTree,
  percentileCurves,
} from "../src/format";
import { fixtureText } from "./helpers";

const runTree = fixtureText("run/tree.txt");
const runConsistency = fixtureText("run/consistency.csv");
const runProjections = fixtureText("run/projections.csv");
const runPercentiles = fixtureText("run/percentiles.csv");

describe("tree parsing", () => {
  it("reads the run fixture", () => {
    const doc = parseTree(runTree);
    expect(doc.d1).toBe(3);
    expect(doc.d2).toBe(15);
    expect(doc.finalTime).toBe(6);
    expect(doc.nodes.length).toBe(doc.rows.length);
    expect(doc.nodes[0]).toMatchObject({ id: 0, parent: null, partition: null });
    for (const node of doc.nodes.slice(1)) {
      expect(node.parent).not.toBeNull();
      expect(node.parent!).toBeLessThan(node.id);
      expect(node.partition!.every((i) => i < doc.d1)).toBe(true);
    }
  });

  it("leaf probabilities sum to one", () => {
    const doc = parseTree(runTree);
    const parents = new Set(doc.nodes.map((n) => n.parent).filter((p) => p !== null));
    const leafSum = doc.nodes
      .filter((n) => !parents.has(n.id))
      .reduce((sum, n) => sum + n.probability, 0);
    expect(Math.abs(leafSum - 1)).toBeLessThan(1e-9);
  });

  it("reads the single-node fixture", () => {
    const doc = parseTree(fixtureText("quiet/tree.txt"));
    expect(doc.nodes.length).toBe(1);
  });

  it("rejects malformed trees with the offending field", () => {
    expect(() => parseTree("bogus\n")).toThrow(/expected magic/);
    expect(() =>
      parseTree(runTree.replace("# config=1ac41b1318de", "# config=xyz")),
    ).toThrow(/config=<12 hex digits>/);

    const small = [
      "# schmidt-histories tree v1",
      "# config=0123456789ab",
      "# d1=2 d2=3 time=1",
      "id,parent,time,partition,probability",
      "0,,0,,1",
      "1,0,0.5,0,0.6",
      "2,0,0.5,1,0.4",
    ].join("\n") + "\n";
    expect(parseTree(small).nodes.length).toBe(3);
    expect(() => parseTree(small.replace("1,0,0.5,0,0.6", "1,5,0.5,0,0.6"))).toThrow(
      /parent must be an earlier node/,
    );
    expect(() => parseTree(small.replace("2,0,0.5,1,0.4", "2,0,0.5,,0.4"))).toThrow(
      /must name a parent and a partition/,
    );
    expect(() => parseTree(small.replace("2,0,0.5,1,0.4", "2,0,0.5,1,oops"))).toThrow(
      /line 7: probability must be a finite number \(got "oops"\)/,
    );
    expect(() => parseTree(small.replace("2,0,0.5,1,0.4", "2,0,0.5,2,0.4"))).toThrow(
      /partition index out of range/,
    );
    expect(() => parseTree(small.slice(0, -1))).toThrow(/missing trailing newline/);
  });
});

describe("consistency parsing", () => {
  it("reads the run fixture", () => {
    const doc = parseConsistency(runConsistency);
    expect(doc.steps.length).toBe(121);
    expect(doc.steps[0]!.minDhp).toBeNull();
    expect(doc.steps.some((s) => s.projected)).toBe(true);
    expect(doc.configHash).toBe(parseTree(runTree).configHash);
  });

  it("reads an all-gap trace", () => {
    const doc = parseConsistency(fixtureText("quiet/consistency.csv"));
    expect(doc.steps.every((s) => s.minDhp === null)).toBe(true);
  });

  it("rejects bad flags and short rows", () => {
    expect(() => parseConsistency(runConsistency.replace(",1\n", ",2\n"))).toThrow(
      /projection must be 0 or 1/,
    );
    expect(() => parseConsistency(runConsistency.replace("0.15,", "0.15;"))).toThrow(
      /expected 5 fields/,
    );
  });
});

describe("projections parsing", () => {
  it("reads the run fixture", () => {
    const doc = parseProjections(runProjections);
    expect(doc.events.length).toBe(27);
    for (const event of doc.events) {
      expect(event.dhp).toBeLessThanOrEqual(event.epsilon);
      expect(Math.min(event.probS, event.probC)).toBeGreaterThan(0);
    }
  });

  it("reads an empty event log", () => {
    expect(parseProjections(fixtureText("quiet/projections.csv")).events.length).toBe(0);
  });

  it("rejects rows with the wrong shape", () => {
    const lines = runProjections.slice(0, -1).split("\n");
    const broken = lines.map((l, i) => (i === 3 ? l + ",9" : l)).join("\n") + "\n";
    expect(() => parseProjections(broken)).toThrow(/line 4: expected 9 fields/);
    const badLeaf = lines.map((l, i) => (i === 3 ? l.replace(/^([^,]*),0,/, "$1,-1,") : l)).join("\n") + "\n";
    expect(() => parseProjections(badLeaf)).toThrow(/leaf must be a non-negative integer/);
  });
});

describe("percentile parsing", () => {
  it("reads the table fixture", () => {
    const doc = parsePercentiles(runPercentiles);
    expect(doc.d1).toBe(3);
    expect(doc.d2).toBe(15);
    expect(doc.kind).toBe("medium-dhc");
    expect(doc.kValues).toEqual([1, 2, 4, 8, 16]);
    expect(doc.pTokens).toEqual(["0.1", "0.5", "0.9"]);
    expect(doc.cells.length).toBe(15);
  });

  it("curves are monotone in p at every k", () => {
    const curves = percentileCurves(parsePercentiles(runPercentiles));
    expect(curves.length).toBe(3);
    for (let block = 0; block < curves[0]!.points.length; block++) {
      const [lo, mid, hi] = curves.map((c) => c.points[block]!.epsilon);
      expect(lo!).toBeLessThan(mid!);
      expect(mid!).toBeLessThan(hi!);
    }
  });

  it("standalone and bundle copies parse identically", () => {
    const a = parsePercentiles(fixtureText("table.csv"));
    const b = parsePercentiles(runPercentiles);
    expect(a.cells).toEqual(b.cells);
  });

  it("rejects grid violations", () => {
    const lines = runPercentiles.slice(0, -1).split("\n");
    const truncated = lines.slice(0, -1).join("\n") + "\n";
    expect(() => parsePercentiles(truncated)).toThrow(/full k-by-p grid/);
    const swapped = [...lines];
    [swapped[4], swapped[7]] = [swapped[7]!, swapped[4]!];
    expect(() => parsePercentiles(swapped.join("\n") + "\n")).toThrow(
      /k must be constant within a block|p must repeat/,
    );
    const badP = lines.map((l, i) => (i === 5 ? l.replace(",0.5,", ",1.5,") : l)).join("\n") + "\n";
    expect(() => parsePercentiles(badP)).toThrow(/p must lie in \[0, 1\]/);
  });
});
