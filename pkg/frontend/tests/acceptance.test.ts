/*
Headline checks: every figure kind renders from bundles written by the
simulation CLI, and the dump mode reproduces the file numbers byte for
byte.
*/

import { describe, expect, it } from "vitest";

import { dumpDocument } from "../src/dump";
import {
  parseConsistency,
  parsePercentiles,
  parseProjections,
  parseTree,
} from "../src/format";
import {
  renderConsistency,
  renderPercentiles,
  renderProjections,
  renderTree,
} from "../src/render";
import { svgDocument } from "../src/svg";
import { bodyLines, fixtureText } from "./helpers";

const KINDS = [
  { kind: "tree", file: "tree.txt", parse: parseTree, render: renderTree },
  { kind: "consistency", file: "consistency.csv", parse: parseConsistency, render: renderConsistency },
  { kind: "projections", file: "projections.csv", parse: parseProjections, render: renderProjections },
  { kind: "percentiles", file: "percentiles.csv", parse: parsePercentiles, render: renderPercentiles },
] as const;

describe("every figure kind renders from golden bundles", () => {
  for (const { kind, file, parse, render } of KINDS) {
    it(`${kind} from run/${file}`, () => {
      const doc = parse(fixtureText(`run/${file}`), file);
      const svg = svgDocument([render(doc as never)]);
      expect(svg.startsWith("<svg ")).toBe(true);
      expect(svg.endsWith("</svg>\n")).toBe(true);
      expect(svg).toBe(svgDocument([render(doc as never)]));
    });
  }

  // The quiet bundle has a single-node tree, an all-gap trace, and an
  // empty event log; those shapes must render too.
  for (const { kind, file, parse, render } of KINDS.slice(0, 3)) {
    it(`${kind} from quiet/${file}`, () => {
      const svg = svgDocument([render(parse(fixtureText(`quiet/${file}`), file) as never)]);
      expect(svg.startsWith("<svg ")).toBe(true);
    });
  }
});

describe("dump mode byte-matches the fixture numbers", () => {
  const files = [
    ...KINDS.map((k) => ({ rel: `run/${k.file}`, parse: k.parse })),
    ...KINDS.slice(0, 3).map((k) => ({ rel: `quiet/${k.file}`, parse: k.parse })),
    { rel: "table.csv", parse: parsePercentiles },
  ];
  for (const { rel, parse } of files) {
    it(rel, () => {
      const text = fixtureText(rel);
      const expected = bodyLines(text).join("\n") + "\n";
      expect(dumpDocument(parse(text, rel))).toBe(expected);
    });
  }
});
