#!/usr/bin/env node
/*
plot <kind> <input...> -o <image>
plot <kind> <input...> --dump

Kinds: tree, consistency, projections, percentiles. Inputs are the
artifact files a selection run writes; several inputs of the same kind
stack as panels in one SVG. --dump prints the parsed numbers instead of
rendering. Exit codes: 0 on success, 1 on usage or input errors.
*/

import { readFileSync, writeFileSync } from "node:fs";
import { dumpDocument } from "./dump.js";
import {
  parseConsistency,
  parsePercentiles,
  parseProjections,
  parseTree,
} from "./format.js";
import {
  renderConsistency,
  renderPercentiles,
  renderProjections,
  renderTree,
} from "./render.js";
import { Panel, svgDocument } from "./svg.js";

const USAGE = `usage: plot <kind> <input...> -o <image>
       plot <kind> <input...> --dump
kinds: tree consistency projections percentiles`;

interface KindHandler {
  parse: (text: string, path: string) => { header: string; rows: string[][] };
  render: (doc: any) => Panel;
}

const KINDS: Record<string, KindHandler> = {
  tree: { parse: parseTree, render: renderTree },
  consistency: { parse: parseConsistency, render: renderConsistency },
  projections: { parse: parseProjections, render: renderProjections },
  percentiles: { parse: parsePercentiles, render: renderPercentiles },
};

interface Request {
  kind: string;
  inputs: string[];
  out: string | null;
  dump: boolean;
}

function parseArgs(argv: string[]): Request | "help" {
  const positional: string[] = [];
  let out: string | null = null;
  let dump = false;
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i]!;
    if (arg === "-h" || arg === "--help") return "help";
    if (arg === "-o" || arg === "--out") {
      const value = argv[++i];
      if (value === undefined) throw new Error(`${arg} needs a path`);
      out = value;
    } else if (arg === "--dump") {
      dump = true;
    } else if (arg.startsWith("-")) {
      throw new Error(`unknown flag ${arg}`);
    } else {
      positional.push(arg);
    }
  }
  const kind = positional.shift();
  if (kind === undefined) throw new Error("missing figure kind");
  if (!(kind in KINDS)) throw new Error(`unknown figure kind "${kind}"`);
  if (positional.length === 0) throw new Error("missing input file");
  if (dump && out !== null) throw new Error("--dump does not take -o");
  if (!dump && out === null) throw new Error("need -o <image> or --dump");
  return { kind, inputs: positional, out, dump };
}

export function main(argv: string[]): number {
  let request: Request | "help";
  try {
    request = parseArgs(argv);
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n${USAGE}\n`);
    return 1;
  }
  if (request === "help") {
    process.stdout.write(USAGE + "\n");
    return 0;
  }

  const handler = KINDS[request.kind]!;
  try {
    const docs = request.inputs.map((path) =>
      handler.parse(readFileSync(path, "utf8"), path),
    );
    if (request.dump) {
      for (const doc of docs) process.stdout.write(dumpDocument(doc));
    } else {
      const panels = docs.map((doc) => handler.render(doc));
      writeFileSync(request.out!, svgDocument(panels));
      process.stdout.write(`wrote ${request.out} (${request.kind}, ${docs.length} panel${docs.length === 1 ? "" : "s"})\n`);
    }
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 1;
  }
  return 0;
}

process.exit(main(process.argv.slice(2)));
