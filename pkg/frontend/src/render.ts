/*
Deterministic SVG panels for the four artifact kinds. Layout is a pure
function of the parsed document; numeric labels reuse the raw file tokens
so the figures never reinterpret the data.
*/

import {
  ConsistencyDocument,
  PercentilesDocument,
  ProjectionsDocument,
  TreeDocument,
  percentileCurves,
} from "./format.js";
import {
  MARGIN,
  PANEL_HEIGHT,
  PANEL_WIDTH,
  Panel,
  Scale,
  circleAt,
  crossAt,
  lineAt,
  linearScale,
  polyline,
  textAt,
  xAxis,
  yAxis,
} from "./svg.js";

const TRACE_STYLE = 'stroke="#1f77b4" stroke-width="1.4"';
const EPSILON_STYLE = 'stroke="#777" stroke-width="1.2" stroke-dasharray="5 3"';
const CROSS_STYLE = 'stroke="#c02020" stroke-width="1.4"';
const TREE_STYLE = 'stroke="#000" stroke-width="1.2"';

const PLOT_LEFT = MARGIN.left;
const PLOT_RIGHT = PANEL_WIDTH - MARGIN.right;
const PLOT_TOP = MARGIN.top;
const PLOT_BOTTOM = PANEL_HEIGHT - MARGIN.bottom;

function title(text: string): string {
  return textAt(PLOT_LEFT, 18, text, 12, 'font-weight="bold"');
}

function legend(entries: { draw: (x: number, y: number) => string; label: string }[]): string {
  const x = PLOT_RIGHT + 10;
  const parts: string[] = [];
  entries.forEach((entry, i) => {
    const y = PLOT_TOP + 10 + i * 18;
    parts.push(entry.draw(x, y));
    parts.push(textAt(x + 26, y + 4, entry.label, 11));
  });
  return parts.join("\n");
}

const lineMarker = (style: string) => (x: number, y: number) => lineAt(x, y, x + 20, y, style);
const crossMarker = (style: string) => (x: number, y: number) => crossAt(x + 10, y, 4, style);

export interface TreePlacement {
  id: number;
  depth: number;
  y: number;
  isLeaf: boolean;
}

export interface TreeLayout {
  placements: TreePlacement[];
  columns: number;
  leafCount: number;
}

/*
Branching-order layout: a node occupies one column per projection along
its path (root leftmost), every terminal runs to the right edge, and
siblings stack top to bottom in file order. Only the topology carries
meaning; times are not to scale.
*/
export function layoutTree(doc: TreeDocument): TreeLayout {
  const children: number[][] = doc.nodes.map(() => []);
  const depth: number[] = doc.nodes.map(() => 0);
  for (const node of doc.nodes) {
    if (node.parent !== null) {
      children[node.parent]!.push(node.id);
      depth[node.id] = depth[node.parent]! + 1;
    }
  }

  const y: number[] = doc.nodes.map(() => 0);
  let nextLeaf = 0;
  const assign = (id: number): number => {
    const kids = children[id]!;
    if (kids.length === 0) {
      y[id] = nextLeaf++;
    } else {
      const ys = kids.map(assign);
      y[id] = (ys[0]! + ys[ys.length - 1]!) / 2;
    }
    return y[id]!;
  };
  assign(0);

  const maxDepth = Math.max(...depth);
  return {
    placements: doc.nodes.map((node) => ({
      id: node.id,
      depth: depth[node.id]!,
      y: y[node.id]!,
      isLeaf: children[node.id]!.length === 0,
    })),
    columns: maxDepth + 1,
    leafCount: nextLeaf,
  };
}

export function renderTree(doc: TreeDocument): Panel {
  const layout = layoutTree(doc);
  const colW = (PLOT_RIGHT - PLOT_LEFT) / layout.columns;
  const rowH = (PLOT_BOTTOM - PLOT_TOP) / layout.leafCount;
  const X = (col: number) => PLOT_LEFT + col * colW;
  const Y = (row: number) => PLOT_TOP + (row + 0.5) * rowH;

  const children: number[][] = doc.nodes.map(() => []);
  for (const node of doc.nodes) {
    if (node.parent !== null) children[node.parent]!.push(node.id);
  }

  const parts: string[] = [
    title(
      `history tree  config=${doc.configHash}  d1=${doc.d1} d2=${doc.d2}  nodes=${doc.nodes.length}`,
    ),
  ];
  const labelSize = layout.leafCount > 24 ? 8 : 10;
  for (const place of layout.placements) {
    const node = doc.nodes[place.id]!;
    const x0 = X(place.depth);
    const x1 = place.isLeaf ? X(layout.columns) : X(place.depth + 1);
    const yy = Y(place.y);
    parts.push(lineAt(x0, yy, x1, yy, TREE_STYLE));
    const label = node.partition === null ? String(node.id) : node.partition.join("+");
    parts.push(textAt(x0 + 3, yy - 3, label, labelSize));
    if (place.isLeaf) {
      const probToken = doc.rows[place.id]![4]!;
      parts.push(textAt(x1 + 4, yy + 3, probToken, labelSize - 1));
    } else {
      const kids = children[place.id]!;
      const first = layout.placements[kids[0]!]!;
      const last = layout.placements[kids[kids.length - 1]!]!;
      parts.push(lineAt(x1, Y(first.y), x1, Y(last.y), TREE_STYLE));
    }
  }
  return { width: PANEL_WIDTH, height: PANEL_HEIGHT, body: parts.join("\n") };
}

function valueDomain(values: number[]): [number, number] {
  const hi = values.length > 0 ? Math.max(...values) : 0;
  return [0, hi > 0 ? hi * 1.05 : 1];
}

export function renderConsistency(doc: ConsistencyDocument): Panel {
  const steps = doc.steps;
  const tx = linearScale(
    steps.length > 0 ? [steps[0]!.t, steps[steps.length - 1]!.t] : [0, 1],
    [PLOT_LEFT, PLOT_RIGHT],
  );
  const finite = steps.filter((s) => s.minDhp !== null).map((s) => s.minDhp!);
  const ty = linearScale(valueDomain([...finite, ...steps.map((s) => s.epsilon)]), [
    PLOT_BOTTOM,
    PLOT_TOP,
  ]);

  const parts: string[] = [
    title(`consistency trace  config=${doc.configHash}  steps=${steps.length}`),
    xAxis(tx, PLOT_BOTTOM, "t"),
    yAxis(ty, PLOT_LEFT, "min DHP"),
  ];

  // Steps without a non-trivial extension have no statistic; the trace
  // breaks there rather than bridging the gap.
  let run: [number, number][] = [];
  const flush = () => {
    if (run.length >= 2) parts.push(polyline(run, TRACE_STYLE));
    else if (run.length === 1) parts.push(circleAt(run[0]![0], run[0]![1], 1.6, 'fill="#1f77b4"'));
    run = [];
  };
  for (const step of steps) {
    if (step.minDhp === null) flush();
    else run.push([tx.map(step.t), ty.map(step.minDhp)]);
  }
  flush();

  parts.push(polyline(steps.map((s) => [tx.map(s.t), ty.map(s.epsilon)]), EPSILON_STYLE));
  for (const step of steps) {
    if (step.projected) {
      parts.push(crossAt(tx.map(step.t), ty.map(step.minDhp ?? step.epsilon), 4, CROSS_STYLE));
    }
  }

  parts.push(
    legend([
      { draw: lineMarker(TRACE_STYLE), label: "min DHP" },
      { draw: lineMarker(EPSILON_STYLE), label: "epsilon" },
      { draw: crossMarker(CROSS_STYLE), label: "projection" },
    ]),
  );
  return { width: PANEL_WIDTH, height: PANEL_HEIGHT, body: parts.join("\n") };
}

export function renderProjections(doc: ProjectionsDocument): Panel {
  const events = doc.events;
  const tx = linearScale(
    events.length > 0 ? [events[0]!.t, events[events.length - 1]!.t] : [0, 1],
    [PLOT_LEFT, PLOT_RIGHT],
  );
  const ty = linearScale(
    valueDomain(events.flatMap((e) => [e.dhp, e.epsilon])),
    [PLOT_BOTTOM, PLOT_TOP],
  );

  const parts: string[] = [
    title(`projections  config=${doc.configHash}  events=${events.length}`),
    xAxis(tx, PLOT_BOTTOM, "t"),
    yAxis(ty, PLOT_LEFT, "DHP at projection"),
  ];
  if (events.length === 0) {
    parts.push(
      textAt((PLOT_LEFT + PLOT_RIGHT) / 2, (PLOT_TOP + PLOT_BOTTOM) / 2, "no projections", 12, 'text-anchor="middle"'),
    );
  } else {
    parts.push(polyline(events.map((e) => [tx.map(e.t), ty.map(e.epsilon)]), EPSILON_STYLE));
    for (const event of events) {
      parts.push(crossAt(tx.map(event.t), ty.map(event.dhp), 4, CROSS_STYLE));
    }
    parts.push(
      legend([
        { draw: crossMarker(CROSS_STYLE), label: "DHP" },
        { draw: lineMarker(EPSILON_STYLE), label: "epsilon" },
      ]),
    );
  }
  return { width: PANEL_WIDTH, height: PANEL_HEIGHT, body: parts.join("\n") };
}

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#e377c2", "#17becf"];

export function renderPercentiles(doc: PercentilesDocument): Panel {
  const curves = percentileCurves(doc);
  const tx = linearScale(
    [doc.kValues[0]!, doc.kValues[doc.kValues.length - 1]!],
    [PLOT_LEFT, PLOT_RIGHT],
  );
  const ty = linearScale(valueDomain(doc.cells.map((c) => c.epsilon)), [PLOT_BOTTOM, PLOT_TOP]);

  const parts: string[] = [
    title(
      `percentiles  config=${doc.configHash}  d1=${doc.d1} d2=${doc.d2}  kind=${doc.kind}`,
    ),
    xAxis(tx, PLOT_BOTTOM, "k"),
    yAxis(ty, PLOT_LEFT, "epsilon"),
  ];
  curves.forEach((curve, i) => {
    const color = PALETTE[i % PALETTE.length]!;
    const pts: [number, number][] = curve.points.map((pt) => [tx.map(pt.k), ty.map(pt.epsilon)]);
    if (pts.length >= 2) parts.push(polyline(pts, `stroke="${color}" stroke-width="1.4"`));
    for (const [x, y] of pts) parts.push(circleAt(x, y, 2, `fill="${color}"`));
    const last = pts[pts.length - 1]!;
    parts.push(textAt(last[0] + 6, last[1] + 4, `p=${curve.pToken}`, 10, `fill="${color}"`));
  });
  return { width: PANEL_WIDTH, height: PANEL_HEIGHT, body: parts.join("\n") };
}
