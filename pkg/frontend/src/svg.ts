/* Minimal hand-rolled SVG output: scales, ticks, axes, markers. */

export const PANEL_WIDTH = 880;
export const PANEL_HEIGHT = 520;
export const MARGIN = { left: 68, right: 130, top: 34, bottom: 50 };

export interface Scale {
  map: (x: number) => number;
  domain: [number, number];
  range: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  let [lo, hi] = domain;
  if (lo === hi) {
    // Degenerate domains come from single-row inputs; widen symmetrically.
    const pad = lo === 0 ? 1 : Math.abs(lo) * 0.5;
    lo -= pad;
    hi += pad;
  }
  const slope = (range[1] - range[0]) / (hi - lo);
  return {
    map: (x: number) => range[0] + (x - lo) * slope,
    domain: [lo, hi],
    range,
  };
}

function tickStep(span: number, count: number): number {
  const raw = span / Math.max(1, count);
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const r = raw / mag;
  if (r >= 5) return 10 * mag;
  if (r >= 2) return 5 * mag;
  return mag;
}

export function ticks(scale: Scale, count = 6): number[] {
  const [lo, hi] = scale.domain;
  const step = tickStep(hi - lo, count);
  const out: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) {
    // Snap to the grid to avoid 0.30000000000000004-style labels.
    out.push(Number((Math.round(v / step) * step).toPrecision(12)));
  }
  return out;
}

export function fmtTick(x: number): string {
  if (x === 0) return "0";
  return String(Number(x.toPrecision(6)));
}

export function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

const px = (x: number): string => {
  const s = x.toFixed(2);
  return s === "-0.00" ? "0.00" : s;
};

export function lineAt(x1: number, y1: number, x2: number, y2: number, style: string): string {
  return `<line x1="${px(x1)}" y1="${px(y1)}" x2="${px(x2)}" y2="${px(y2)}" ${style}/>`;
}

export function polyline(points: [number, number][], style: string): string {
  const attr = points.map(([x, y]) => `${px(x)},${px(y)}`).join(" ");
  return `<polyline points="${attr}" fill="none" ${style}/>`;
}

export function circleAt(x: number, y: number, r: number, style: string): string {
  return `<circle cx="${px(x)}" cy="${px(y)}" r="${px(r)}" ${style}/>`;
}

export function crossAt(x: number, y: number, arm: number, style: string): string {
  return (
    lineAt(x - arm, y - arm, x + arm, y + arm, style) +
    lineAt(x - arm, y + arm, x + arm, y - arm, style)
  );
}

export function textAt(
  x: number,
  y: number,
  content: string,
  size: number,
  extra = "",
): string {
  return `<text x="${px(x)}" y="${px(y)}" font-size="${size}" font-family="monospace"${extra ? " " + extra : ""}>${esc(content)}</text>`;
}

const AXIS_STYLE = 'stroke="#000" stroke-width="1"';

export function xAxis(scale: Scale, y: number, label: string): string {
  const parts: string[] = [lineAt(scale.range[0], y, scale.range[1], y, AXIS_STYLE)];
  for (const v of ticks(scale)) {
    const x = scale.map(v);
    parts.push(lineAt(x, y, x, y + 5, AXIS_STYLE));
    parts.push(textAt(x, y + 18, fmtTick(v), 11, 'text-anchor="middle"'));
  }
  const mid = (scale.range[0] + scale.range[1]) / 2;
  parts.push(textAt(mid, y + 36, label, 12, 'text-anchor="middle"'));
  return parts.join("\n");
}

export function yAxis(scale: Scale, x: number, label: string): string {
  const parts: string[] = [lineAt(x, scale.range[0], x, scale.range[1], AXIS_STYLE)];
  for (const v of ticks(scale)) {
    const y = scale.map(v);
    parts.push(lineAt(x - 5, y, x, y, AXIS_STYLE));
    parts.push(textAt(x - 8, y + 4, fmtTick(v), 11, 'text-anchor="end"'));
  }
  const midY = (scale.range[0] + scale.range[1]) / 2;
  parts.push(
    `<text x="${px(x - 52)}" y="${px(midY)}" font-size="12" font-family="monospace" text-anchor="middle" transform="rotate(-90 ${px(x - 52)} ${px(midY)})">${esc(label)}</text>`,
  );
  return parts.join("\n");
}

export interface Panel {
  width: number;
  height: number;
  body: string;
}

// Panels stack vertically into one document; a single panel is the common case.
export function svgDocument(panels: Panel[]): string {
  const width = Math.max(...panels.map((p) => p.width));
  const height = panels.reduce((sum, p) => sum + p.height, 0);
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
    `<rect x="0" y="0" width="${width}" height="${height}" fill="#fff"/>`,
  ];
  let offset = 0;
  for (const panel of panels) {
    parts.push(offset === 0 ? "<g>" : `<g transform="translate(0 ${offset})">`);
    parts.push(panel.body);
    parts.push("</g>");
    offset += panel.height;
  }
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
