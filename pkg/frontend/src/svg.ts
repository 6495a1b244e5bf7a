/** Minimal SVG document builder: plain string assembly, no DOM. */

export type Attrs = Record<string, string | number>;

export function el(tag: string, attrs: Attrs = {}, children: string[] | string = []): string {
  const attrText = Object.entries(attrs)
    .map(([k, v]) => `${k}="${String(v)}"`)
    .join(" ");
  const body = Array.isArray(children) ? children.join("") : children;
  return body.length > 0
    ? `<${tag}${attrText ? " " + attrText : ""}>${body}</${tag}>`
    : `<${tag}${attrText ? " " + attrText : ""}/>`;
}

export function text(x: number, y: number, value: string, attrs: Attrs = {}): string {
  const esc = value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;");
  return el("text", { x, y, "font-family": "sans-serif", ...attrs }, esc);
}

export function document(width: number, height: number, children: string[]): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}">` +
    el("rect", { x: 0, y: 0, width, height, fill: "white" }) +
    children.join("") +
    "</svg>"
  );
}

/** Linear scale mapping [d0, d1] to [r0, r1]. */
export function scale(d0: number, d1: number, r0: number, r1: number): (v: number) => number {
  const span = d1 - d0 || 1;
  return (v: number) => r0 + ((v - d0) / span) * (r1 - r0);
}

const VIRIDIS: [number, number, number][] = [
  [68, 1, 84],
  [71, 44, 122],
  [59, 81, 139],
  [44, 113, 142],
  [33, 144, 141],
  [39, 173, 129],
  [92, 200, 99],
  [170, 220, 50],
  [253, 231, 37],
];

/** Viridis-style color ramp for t in [0, 1]. */
export function viridis(t: number): string {
  const clamped = Math.min(1, Math.max(0, t));
  const pos = clamped * (VIRIDIS.length - 1);
  const i = Math.min(Math.floor(pos), VIRIDIS.length - 2);
  const f = pos - i;
  const mix = VIRIDIS[i].map((a, k) => Math.round(a + f * (VIRIDIS[i + 1][k] - a)));
  return `rgb(${mix[0]},${mix[1]},${mix[2]})`;
}

export const SERIES_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
