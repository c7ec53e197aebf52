/** Sequential color scale (viridis control points, linear interpolation). */

const STOPS: Array<[number, number, number]> = [
  [68, 1, 84],
  [59, 82, 139],
  [33, 145, 140],
  [94, 201, 98],
  [253, 231, 37],
];

export function colorFor(t: number): string {
  const x = Math.min(Math.max(t, 0), 1) * (STOPS.length - 1);
  const i = Math.min(Math.floor(x), STOPS.length - 2);
  const f = x - i;
  const c = STOPS[i].map((v, k) => Math.round(v + f * (STOPS[i + 1][k] - v)));
  return `rgb(${c[0]},${c[1]},${c[2]})`;
}

export interface ScaleInfo {
  min: number;
  max: number;
  toColor(value: number): string;
}

export function makeScale(values: number[]): ScaleInfo {
  const min = Math.min(...values);
  const max = Math.max(...values);
  const span = max > min ? max - min : 1;
  return {
    min,
    max,
    toColor: (v: number) => colorFor((v - min) / span),
  };
}
