/** Static export: serialize the current interactive view to a standalone
 * vector graphic, which is what the interactive/static toggle downloads. */

import type { DownloadSink } from "./compare.js";
import { browserDownload } from "./compare.js";

export function svgMarkup(svg: SVGSVGElement): string {
  const clone = svg.cloneNode(true) as SVGSVGElement;
  clone.setAttribute("xmlns", "http://www.w3.org/2000/svg");
  return new XMLSerializer().serializeToString(clone);
}

export function exportSvg(
  svg: SVGSVGElement,
  filename: string,
  sink: DownloadSink = browserDownload,
): string {
  const markup = svgMarkup(svg);
  sink(filename, markup, "image/svg+xml");
  return markup;
}
