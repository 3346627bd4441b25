/** Raster payload -> SVG choropleth with transparent missing cells. */

import { suitabilityColor } from "./scale.js";
import type { RasterGrid } from "./types.js";

const esc = (s: string) =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");

export interface RasterStats {
  cells: number;
  missing: number;
  min: number | null;
  max: number | null;
}

export function rasterStats(grid: RasterGrid): RasterStats {
  let missing = 0;
  let min: number | null = null;
  let max: number | null = null;
  for (const row of grid.values) {
    for (const v of row) {
      if (v === null) {
        missing += 1;
        continue;
      }
      min = min === null || v < min ? v : min;
      max = max === null || v > max ? v : max;
    }
  }
  return { cells: grid.n_rows * grid.n_cols, missing, min, max };
}

/** Tooltip-friendly cell lookup: center coordinates of (row, col). */
export function cellCenter(grid: RasterGrid, row: number, col: number): [number, number] {
  const lon = grid.x_ll + (col + 0.5) * grid.cell_size;
  const lat = grid.y_ll + (grid.n_rows - row - 0.5) * grid.cell_size;
  return [lon, lat];
}

/**
 * Render the grid as one SVG rect per observed cell. Values are colored
 * on the fixed [0, 1] probability scale; missing cells are simply not
 * drawn, leaving the background visible.
 */
export function renderRasterSvg(grid: RasterGrid, cellPx = 24): string {
  const width = grid.n_cols * cellPx;
  const height = grid.n_rows * cellPx;
  const rects: string[] = [];
  for (let r = 0; r < grid.n_rows; r++) {
    for (let c = 0; c < grid.n_cols; c++) {
      const v = grid.values[r][c];
      if (v === null) continue;
      const [lon, lat] = cellCenter(grid, r, c);
      const title = `(${lon.toFixed(3)}, ${lat.toFixed(3)}) = ${v.toFixed(4)}`;
      rects.push(
        `<rect x="${c * cellPx}" y="${r * cellPx}" width="${cellPx}" height="${cellPx}"` +
          ` fill="${suitabilityColor(v)}" data-row="${r}" data-col="${c}" data-value="${v}">` +
          `<title>${esc(title)}</title></rect>`,
      );
    }
  }
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" class="raster" viewBox="0 0 ${width} ${height}"` +
    ` width="${width}" height="${height}" role="img">` +
    `<rect width="${width}" height="${height}" fill="#e8eaed"/>` +
    rects.join("") +
    `</svg>`
  );
}

/** Horizontal legend for the fixed probability colormap. */
export function renderLegendSvg(steps = 64, width = 240, height = 14): string {
  const bars: string[] = [];
  for (let i = 0; i < steps; i++) {
    const x = (i / steps) * width;
    bars.push(
      `<rect x="${x}" y="0" width="${width / steps + 0.5}" height="${height}"` +
        ` fill="${suitabilityColor(i / (steps - 1))}"/>`,
    );
  }
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height + 14}" width="${width}">` +
    bars.join("") +
    `<text x="0" y="${height + 11}" font-size="10">0</text>` +
    `<text x="${width - 8}" y="${height + 11}" font-size="10">1</text>` +
    `</svg>`
  );
}
