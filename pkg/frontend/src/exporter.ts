/** Chart export: serialize a rendered SVG or rasterize it to PNG. */

export function svgBlob(svgMarkup: string): Blob {
  return new Blob([svgMarkup], { type: "image/svg+xml;charset=utf-8" });
}

export function download(blob: Blob, filename: string): void {
  const url = URL.createObjectURL(blob);
  const a = document.createElement("a");
  a.href = url;
  a.download = filename;
  a.click();
  setTimeout(() => URL.revokeObjectURL(url), 1000);
}

/** Rasterize via an offscreen canvas; browser-only (needs Image/canvas). */
export async function svgToPngBlob(svgMarkup: string, scale = 2): Promise<Blob> {
  const svgUrl = URL.createObjectURL(svgBlob(svgMarkup));
  try {
    const image = new Image();
    await new Promise<void>((resolve, reject) => {
      image.onload = () => resolve();
      image.onerror = () => reject(new Error("could not decode SVG"));
      image.src = svgUrl;
    });
    const canvas = document.createElement("canvas");
    canvas.width = image.width * scale;
    canvas.height = image.height * scale;
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("canvas 2d context unavailable");
    ctx.scale(scale, scale);
    ctx.drawImage(image, 0, 0);
    return await new Promise<Blob>((resolve, reject) =>
      canvas.toBlob((b) => (b ? resolve(b) : reject(new Error("PNG encode failed"))), "image/png"),
    );
  } finally {
    URL.revokeObjectURL(svgUrl);
  }
}

/** Wrap a chart with the export toolbar used by every panel. */
export function exportableChart(svgMarkup: string, baseName: string): HTMLElement {
  const wrap = document.createElement("div");
  wrap.className = "chart-wrap";
  wrap.innerHTML = svgMarkup;
  const bar = document.createElement("div");
  bar.className = "chart-toolbar";
  const svgButton = document.createElement("button");
  svgButton.textContent = "SVG";
  svgButton.onclick = () => download(svgBlob(svgMarkup), `${baseName}.svg`);
  const pngButton = document.createElement("button");
  pngButton.textContent = "PNG";
  pngButton.onclick = () =>
    svgToPngBlob(svgMarkup).then((blob) => download(blob, `${baseName}.png`));
  bar.append(svgButton, pngButton);
  wrap.appendChild(bar);
  return wrap;
}
