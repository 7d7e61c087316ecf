import type { Point } from "./types.js";

/**
 * View transform between image space and canvas space.
 * Coordinates are always STORED in image space; the canvas is a view.
 *   canvas = image * scale + offset
 */
export interface ViewTransform {
  scale: number;
  offsetX: number;
  offsetY: number;
}

export const identityView: ViewTransform = { scale: 1, offsetX: 0, offsetY: 0 };

export function imageToCanvas(p: Point, vt: ViewTransform): Point {
  return { x: p.x * vt.scale + vt.offsetX, y: p.y * vt.scale + vt.offsetY };
}

export function canvasToImage(p: Point, vt: ViewTransform): Point {
  return { x: (p.x - vt.offsetX) / vt.scale, y: (p.y - vt.offsetY) / vt.scale };
}

/** Zoom by `factor` keeping the given canvas point fixed on screen. */
export function zoomAt(vt: ViewTransform, canvasPoint: Point, factor: number): ViewTransform {
  const scale = vt.scale * factor;
  return {
    scale,
    offsetX: canvasPoint.x - (canvasPoint.x - vt.offsetX) * factor,
    offsetY: canvasPoint.y - (canvasPoint.y - vt.offsetY) * factor,
  };
}

export function pan(vt: ViewTransform, dx: number, dy: number): ViewTransform {
  return { scale: vt.scale, offsetX: vt.offsetX + dx, offsetY: vt.offsetY + dy };
}

/** Fit an image into a canvas, centered, preserving aspect ratio. */
export function fitView(imageW: number, imageH: number, canvasW: number, canvasH: number): ViewTransform {
  const scale = Math.min(canvasW / imageW, canvasH / imageH);
  return {
    scale,
    offsetX: (canvasW - imageW * scale) / 2,
    offsetY: (canvasH - imageH * scale) / 2,
  };
}

/** Clamp an image-space point to the image rectangle [0, W-1] x [0, H-1]. */
export function clampToImage(p: Point, width: number, height: number): Point {
  return {
    x: Math.min(Math.max(p.x, 0), width - 1),
    y: Math.min(Math.max(p.y, 0), height - 1),
  };
}
