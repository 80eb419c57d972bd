/** Minimap math: the viewport rect is the affine image of the visible world
 * region in minimap space; a click pans the view so the clicked content
 * point is centered. */

import type { Viewport } from './state.js';

export interface Rect {
  x: number;
  y: number;
  width: number;
  height: number;
}

export interface Point {
  x: number;
  y: number;
}

/** Uniform content-to-minimap scale (fit, preserving aspect ratio). */
export function minimapScale(content: Rect, mapWidth: number, mapHeight: number): number {
  if (content.width <= 0 || content.height <= 0) {
    throw new Error('degenerate content bounding box');
  }
  return Math.min(mapWidth / content.width, mapHeight / content.height);
}

/** World rectangle currently visible through the viewport. */
export function visibleWorldRect(viewport: Viewport): Rect {
  return {
    x: viewport.x,
    y: viewport.y,
    width: viewport.width / viewport.zoom,
    height: viewport.height / viewport.zoom,
  };
}

export function minimapRect(content: Rect, viewport: Viewport,
                            mapWidth: number, mapHeight: number): Rect {
  const s = minimapScale(content, mapWidth, mapHeight);
  const visible = visibleWorldRect(viewport);
  return {
    x: (visible.x - content.x) * s,
    y: (visible.y - content.y) * s,
    width: visible.width * s,
    height: visible.height * s,
  };
}

/** Map a click in minimap space back to the world point it covers. */
export function minimapPointToWorld(content: Rect, click: Point,
                                    mapWidth: number, mapHeight: number): Point {
  const s = minimapScale(content, mapWidth, mapHeight);
  return { x: content.x + click.x / s, y: content.y + click.y / s };
}

/** New pan that centers the clicked content point in the viewport. */
export function minimapClickToPan(content: Rect, click: Point, viewport: Viewport,
                                  mapWidth: number, mapHeight: number): Point {
  const world = minimapPointToWorld(content, click, mapWidth, mapHeight);
  return {
    x: world.x - viewport.width / (2 * viewport.zoom),
    y: world.y - viewport.height / (2 * viewport.zoom),
  };
}

/** Screen position of a world point under a viewport (for assertions and
 * hit testing). */
export function worldToScreen(world: Point, viewport: Viewport): Point {
  return {
    x: (world.x - viewport.x) * viewport.zoom,
    y: (world.y - viewport.y) * viewport.zoom,
  };
}
