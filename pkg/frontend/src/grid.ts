/** Placement of the four clouds and of the words inside each cloud. */

import { CloudEntry, CloudView } from "./types.js";

/** CSS grid-area for a cloud; the server's row/col are 0-based. */
export function gridArea(view: CloudView): string {
  return `${view.row + 1} / ${view.col + 1}`;
}

export const MIN_FONT_PX = 12;
export const MAX_FONT_PX = 34;

/** Font size linear in the server-side weight (relative frequency). */
export function fontSize(
  weight: number,
  minPx: number = MIN_FONT_PX,
  maxPx: number = MAX_FONT_PX,
): number {
  const w = Math.min(1, Math.max(0, weight));
  return minPx + (maxPx - minPx) * w;
}

export interface PlacedWord {
  term: string;
  size: number;
  /** center of the word's box, relative to the cloud's top-left corner */
  x: number;
  y: number;
}

interface Box {
  x: number;
  y: number;
  w: number;
  h: number;
}

function boxFor(term: string, size: number, x: number, y: number): Box {
  // crude glyph metrics; close enough for collision avoidance
  return { x, y, w: 0.6 * size * term.length, h: 1.2 * size };
}

function overlaps(a: Box, b: Box): boolean {
  return (
    Math.abs(a.x - b.x) * 2 < a.w + b.w && Math.abs(a.y - b.y) * 2 < a.h + b.h
  );
}

function inside(box: Box, width: number, height: number): boolean {
  return (
    box.x - box.w / 2 >= 0 &&
    box.y - box.h / 2 >= 0 &&
    box.x + box.w / 2 <= width &&
    box.y + box.h / 2 <= height
  );
}

/**
 * Deterministic word layout: biggest words first (the entries arrive
 * sorted by frequency), each walking an Archimedean spiral from the
 * center until it collides with nothing. Words that cannot fit are
 * dropped rather than overlapped.
 */
export function layoutCloud(
  entries: CloudEntry[],
  width: number,
  height: number,
): PlacedWord[] {
  const placed: PlacedWord[] = [];
  const boxes: Box[] = [];
  const cx = width / 2;
  const cy = height / 2;
  for (const entry of entries) {
    const size = fontSize(entry.weight);
    for (let t = 0; t < 400; t += 1) {
      const angle = 0.35 * t;
      const radius = 1.2 * angle;
      const box = boxFor(
        entry.term,
        size,
        cx + radius * Math.cos(angle),
        cy + radius * Math.sin(angle),
      );
      if (!inside(box, width, height)) continue;
      if (boxes.some((other) => overlaps(box, other))) continue;
      boxes.push(box);
      placed.push({ term: entry.term, size, x: box.x, y: box.y });
      break;
    }
  }
  return placed;
}
