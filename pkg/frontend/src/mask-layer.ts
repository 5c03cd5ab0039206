import type { Lesion, Stroke } from "./types.js";

const HISTORY_LIMIT = 50; // undo depth; the tool guarantees at least 20

/**
 * One lesion's editable pixel mask with snapshot-based undo/redo.
 *
 * Pixels are 0/1 in a row-major Uint8Array sized exactly like the image.
 * Every completed stroke (or bulk load) pushes one history entry; undo and
 * redo restore full snapshots, so they are exact inverses.
 */
export class MaskLayer {
  readonly lesion: Lesion;
  readonly width: number;
  readonly height: number;
  grid: Uint8Array;
  confidence: number | null = null;
  dirty = false;
  /** Prefilled from a machine suggestion and not yet touched by the user. */
  suggested = false;
  visible = true;

  private undoStack: Uint8Array[] = [];
  private redoStack: Uint8Array[] = [];

  constructor(lesion: Lesion, width: number, height: number) {
    if (width < 1 || height < 1) throw new Error("layer dimensions must be >= 1");
    this.lesion = lesion;
    this.width = width;
    this.height = height;
    this.grid = new Uint8Array(width * height);
  }

  isEmpty(): boolean {
    return !this.grid.some((v) => v !== 0);
  }

  pixelCount(): number {
    let n = 0;
    for (let i = 0; i < this.grid.length; i++) if (this.grid[i]) n++;
    return n;
  }

  get(x: number, y: number): boolean {
    return this.inBounds(x, y) && this.grid[y * this.width + x] !== 0;
  }

  private inBounds(x: number, y: number): boolean {
    return x >= 0 && x < this.width && y >= 0 && y < this.height;
  }

  private checkpoint(): void {
    this.undoStack.push(this.grid.slice());
    if (this.undoStack.length > HISTORY_LIMIT) this.undoStack.shift();
    this.redoStack = [];
  }

  /** Replace the whole grid (suggestion load, server reload). */
  load(grid: Uint8Array, suggested = false): void {
    if (grid.length !== this.grid.length) {
      throw new Error(`grid has ${grid.length} pixels, layer needs ${this.grid.length}`);
    }
    this.checkpoint();
    this.grid = grid.slice();
    this.suggested = suggested;
    this.dirty = !suggested;
  }

  private stampDisk(cx: number, cy: number, radius: number, value: 0 | 1): void {
    const r = Math.max(0, Math.floor(radius));
    const x0 = Math.max(0, cx - r);
    const x1 = Math.min(this.width - 1, cx + r);
    const y0 = Math.max(0, cy - r);
    const y1 = Math.min(this.height - 1, cy + r);
    for (let y = y0; y <= y1; y++) {
      for (let x = x0; x <= x1; x++) {
        const dx = x - cx;
        const dy = y - cy;
        if (dx * dx + dy * dy <= r * r) this.grid[y * this.width + x] = value;
      }
    }
  }

  private applyStroke(stroke: Stroke, value: 0 | 1): void {
    if (stroke.points.length === 0) return;
    this.checkpoint();
    let prev = stroke.points[0];
    this.stampDisk(Math.round(prev.x), Math.round(prev.y), stroke.radius, value);
    for (const point of stroke.points.slice(1)) {
      // walk the segment so fast strokes leave no gaps
      const steps = Math.max(1, Math.ceil(Math.hypot(point.x - prev.x, point.y - prev.y)));
      for (let s = 1; s <= steps; s++) {
        const x = Math.round(prev.x + ((point.x - prev.x) * s) / steps);
        const y = Math.round(prev.y + ((point.y - prev.y) * s) / steps);
        this.stampDisk(x, y, stroke.radius, value);
      }
      prev = point;
    }
    this.suggested = false;
    this.dirty = true;
  }

  paint(stroke: Stroke): void {
    this.applyStroke(stroke, 1);
  }

  erase(stroke: Stroke): void {
    this.applyStroke(stroke, 0);
  }

  canUndo(): boolean {
    return this.undoStack.length > 0;
  }

  canRedo(): boolean {
    return this.redoStack.length > 0;
  }

  undo(): boolean {
    const snapshot = this.undoStack.pop();
    if (!snapshot) return false;
    this.redoStack.push(this.grid);
    this.grid = snapshot;
    this.dirty = true;
    return true;
  }

  redo(): boolean {
    const snapshot = this.redoStack.pop();
    if (!snapshot) return false;
    this.undoStack.push(this.grid);
    this.grid = snapshot;
    this.dirty = true;
    return true;
  }
}
