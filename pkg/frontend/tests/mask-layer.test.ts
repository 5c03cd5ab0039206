import { describe, expect, it } from "vitest";

import { MaskLayer } from "../src/mask-layer.js";

describe("MaskLayer painting", () => {
  it("paints a disk of the brush radius", () => {
    const layer = new MaskLayer("EX", 16, 16);
    layer.paint({ points: [{ x: 8, y: 8 }], radius: 2 });
    expect(layer.get(8, 8)).toBe(true);
    expect(layer.get(8, 10)).toBe(true);
    expect(layer.get(8, 11)).toBe(false);
    expect(layer.get(10, 10)).toBe(false); // corner outside the disk
  });

  it("interpolates along fast strokes", () => {
    const layer = new MaskLayer("EX", 32, 8);
    layer.paint({ points: [{ x: 2, y: 4 }, { x: 29, y: 4 }], radius: 1 });
    for (let x = 2; x <= 29; x++) expect(layer.get(x, 4)).toBe(true);
  });

  it("clips strokes to the canvas", () => {
    const layer = new MaskLayer("MA", 8, 8);
    layer.paint({ points: [{ x: -5, y: 3 }, { x: 12, y: 3 }], radius: 2 });
    expect(layer.get(0, 3)).toBe(true);
    expect(layer.get(7, 3)).toBe(true);
    expect(layer.pixelCount()).toBeGreaterThan(0);
  });

  it("erase on an empty layer is a no-op on pixels", () => {
    const layer = new MaskLayer("HA", 8, 8);
    layer.erase({ points: [{ x: 4, y: 4 }], radius: 3 });
    expect(layer.isEmpty()).toBe(true);
  });
});

describe("MaskLayer undo/redo", () => {
  it("paint then undo restores the previous state exactly", () => {
    const layer = new MaskLayer("EX", 16, 16);
    layer.paint({ points: [{ x: 3, y: 3 }], radius: 1 });
    const before = layer.grid.slice();
    layer.paint({ points: [{ x: 10, y: 10 }], radius: 2 });
    expect(layer.undo()).toBe(true);
    expect(layer.grid).toEqual(before);
  });

  it("undo and redo are exact inverses", () => {
    const layer = new MaskLayer("SE", 12, 12);
    layer.paint({ points: [{ x: 2, y: 2 }], radius: 1 });
    layer.paint({ points: [{ x: 9, y: 9 }], radius: 1 });
    const after = layer.grid.slice();
    layer.undo();
    layer.redo();
    expect(layer.grid).toEqual(after);
  });

  it("supports at least 20 undo steps", () => {
    const layer = new MaskLayer("EX", 64, 1);
    const snapshots: Uint8Array[] = [layer.grid.slice()];
    for (let i = 0; i < 20; i++) {
      layer.paint({ points: [{ x: i * 3, y: 0 }], radius: 0 });
      snapshots.push(layer.grid.slice());
    }
    for (let i = 19; i >= 0; i--) {
      expect(layer.undo()).toBe(true);
      expect(layer.grid).toEqual(snapshots[i]);
    }
  });

  it("a new stroke clears the redo branch", () => {
    const layer = new MaskLayer("EX", 8, 8);
    layer.paint({ points: [{ x: 1, y: 1 }], radius: 0 });
    layer.undo();
    layer.paint({ points: [{ x: 5, y: 5 }], radius: 0 });
    expect(layer.canRedo()).toBe(false);
  });

  it("loading a suggestion is undoable and marks the layer", () => {
    const layer = new MaskLayer("EX", 4, 4);
    const suggestion = new Uint8Array(16);
    suggestion[5] = 1;
    layer.load(suggestion, true);
    expect(layer.suggested).toBe(true);
    expect(layer.dirty).toBe(false);
    layer.paint({ points: [{ x: 0, y: 0 }], radius: 0 });
    expect(layer.suggested).toBe(false);
    expect(layer.dirty).toBe(true);
    layer.undo();
    expect(layer.get(1, 1)).toBe(true);
    expect(layer.get(0, 0)).toBe(false);
  });
});
