import { describe, expect, it } from "vitest";

import { decodeRle, encodeRle } from "../src/rle.js";

function randomGrid(n: number, p: number, seed: number): Uint8Array {
  // xorshift so the test is reproducible without a dependency
  let state = seed || 1;
  const grid = new Uint8Array(n);
  for (let i = 0; i < n; i++) {
    state ^= state << 13;
    state ^= state >>> 17;
    state ^= state << 5;
    grid[i] = (state >>> 0) / 0xffffffff < p ? 1 : 0;
  }
  return grid;
}

describe("run-length mask codec", () => {
  it("round-trips random grids", () => {
    for (let seed = 1; seed <= 25; seed++) {
      const width = 1 + (seed % 13);
      const height = 1 + ((seed * 7) % 11);
      const grid = randomGrid(width * height, (seed % 9) / 10, seed);
      const decoded = decodeRle(encodeRle(grid, width, height));
      expect(decoded).toEqual(grid);
    }
  });

  it("encodes background-first with a zero run for leading foreground", () => {
    const grid = Uint8Array.from([1, 1, 0]);
    expect(encodeRle(grid, 3, 1).rle).toEqual([0, 2, 1]);
  });

  it("encodes all-background as a single run", () => {
    expect(encodeRle(new Uint8Array(6), 3, 2).rle).toEqual([6]);
  });

  it("rejects coverage mismatches", () => {
    expect(() => decodeRle({ width: 2, height: 2, rle: [3] })).toThrow(/covers/);
    expect(() => encodeRle(new Uint8Array(3), 2, 2)).toThrow(/expected/);
  });
});
