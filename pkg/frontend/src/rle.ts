import type { RleMask } from "./types.js";

/** Decode alternating background/foreground run lengths into a flat mask. */
export function decodeRle(mask: RleMask): Uint8Array {
  const { width, height, rle } = mask;
  const total = width * height;
  const out = new Uint8Array(total);
  let pos = 0;
  let fg = false;
  for (const run of rle) {
    if (run < 0) throw new Error(`negative run length ${run}`);
    if (fg) out.fill(1, pos, pos + run);
    pos += run;
    fg = !fg;
  }
  if (pos !== total) {
    throw new Error(`RLE covers ${pos} pixels, expected ${total}`);
  }
  return out;
}

/** Inverse of {@link decodeRle}; first run is background by convention. */
export function encodeRle(grid: Uint8Array, width: number, height: number): RleMask {
  if (grid.length !== width * height) {
    throw new Error(`grid has ${grid.length} pixels, expected ${width * height}`);
  }
  const rle: number[] = [];
  let run = 0;
  let current = 0; // background first: a leading foreground pixel yields a zero-length run
  for (let i = 0; i < grid.length; i++) {
    const v = grid[i] === 0 ? 0 : 1;
    if (v === current) {
      run++;
    } else {
      rle.push(run);
      current = v;
      run = 1;
    }
  }
  rle.push(run);
  return { width, height, rle };
}
