import type { MaskService } from "./api.js";
import { MaskLayer } from "./mask-layer.js";
import { decodeRle, encodeRle } from "./rle.js";
import { LESIONS, type Lesion, type RleMask } from "./types.js";

export interface SubmitResult {
  submitted: Lesion[];
  skippedEmpty: Lesion[];
}

/**
 * Editing state for one image: four mask layers, an active lesion, and
 * per-layer confidence. Suggestions prefill layers but stay visually
 * distinguished (``suggested``) until the first edit.
 */
export class CanvasSession {
  readonly imageId: string;
  readonly width: number;
  readonly height: number;
  readonly layers: Record<Lesion, MaskLayer>;
  activeLesion: Lesion = "EX";
  /** Lesions whose suggestion fetch came back 409 (notice for the UI). */
  readonly missingSuggestions: Lesion[] = [];

  constructor(imageId: string, width: number, height: number) {
    this.imageId = imageId;
    this.width = width;
    this.height = height;
    this.layers = Object.fromEntries(
      LESIONS.map((lesion) => [lesion, new MaskLayer(lesion, width, height)]),
    ) as Record<Lesion, MaskLayer>;
  }

  get activeLayer(): MaskLayer {
    return this.layers[this.activeLesion];
  }

  /**
   * Prefill layers from the service's post-processed suggestion masks.
   * ``decodeSuggestionPng`` turns PNG bytes into a 0/1 grid (canvas-based
   * in the browser, pure decoder in tests); 409s leave the layer empty.
   */
  async loadSuggestions(
    api: MaskService,
    decodeSuggestionPng: (
      png: ArrayBuffer,
      width: number,
      height: number,
    ) => Uint8Array | Promise<Uint8Array>,
  ): Promise<void> {
    for (const lesion of LESIONS) {
      const png = await api.fetchSuggestion(this.imageId, lesion);
      if (png === null) {
        this.missingSuggestions.push(lesion);
        continue;
      }
      const grid = await decodeSuggestionPng(png, this.width, this.height);
      if (grid.some((v) => v !== 0)) {
        this.layers[lesion].load(grid, true);
      }
    }
  }

  /** Reload one layer from the annotator's stored annotation. */
  async reload(api: MaskService, lesion: Lesion, annotator: string): Promise<boolean> {
    const doc = await api.fetchAnnotation(this.imageId, lesion, annotator);
    if (doc === null) return false;
    this.layers[lesion].load(decodeRle(doc), false);
    this.layers[lesion].confidence = doc.confidence;
    return true;
  }

  nonEmptyLayers(): MaskLayer[] {
    return LESIONS.map((lesion) => this.layers[lesion]).filter((layer) => !layer.isEmpty());
  }

  layerAsRle(lesion: Lesion): RleMask {
    return encodeRle(this.layers[lesion].grid, this.width, this.height);
  }

  /**
   * One POST per non-empty layer. Every non-empty layer must carry a
   * confidence first; service errors propagate to the caller (surfaced
   * inline by the UI).
   */
  async submit(api: MaskService, annotator: string): Promise<SubmitResult> {
    const pending = this.nonEmptyLayers();
    const missing = pending.filter((layer) => layer.confidence === null);
    if (missing.length > 0) {
      throw new Error(`confidence not set for: ${missing.map((l) => l.lesion).join(", ")}`);
    }
    const submitted: Lesion[] = [];
    for (const layer of pending) {
      await api.submitAnnotation(
        this.imageId,
        layer.lesion,
        annotator,
        layer.confidence as number,
        this.layerAsRle(layer.lesion),
      );
      layer.dirty = false;
      submitted.push(layer.lesion);
    }
    return {
      submitted,
      skippedEmpty: LESIONS.filter((lesion) => this.layers[lesion].isEmpty()),
    };
  }
}
