import type { AgreementReport, AnnotatorProfile, ImageEntry, Lesion, RleMask } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function raiseFor(response: Response): Promise<void> {
  if (response.ok) return;
  let detail = response.statusText;
  try {
    const doc = await response.json();
    if (doc && typeof doc.detail === "string") detail = doc.detail;
  } catch {
    /* non-JSON error body */
  }
  throw new ApiError(response.status, detail);
}

/** The slice of the service the editing session depends on (stubbed in tests). */
export interface MaskService {
  fetchSuggestion(imageId: string, lesion: Lesion): Promise<ArrayBuffer | null>;
  submitAnnotation(
    imageId: string,
    lesion: Lesion,
    annotator: string,
    confidence: number,
    mask: RleMask,
  ): Promise<void>;
  fetchAnnotation(
    imageId: string,
    lesion: Lesion,
    annotator: string,
  ): Promise<(RleMask & { confidence: number }) | null>;
}

/** Thin client over the curation service REST API. */
export class CurationApi implements MaskService {
  constructor(
    private baseUrl: string,
    private fetchFn: typeof fetch = fetch,
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async listImages(): Promise<ImageEntry[]> {
    const r = await this.fetchFn(this.url("/images"));
    await raiseFor(r);
    return (await r.json()).images;
  }

  async registerAnnotator(profile: AnnotatorProfile): Promise<void> {
    const r = await this.fetchFn(this.url("/annotators"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(profile),
    });
    await raiseFor(r);
  }

  enhancedUrl(imageId: string): string {
    return this.url(`/images/${encodeURIComponent(imageId)}/enhanced`);
  }

  async fetchEnhancedPng(imageId: string): Promise<ArrayBuffer> {
    const r = await this.fetchFn(this.enhancedUrl(imageId));
    await raiseFor(r);
    return r.arrayBuffer();
  }

  /** Post-processed machine suggestion; null when none exists (409). */
  async fetchSuggestion(imageId: string, lesion: Lesion): Promise<ArrayBuffer | null> {
    const r = await this.fetchFn(this.url(`/images/${encodeURIComponent(imageId)}/suggestions/${lesion}`));
    if (r.status === 409) return null;
    await raiseFor(r);
    return r.arrayBuffer();
  }

  async submitAnnotation(
    imageId: string,
    lesion: Lesion,
    annotator: string,
    confidence: number,
    mask: RleMask,
  ): Promise<void> {
    const query = `?confidence=${encodeURIComponent(confidence)}`;
    const r = await this.fetchFn(this.url(`/images/${encodeURIComponent(imageId)}/annotations/${lesion}${query}`), {
      method: "POST",
      headers: { "Content-Type": "application/json", "X-Annotator-Id": annotator },
      body: JSON.stringify(mask),
    });
    await raiseFor(r);
  }

  async fetchAnnotation(
    imageId: string,
    lesion: Lesion,
    annotator: string,
  ): Promise<(RleMask & { confidence: number }) | null> {
    const query = `?annotator=${encodeURIComponent(annotator)}&format=rle`;
    const r = await this.fetchFn(this.url(`/images/${encodeURIComponent(imageId)}/annotations/${lesion}${query}`));
    if (r.status === 404) return null;
    await raiseFor(r);
    return r.json();
  }

  async fetchAgreement(imageId: string): Promise<AgreementReport> {
    const r = await this.fetchFn(this.url(`/images/${encodeURIComponent(imageId)}/agreement`));
    await raiseFor(r);
    return r.json();
  }
}
