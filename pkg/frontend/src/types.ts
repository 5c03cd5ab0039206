export type Lesion = "EX" | "SE" | "HA" | "MA";

export const LESIONS: Lesion[] = ["EX", "SE", "HA", "MA"];

/** Fixed overlay legend: EX green, HA purple, SE dark blue, MA light blue. */
export const LESION_COLORS: Record<Lesion, string> = {
  EX: "#2ecc40",
  HA: "#8e44ad",
  SE: "#1f3a93",
  MA: "#7fdbff",
};

export interface ImageEntry {
  id: string;
  quality: string | null;
  width: number;
  height: number;
  predictions: Lesion[];
  annotations: { annotator: string; lesion: Lesion; confidence: number }[];
}

export interface RleMask {
  width: number;
  height: number;
  /** Alternating run lengths, background first (possibly 0). */
  rle: number[];
}

export interface AgreementRow {
  lesion: Lesion;
  kappa: number;
  w_kappa: number;
  dsc: number;
  w_dsc: number;
  degenerate: boolean;
}

export interface AgreementReport {
  image_id: string;
  rows: AgreementRow[];
  average: { kappa: number; w_kappa: number; dsc: number; w_dsc: number } | Record<string, never>;
  discarded_annotators: string[];
  verdict: "keep" | "discard" | "insufficient";
}

export interface AnnotatorProfile {
  annotator_id: string;
  display_name?: string;
  expertise: number;
  band?: string | null;
}

export interface Stroke {
  points: { x: number; y: number }[];
  radius: number;
}
