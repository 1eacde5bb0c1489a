// Payload shapes mirrored from the review service; the client never
// mutates facts, it only renders what the service sends.

export const LIKERT_VALUES = [
  "correct",
  "likely",
  "unknown",
  "implausible",
  "false",
] as const;

export type LikertValue = (typeof LIKERT_VALUES)[number];

// keyboard shortcuts 1..5 map onto the scale in order
export function likertForKey(digit: number): LikertValue | null {
  return LIKERT_VALUES[digit - 1] ?? null;
}

export interface ReviewItemView {
  prediction_id: string;
  batch_id: string;
  subject_label: string;
  relation_phrase: string;
  object_label: string;
  confidence: number;
  search_query: string;
  position: number;
  current_rating: LikertValue | null;
}

export interface Progress {
  rated: number;
  total: number;
}

export interface NextResponse {
  done: boolean;
  item: ReviewItemView | null;
  progress: Progress;
}

export interface BatchSummary {
  id: string;
  relation: string;
  status: string;
  target_n: number;
  rated: number;
}

export interface BatchDetail {
  id: string;
  relation: string;
  status: string;
  target_n: number;
  items: ReviewItemView[];
}

export interface AccuracyReport {
  relation: string;
  accuracy: number;
  rated: number;
  sampled: number;
  coverage: number;
  counts: Record<LikertValue, number>;
}
