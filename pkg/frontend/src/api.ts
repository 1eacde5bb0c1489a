// Typed client for the review service's versioned HTTP+JSON API.

import type {
  AccuracyReport,
  BatchDetail,
  BatchSummary,
  LikertValue,
  NextResponse,
} from "./types";

/** Service-reported error (4xx/5xx with a machine-readable body). */
export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** Transport failure: the service could not be reached at all. */
export class NetworkError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "NetworkError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ReviewApi {
  constructor(
    private baseUrl = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}/api/v1${path}`, init);
    } catch (err) {
      throw new NetworkError(err instanceof Error ? err.message : String(err));
    }
    if (!response.ok) {
      let code = "http_error";
      let message = `HTTP ${response.status}`;
      try {
        const body = (await response.json()) as {
          error?: { code?: string; message?: string };
        };
        code = body.error?.code ?? code;
        message = body.error?.message ?? message;
      } catch {
        // non-JSON error body: keep the generic message
      }
      throw new ApiError(response.status, code, message);
    }
    return (await response.json()) as T;
  }

  async listBatches(): Promise<BatchSummary[]> {
    const payload = await this.request<{ batches: BatchSummary[] }>("/batches");
    return payload.batches;
  }

  getBatch(batchId: string): Promise<BatchDetail> {
    return this.request<BatchDetail>(`/batches/${encodeURIComponent(batchId)}`);
  }

  nextItem(batchId: string, annotator: string): Promise<NextResponse> {
    const query = new URLSearchParams({ annotator }).toString();
    return this.request<NextResponse>(
      `/batches/${encodeURIComponent(batchId)}/next?${query}`,
    );
  }

  submitRating(
    predictionId: string,
    annotator: string,
    value: LikertValue,
  ): Promise<{ rating_id: number }> {
    return this.request<{ rating_id: number }>("/ratings", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        prediction_id: predictionId,
        annotator,
        value,
      }),
    });
  }

  relationReport(relation: string): Promise<AccuracyReport> {
    return this.request<AccuracyReport>(
      `/reports/${encodeURIComponent(relation)}`,
    );
  }
}
