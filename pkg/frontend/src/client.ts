/** Typed client for the suggestion service. The fetch implementation is
 * injectable so tests can run without a network. */

import type {
  ApiError,
  AttributesResponse,
  HealthResponse,
  SuggestionRequest,
  SuggestionResponse,
} from "./types.js";

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = globalThis.fetch as FetchLike,
  ) {}

  private async get<T>(path: string): Promise<T> {
    const res = await this.fetchImpl(this.baseUrl + path);
    return this.unwrap<T>(res);
  }

  private async unwrap<T>(res: {
    ok: boolean;
    status: number;
    json(): Promise<unknown>;
  }): Promise<T> {
    const body = await res.json();
    if (!res.ok) {
      const err = body as Partial<ApiError>;
      throw new ServiceError(
        res.status,
        err.code ?? "unknown",
        err.message ?? `request failed with status ${res.status}`,
      );
    }
    return body as T;
  }

  health(): Promise<HealthResponse> {
    return this.get<HealthResponse>("/v1/health");
  }

  attributes(): Promise<AttributesResponse> {
    return this.get<AttributesResponse>("/v1/attributes");
  }

  async suggest(req: SuggestionRequest): Promise<SuggestionResponse> {
    const res = await this.fetchImpl(this.baseUrl + "/v1/suggest", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
    });
    return this.unwrap<SuggestionResponse>(res);
  }
}
