import type { FuzzyMatch, RetrievalParamsInput, SessionView, StageStatus } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class Api {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: {} };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(this.baseUrl + path, init);
    const text = await response.text();
    let data: unknown = null;
    try {
      data = text ? JSON.parse(text) : null;
    } catch {
      data = null;
    }
    if (!response.ok) {
      const message =
        data && typeof data === "object" && "error" in data
          ? String((data as { error: unknown }).error)
          : `HTTP ${response.status}`;
      throw new ApiError(response.status, message);
    }
    return data as T;
  }

  createSession(query: string, params: RetrievalParamsInput): Promise<SessionView> {
    return this.request("POST", "/sessions", { query, params });
  }

  getSession(id: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${id}`);
  }

  removeHit(id: string, judgmentId: string, number: number): Promise<SessionView> {
    return this.request("PATCH", `/sessions/${id}/hits`, {
      op: "remove",
      judgment_id: judgmentId,
      number,
    });
  }

  addHit(id: string, judgmentId: string, number: number): Promise<SessionView> {
    return this.request("PATCH", `/sessions/${id}/hits`, {
      op: "add",
      judgment_id: judgmentId,
      number,
    });
  }

  reorderHits(id: string, order: [string, number][]): Promise<SessionView> {
    return this.request("PATCH", `/sessions/${id}/hits`, { op: "reorder", order });
  }

  corpusSearch(q: string, limit = 8): Promise<{ matches: FuzzyMatch[] }> {
    const query = new URLSearchParams({ q, limit: String(limit) });
    return this.request("GET", `/corpus/search?${query}`);
  }

  startOutline(id: string): Promise<{ status: string }> {
    return this.request("POST", `/sessions/${id}/outline`);
  }

  pollOutline(id: string): Promise<{ status: string; toc_text: string | null }> {
    return this.request("GET", `/sessions/${id}/outline`);
  }

  putOutline(id: string, tocText: string): Promise<SessionView> {
    return this.request("PUT", `/sessions/${id}/outline`, { toc_text: tocText });
  }

  generateSection(id: string, nodeId: string): Promise<{ status: string }> {
    return this.request("POST", `/sessions/${id}/sections/${nodeId}/generate`);
  }

  generateAll(id: string): Promise<{ status: string }> {
    return this.request("POST", `/sessions/${id}/generate_all`);
  }

  pollGeneration(id: string): Promise<StageStatus> {
    return this.request("GET", `/sessions/${id}/generation`);
  }

  async reportHtml(id: string): Promise<string> {
    const response = await this.fetchImpl(`${this.baseUrl}/sessions/${id}/report.html`, {});
    if (!response.ok) {
      throw new ApiError(response.status, `report not available (HTTP ${response.status})`);
    }
    return response.text();
  }

  reportHtmlUrl(id: string): string {
    return `${this.baseUrl}/sessions/${id}/report.html`;
  }

  reportMdUrl(id: string): string {
    return `${this.baseUrl}/sessions/${id}/report.md`;
  }
}
