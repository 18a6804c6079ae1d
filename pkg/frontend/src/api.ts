// Thin typed client for the survey service HTTP/JSON API.

export interface ItemRef {
  id: string;
  image: string | null;
}

export interface PairTicket {
  token: string;
  left: ItemRef;
  right: ItemRef;
}

export interface VoteAck {
  recorded: boolean;
  updated?: {
    left: { id: string; score: number; mu: number; sigma: number };
    right: { id: string; score: number; mu: number; sigma: number };
  };
}

export interface ScoresPayload {
  method: string;
  scores: Record<string, number>;
  normalized: Record<string, number>;
  mu?: Record<string, number>;
  sigma?: Record<string, number>;
}

export interface CatalogPayload {
  items: { id: string; image: string | null; metadata: Record<string, string> }[];
}

export type Outcome = "left" | "right" | "tie" | "skip";

/** Error carrying the HTTP status so callers can branch on 410 (expired). */
export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function unwrap<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let message = response.statusText;
    try {
      const body = (await response.json()) as { error?: string };
      if (body.error) message = body.error;
    } catch {
      // non-JSON error body: keep the status text
    }
    throw new ApiError(response.status, message);
  }
  return (await response.json()) as T;
}

export class Api {
  constructor(private readonly base: string = "") {}

  async createSession(): Promise<string> {
    const payload = await unwrap<{ session_id: string }>(
      await fetch(`${this.base}/api/sessions`, { method: "POST" }),
    );
    return payload.session_id;
  }

  async nextPair(sessionId: string, strategy?: string): Promise<PairTicket> {
    const query = strategy ? `?strategy=${encodeURIComponent(strategy)}` : "";
    return unwrap<PairTicket>(
      await fetch(`${this.base}/api/sessions/${sessionId}/next${query}`),
    );
  }

  async vote(sessionId: string, token: string, outcome: Outcome): Promise<VoteAck> {
    return unwrap<VoteAck>(
      await fetch(`${this.base}/api/sessions/${sessionId}/vote`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ token, outcome }),
      }),
    );
  }

  async scores(method: string): Promise<ScoresPayload> {
    return unwrap<ScoresPayload>(
      await fetch(`${this.base}/api/scores?method=${encodeURIComponent(method)}`),
    );
  }

  async items(): Promise<CatalogPayload> {
    return unwrap<CatalogPayload>(await fetch(`${this.base}/api/items`));
  }
}
