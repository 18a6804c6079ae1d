// Client state machine for the voting loop.
//
// Invariants: no vote is submitted without a held ticket, at most one API
// request is in flight, and every recorded vote maps 1:1 to a user gesture
// (the in-flight flag swallows repeats). All displayed numbers come verbatim
// from the service; the client never computes scores.

import { Api, ApiError, Outcome, PairTicket, ScoresPayload } from "./api.js";

export interface LeaderboardRow {
  id: string;
  image: string | null;
  normalized: number;
}

export interface ViewState {
  sessionId: string | null;
  ticket: PairTicket | null;
  votes: number;
  inFlight: boolean;
  error: string | null;
  leaderboard: LeaderboardRow[] | null;
  leaderboardMethod: string;
}

export const KEY_BINDINGS: Record<string, Outcome> = {
  ArrowLeft: "left",
  ArrowRight: "right",
  ArrowDown: "tie",
  t: "tie",
  T: "tie",
  s: "skip",
  S: "skip",
};

export type Listener = (state: ViewState) => void;

export class SurveyClient {
  state: ViewState = {
    sessionId: null,
    ticket: null,
    votes: 0,
    inFlight: false,
    error: null,
    leaderboard: null,
    leaderboardMethod: "elo",
  };

  constructor(
    private readonly api: Api,
    private readonly listener: Listener = () => {},
    private readonly images: Record<string, string | null> = {},
  ) {}

  private notify(): void {
    this.listener(this.state);
  }

  private set(partial: Partial<ViewState>): void {
    this.state = { ...this.state, ...partial };
    this.notify();
  }

  /** Create a session and fetch the first pair. Safe to retry on failure. */
  async start(): Promise<void> {
    if (this.state.inFlight) return;
    this.set({ inFlight: true, error: null });
    try {
      const sessionId = await this.api.createSession();
      const ticket = await this.api.nextPair(sessionId);
      this.set({ sessionId, ticket, inFlight: false });
    } catch (err) {
      this.set({ inFlight: false, error: describe(err) });
    }
  }

  /** Submit a judged outcome for the held pair, then fetch the next pair. */
  async submit(choice: Outcome): Promise<void> {
    const { sessionId, ticket, inFlight } = this.state;
    if (!sessionId || !ticket || inFlight) return;
    this.set({ inFlight: true, error: null });
    try {
      const ack = await this.api.vote(sessionId, ticket.token, choice);
      const next = await this.api.nextPair(sessionId);
      this.set({
        ticket: next,
        votes: this.state.votes + (ack.recorded ? 1 : 0),
        inFlight: false,
      });
    } catch (err) {
      if (err instanceof ApiError && err.status === 410 && sessionId) {
        // expired token: silently recover with a fresh pair, nothing counted
        try {
          const next = await this.api.nextPair(sessionId);
          this.set({ ticket: next, inFlight: false });
          return;
        } catch (inner) {
          this.set({ inFlight: false, error: describe(inner) });
          return;
        }
      }
      this.set({ inFlight: false, error: describe(err) });
    }
  }

  /** Map a keyboard key to a vote; unknown keys are ignored. */
  async handleKey(key: string): Promise<void> {
    const choice = KEY_BINDINGS[key];
    if (!choice) return;
    await this.submit(choice);
  }

  /** Fetch leaderboard rows; never blocks or mutates the voting flow. */
  async refreshLeaderboard(method?: string): Promise<void> {
    const selected = method ?? this.state.leaderboardMethod;
    try {
      const payload = await this.api.scores(selected);
      this.set({
        leaderboard: toRows(payload, this.images),
        leaderboardMethod: selected,
        error: this.state.error,
      });
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.set({ leaderboard: [], leaderboardMethod: selected });
        return;
      }
      this.set({ leaderboard: null, leaderboardMethod: selected });
    }
  }
}

export function toRows(
  payload: ScoresPayload,
  images: Record<string, string | null> = {},
): LeaderboardRow[] {
  return Object.keys(payload.normalized)
    .map((id) => ({ id, image: images[id] ?? null, normalized: payload.normalized[id] }))
    .sort((a, b) => b.normalized - a.normalized || (a.id < b.id ? -1 : 1));
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `service error ${err.status}: ${err.message}`;
  if (err instanceof Error) return `network error: ${err.message}`;
  return "unknown error";
}
