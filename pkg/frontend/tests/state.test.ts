// Unit tests for the client state machine against a scripted mock service.

import { describe, expect, it } from "vitest";

import { Api, ApiError, Outcome, PairTicket, VoteAck } from "../src/api.js";
import { KEY_BINDINGS, SurveyClient, toRows } from "../src/state.js";

type VoteLogEntry = { token: string; outcome: Outcome };

class MockApi extends Api {
  votes: VoteLogEntry[] = [];
  served = 0;
  failNetwork = false;
  expireNextVote = false;
  voteDelayMs = 0;

  constructor() {
    super("mock://");
  }

  private ticket(): PairTicket {
    this.served += 1;
    return {
      token: `tok${this.served}`,
      left: { id: "i0", image: null },
      right: { id: "i1", image: null },
    };
  }

  override async createSession(): Promise<string> {
    if (this.failNetwork) throw new Error("connection refused");
    return "session-1";
  }

  override async nextPair(): Promise<PairTicket> {
    if (this.failNetwork) throw new Error("connection refused");
    return this.ticket();
  }

  override async vote(_sid: string, token: string, outcome: Outcome): Promise<VoteAck> {
    if (this.failNetwork) throw new Error("connection refused");
    if (this.expireNextVote) {
      this.expireNextVote = false;
      throw new ApiError(410, "token expired");
    }
    if (this.voteDelayMs) {
      await new Promise((resolve) => setTimeout(resolve, this.voteDelayMs));
    }
    this.votes.push({ token, outcome });
    return { recorded: outcome !== "skip" };
  }

  override async scores() {
    return {
      method: "elo",
      scores: { i0: 1516, i1: 1484 },
      normalized: { i0: 1, i1: 0 },
    };
  }
}

describe("SurveyClient", () => {
  it("start creates a session and holds the first pair", async () => {
    const api = new MockApi();
    const client = new SurveyClient(api);
    await client.start();
    expect(client.state.sessionId).toBe("session-1");
    expect(client.state.ticket?.token).toBe("tok1");
    expect(client.state.votes).toBe(0);
    expect(client.state.error).toBeNull();
  });

  it("service down yields an error banner and no partial state", async () => {
    const api = new MockApi();
    api.failNetwork = true;
    const client = new SurveyClient(api);
    await client.start();
    expect(client.state.error).toMatch(/network error/);
    expect(client.state.sessionId).toBeNull();
    expect(client.state.ticket).toBeNull();
  });

  it("submit without a ticket is a no-op", async () => {
    const api = new MockApi();
    const client = new SurveyClient(api);
    await client.submit("left");
    expect(api.votes).toHaveLength(0);
  });

  it("a vote posts the token, counts, and fetches the next pair", async () => {
    const api = new MockApi();
    const client = new SurveyClient(api);
    await client.start();
    await client.submit("left");
    expect(api.votes).toEqual([{ token: "tok1", outcome: "left" }]);
    expect(client.state.votes).toBe(1);
    expect(client.state.ticket?.token).toBe("tok2");
  });

  it("skip does not increment the vote counter", async () => {
    const api = new MockApi();
    const client = new SurveyClient(api);
    await client.start();
    await client.submit("skip");
    expect(client.state.votes).toBe(0);
    expect(client.state.ticket?.token).toBe("tok2");
  });

  it("rapid double submission records exactly one vote", async () => {
    const api = new MockApi();
    api.voteDelayMs = 20;
    const client = new SurveyClient(api);
    await client.start();
    await Promise.all([client.submit("left"), client.submit("left")]);
    expect(api.votes).toHaveLength(1);
    expect(client.state.votes).toBe(1);
  });

  it("an expired token recovers silently with a fresh pair", async () => {
    const api = new MockApi();
    const client = new SurveyClient(api);
    await client.start();
    api.expireNextVote = true;
    await client.submit("right");
    expect(api.votes).toHaveLength(0);
    expect(client.state.votes).toBe(0);
    expect(client.state.error).toBeNull();
    expect(client.state.ticket?.token).toBe("tok2");
  });

  it("keyboard bindings map arrows and letters to outcomes", () => {
    expect(KEY_BINDINGS.ArrowLeft).toBe("left");
    expect(KEY_BINDINGS.ArrowRight).toBe("right");
    expect(KEY_BINDINGS.ArrowDown).toBe("tie");
    expect(KEY_BINDINGS.t).toBe("tie");
    expect(KEY_BINDINGS.T).toBe("tie");
    expect(KEY_BINDINGS.s).toBe("skip");
    expect(KEY_BINDINGS.S).toBe("skip");
  });

  it("handleKey ignores unbound keys", async () => {
    const api = new MockApi();
    const client = new SurveyClient(api);
    await client.start();
    await client.handleKey("x");
    expect(api.votes).toHaveLength(0);
  });

  it("leaderboard shows numbers verbatim from the service", async () => {
    const api = new MockApi();
    const client = new SurveyClient(api);
    await client.refreshLeaderboard("elo");
    expect(client.state.leaderboard).toEqual([
      { id: "i0", image: null, normalized: 1 },
      { id: "i1", image: null, normalized: 0 },
    ]);
  });

  it("empty log shows a no-data placeholder state", async () => {
    class EmptyApi extends MockApi {
      override async scores(): Promise<never> {
        throw new ApiError(409, "no recorded comparisons yet");
      }
    }
    const client = new SurveyClient(new EmptyApi());
    await client.refreshLeaderboard("lsr");
    expect(client.state.leaderboard).toEqual([]);
  });
});

describe("toRows", () => {
  it("sorts by normalized score descending with id tie-break", () => {
    const rows = toRows({
      method: "elo",
      scores: { a: 3, b: 9, c: 9 },
      normalized: { a: 0, b: 1, c: 1 },
    });
    expect(rows.map((r) => r.id)).toEqual(["b", "c", "a"]);
  });
});
