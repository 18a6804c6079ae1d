"""Live pairwise survey service over HTTP.

State design: the append-only JSONL comparison log is the single source of
truth. Every vote is fsynced to the log before the in-memory Elo and
TrueSkill tables are touched, so replaying the log from an empty state
reproduces the live tables exactly. Sessions (served-pair sets) are
rehydrated from the log's session fields on startup; outstanding tickets
are memory-only and simply lapse on restart.

Endpoints:
    POST /api/sessions                      -> {"session_id": ...}
    GET  /api/sessions/{id}/next?strategy=  -> {"token", "left", "right"}
    POST /api/sessions/{id}/vote            body {"token", "outcome"}
    GET  /api/scores?method=...             -> score table JSON
    GET  /api/items                         -> catalog JSON
    GET  /images/...                        -> static image files
"""

from __future__ import annotations

import json
import os
import random
import threading
import time
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from . import batch, gp, online
from .data import ComparisonRecord, Dataset, GaussianRating, ItemCatalog, Outcome
from .evaluation import normalize_scores
from .io import _parse_jsonl, load_catalog, record_to_dict

LOG_NAME = "comparisons.jsonl"
CATALOG_NAME = "catalog.json"

STRATEGIES = ("uniform", "uncertainty")


class ServiceError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


@dataclass
class PairTicket:
    token: str
    session_id: str
    a: str
    b: str
    left_is_a: bool
    issued_at: float


@dataclass
class Session:
    id: str
    created_at: float
    served: set[tuple[str, str]] = field(default_factory=set)
    pending: PairTicket | None = None


class SurveyService:
    """In-process survey state machine; the HTTP layer is a thin shell.

    Votes are serialized through a single lock (append, fsync, rate); reads
    snapshot under the same lock and serialize outside it.
    """

    def __init__(
        self,
        data_dir: str | Path,
        catalog: ItemCatalog | None = None,
        elo_params: online.EloParams | None = None,
        ts_params: online.TrueSkillParams | None = None,
        co_params: batch.CoParams | None = None,
        lsr_params: batch.LsrParams | None = None,
        gp_params=None,
        default_strategy: str = "uniform",
        ticket_ttl: float = 1800.0,
        rng_seed: int | None = None,
    ):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.log_path = self.data_dir / LOG_NAME
        self.elo_params = elo_params or online.EloParams()
        self.ts_params = ts_params or online.TrueSkillParams()
        self.co_params = co_params or batch.CoParams()
        self.lsr_params = lsr_params or batch.LsrParams()
        self.gp_params = gp_params or gp.GpParams()
        if default_strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {default_strategy!r}")
        self.default_strategy = default_strategy
        self.ticket_ttl = ticket_ttl
        self._rng = random.Random(rng_seed)
        self._lock = threading.Lock()

        if catalog is not None:
            self.catalog = catalog
        elif (self.data_dir / CATALOG_NAME).exists():
            self.catalog = load_catalog(self.data_dir / CATALOG_NAME)
        else:
            self.catalog = ItemCatalog()

        self._elo: dict[str, float] = {
            i: self.elo_params.initial_score for i in self.catalog.ids()
        }
        self._ts: dict[str, GaussianRating] = {
            i: self.ts_params.initial_rating() for i in self.catalog.ids()
        }
        self.sessions: dict[str, Session] = {}
        self._tickets: dict[str, PairTicket] = {}
        self._records: list[ComparisonRecord] = []
        self._batch_cache: dict[str, tuple[int, bytes]] = {}
        self._replay()
        self._log_fh = open(self.log_path, "a", encoding="utf-8")

    # -- durability ---------------------------------------------------------

    def _recover_torn_tail(self) -> None:
        """Truncate a partially written (never acknowledged) final log line.

        A crash between write and fsync can leave a torn last line; appending
        after it would corrupt the next record. Anything before the last
        newline was durably acknowledged and is never touched.
        """
        raw = self.log_path.read_bytes()
        if not raw:
            return
        keep = len(raw)
        if not raw.endswith(b"\n"):
            keep = raw.rfind(b"\n") + 1
        else:
            try:
                json.loads(raw[raw.rfind(b"\n", 0, -1) + 1 :])
            except json.JSONDecodeError:
                keep = raw.rfind(b"\n", 0, -1) + 1
        if keep < len(raw):
            with open(self.log_path, "r+b") as fh:
                fh.truncate(keep)

    def _replay(self) -> None:
        if not self.log_path.exists():
            return
        self._recover_torn_tail()
        for rec in _parse_jsonl(self.log_path):
            for item in (rec.a, rec.b):
                if item not in self._elo:  # log may predate the catalog file
                    self._elo[item] = self.elo_params.initial_score
                    self._ts[item] = self.ts_params.initial_rating()
            self._apply(rec)
            if rec.session:
                session = self.sessions.get(rec.session)
                if session is None:
                    session = Session(id=rec.session, created_at=time.time())
                    self.sessions[rec.session] = session
                session.served.add(_pair_key(rec.a, rec.b))

    def _apply(self, rec: ComparisonRecord) -> None:
        self._records.append(rec)
        self._elo[rec.a], self._elo[rec.b] = online.elo_update(
            self._elo[rec.a], self._elo[rec.b], rec.outcome, self.elo_params
        )
        self._ts[rec.a], self._ts[rec.b] = online.ts_update(
            self._ts[rec.a], self._ts[rec.b], rec.outcome, self.ts_params
        )

    def _append_durably(self, rec: ComparisonRecord) -> None:
        self._log_fh.write(json.dumps(record_to_dict(rec)) + "\n")
        self._log_fh.flush()
        os.fsync(self._log_fh.fileno())

    # -- survey operations --------------------------------------------------

    def create_session(self) -> Session:
        with self._lock:
            session = Session(id=uuid.uuid4().hex, created_at=time.time())
            self.sessions[session.id] = session
            return session

    def _release(self, ticket: PairTicket) -> None:
        self._tickets.pop(ticket.token, None)
        session = self.sessions.get(ticket.session_id)
        if session is not None:
            session.served.discard(_pair_key(ticket.a, ticket.b))
            if session.pending is ticket:
                session.pending = None

    def next_pair(self, session_id: str, strategy: str | None = None) -> dict:
        strategy = strategy or self.default_strategy
        if strategy not in STRATEGIES:
            raise ServiceError(400, f"unknown strategy {strategy!r}")
        ids = self.catalog.ids()
        if len(ids) < 2:
            raise ServiceError(409, "catalog has fewer than 2 items")
        with self._lock:
            session = self.sessions.get(session_id)
            if session is None:
                raise ServiceError(404, f"unknown session {session_id!r}")
            if session.pending is not None:
                if time.time() - session.pending.issued_at > self.ticket_ttl:
                    self._release(session.pending)
                else:
                    raise ServiceError(409, "session has an outstanding pair")

            all_pairs = [
                (ids[i], ids[j]) for i in range(len(ids)) for j in range(i + 1, len(ids))
            ]
            unserved = [p for p in all_pairs if p not in session.served]
            if not unserved:
                session.served.clear()
                unserved = all_pairs
            if strategy == "uniform":
                pair = unserved[self._rng.randrange(len(unserved))]
            else:
                pair = min(
                    unserved,
                    key=lambda p: (
                        -(self._ts[p[0]].sigma2 + self._ts[p[1]].sigma2),
                        abs(self._ts[p[0]].mu - self._ts[p[1]].mu),
                        p,
                    ),
                )
            ticket = PairTicket(
                token=uuid.uuid4().hex,
                session_id=session_id,
                a=pair[0],
                b=pair[1],
                left_is_a=self._rng.random() < 0.5,
                issued_at=time.time(),
            )
            session.served.add(pair)
            session.pending = ticket
            self._tickets[ticket.token] = ticket
            left_id = ticket.a if ticket.left_is_a else ticket.b
            right_id = ticket.b if ticket.left_is_a else ticket.a
            return {
                "token": ticket.token,
                "left": self._item_payload(left_id),
                "right": self._item_payload(right_id),
            }

    def _item_payload(self, item_id: str) -> dict:
        entry = self.catalog.entry(item_id)
        return {"id": entry.id, "image": entry.image}

    def record_vote(self, session_id: str, token: str, outcome_token: str) -> dict:
        if outcome_token not in ("left", "right", "tie", "skip"):
            raise ServiceError(400, f"malformed outcome {outcome_token!r}")
        with self._lock:
            ticket = self._tickets.get(token)
            if ticket is None:
                raise ServiceError(410, "unknown, expired, or already-used token")
            if ticket.session_id != session_id:
                raise ServiceError(409, "token belongs to a different session")
            if time.time() - ticket.issued_at > self.ticket_ttl:
                self._release(ticket)
                raise ServiceError(410, "token expired")

            if outcome_token == "skip":
                self._release(ticket)
                return {"recorded": False}

            del self._tickets[token]
            session = self.sessions.get(session_id)
            if session is not None and session.pending is ticket:
                session.pending = None
            if outcome_token == "tie":
                outcome = Outcome.TIE
            elif (outcome_token == "left") == ticket.left_is_a:
                outcome = Outcome.WIN_A
            else:
                outcome = Outcome.WIN_B
            rec = ComparisonRecord(
                a=ticket.a,
                b=ticket.b,
                outcome=outcome,
                timestamp=datetime.now(timezone.utc),
                session=session_id,
            )
            self._append_durably(rec)  # before any in-memory update
            self._apply(rec)
            updated = {}
            for side, item in (("left", ticket.a if ticket.left_is_a else ticket.b),
                               ("right", ticket.b if ticket.left_is_a else ticket.a)):
                rating = self._ts[item]
                updated[side] = {
                    "id": item,
                    "score": self._elo[item],
                    "mu": rating.mu,
                    "sigma": rating.sigma,
                }
            return {"recorded": True, "updated": updated}

    # -- score views --------------------------------------------------------

    def scores_payload(self, method: str) -> bytes:
        """Serialized score table for one method; batch methods are cached
        until the log grows."""
        if method in ("elo", "trueskill"):
            with self._lock:
                if method == "elo":
                    table = {"scores": dict(self._elo)}
                else:
                    table = {
                        "scores": {i: r.mu for i, r in self._ts.items()},
                        "mu": {i: r.mu for i, r in self._ts.items()},
                        "sigma": {i: r.sigma for i, r in self._ts.items()},
                    }
            return self._finish_payload(method, table)

        if method not in ("co", "lsr", "gp"):
            raise ServiceError(400, f"unknown method {method!r}")
        with self._lock:
            n = len(self._records)
            cached = self._batch_cache.get(method)
            if cached is not None and cached[0] == n:
                return cached[1]
            if n == 0:
                raise ServiceError(409, "no recorded comparisons yet for batch methods")
            dataset = Dataset(self.catalog, list(self._records))
        if method == "co":
            table_obj = batch.co_fit(dataset, self.co_params)
        elif method == "lsr":
            table_obj = batch.lsr_fit(dataset, self.lsr_params)
        else:
            table_obj = gp.ep_fit(dataset, self.gp_params).score_table()
        table = {"scores": dict(table_obj.scores)}
        if table_obj.ratings:
            table["mu"] = {i: r.mu for i, r in table_obj.ratings.items()}
            table["sigma"] = {i: r.sigma for i, r in table_obj.ratings.items()}
        payload = self._finish_payload(method, table)
        with self._lock:
            self._batch_cache[method] = (n, payload)
        return payload

    def _finish_payload(self, method: str, table: dict) -> bytes:
        scores = table["scores"]
        if len(scores) >= 2:
            from .data import ScoreTable

            normalized = normalize_scores(ScoreTable(scores, method=method)).scores
        else:
            normalized = {i: 0.5 for i in scores}
        payload = {"method": method, **table, "normalized": normalized}
        return json.dumps(payload, sort_keys=True).encode()

    def catalog_payload(self) -> bytes:
        items = [
            {"id": e.id, "image": e.image, "metadata": dict(e.metadata)}
            for e in self.catalog
        ]
        return json.dumps({"items": items}, sort_keys=True).encode()

    def close(self) -> None:
        self._log_fh.close()


def _pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


# ---------------------------------------------------------------------------
# HTTP shell


def make_handler(service: SurveyService, images_dir: Path | None, static_dir: Path | None):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, *args):  # quiet by default
            pass

        def _send_json(self, payload, status=200):
            body = payload if isinstance(payload, bytes) else json.dumps(payload).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _send_error_json(self, status, message):
            self._send_json({"error": message}, status=status)

        def _read_body(self) -> dict:
            # always drain the body: leftovers would desync keep-alive parsing
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b"{}"
            try:
                obj = json.loads(raw or b"{}")
            except json.JSONDecodeError:
                raise ServiceError(400, "request body is not valid JSON") from None
            if not isinstance(obj, dict):
                raise ServiceError(400, "request body must be a JSON object")
            return obj

        def _send_file(self, root: Path, rel: str, fallback: str | None = None):
            target = (root / rel.lstrip("/")).resolve()
            if not str(target).startswith(str(root.resolve())):
                return self._send_error_json(403, "forbidden")
            if target.is_dir() and fallback:
                target = target / fallback
            if not target.is_file():
                return self._send_error_json(404, "not found")
            content_types = {
                ".html": "text/html",
                ".js": "application/javascript",
                ".css": "text/css",
                ".json": "application/json",
                ".png": "image/png",
                ".jpg": "image/jpeg",
                ".jpeg": "image/jpeg",
                ".svg": "image/svg+xml",
            }
            ctype = content_types.get(target.suffix.lower(), "application/octet-stream")
            body = target.read_bytes()
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_POST(self):
            try:
                url = urlparse(self.path)
                parts = [p for p in url.path.split("/") if p]
                body = self._read_body()
                if parts == ["api", "sessions"]:
                    session = service.create_session()
                    return self._send_json({"session_id": session.id})
                if (
                    len(parts) == 4
                    and parts[:2] == ["api", "sessions"]
                    and parts[3] == "vote"
                ):
                    token = body.get("token")
                    outcome = body.get("outcome")
                    if not isinstance(token, str) or not isinstance(outcome, str):
                        raise ServiceError(400, "vote needs string 'token' and 'outcome'")
                    result = service.record_vote(parts[2], token, outcome)
                    return self._send_json(result)
                return self._send_error_json(404, "not found")
            except ServiceError as exc:
                return self._send_error_json(exc.status, exc.message)

        def do_GET(self):
            try:
                url = urlparse(self.path)
                query = parse_qs(url.query)
                parts = [p for p in url.path.split("/") if p]
                if parts == ["api", "items"]:
                    return self._send_json(service.catalog_payload())
                if parts == ["api", "scores"]:
                    method = (query.get("method") or ["elo"])[0]
                    return self._send_json(service.scores_payload(method))
                if (
                    len(parts) == 4
                    and parts[:2] == ["api", "sessions"]
                    and parts[3] == "next"
                ):
                    strategy = (query.get("strategy") or [None])[0]
                    return self._send_json(service.next_pair(parts[2], strategy))
                if parts and parts[0] == "images" and images_dir is not None:
                    return self._send_file(images_dir, "/".join(parts[1:]))
                if static_dir is not None:
                    rel = url.path if url.path != "/" else "/index.html"
                    return self._send_file(static_dir, rel, fallback="index.html")
                return self._send_error_json(404, "not found")
            except ServiceError as exc:
                return self._send_error_json(exc.status, exc.message)

    return Handler


def make_server(
    service: SurveyService,
    host: str = "127.0.0.1",
    port: int = 0,
    images_dir: Path | None = None,
    static_dir: Path | None = None,
) -> ThreadingHTTPServer:
    if images_dir is None:
        candidate = service.data_dir / "images"
        images_dir = candidate if candidate.is_dir() else None
    handler = make_handler(service, images_dir, static_dir)
    server = ThreadingHTTPServer((host, port), handler)
    server.daemon_threads = True
    return server
