"""Child-process bridge for external model-based metrics.

Transport is newline-delimited UTF-8 JSON over the child's stdin/stdout:
requests {"op":"info"} | {"op":"score","id":N,"hyp":S,"ref":S} |
{"op":"shutdown"}; replies {"name":...,"symmetric":...,"score_range":...,
"supports_multi_ref":...} for info and {"id":N,"score":X} or
{"id":N,"error":S} for score. Raw strings cross the bridge; the child owns
its own tokenization.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import queue
import subprocess
import threading
import time
from dataclasses import dataclass, field

from .core import Scorer, Text
from .errors import (BridgeCrashError, BridgeProtocolError, BridgeTimeoutError,
                     ScoreRangeError, ScorerError)

log = logging.getLogger(__name__)

CACHE_ENV_VAR = "BIASEVAL_CACHE_DIR"


@dataclass
class BridgeConfig:
    command: list[str]
    handshake_timeout: float = 30.0
    request_timeout: float = 60.0
    max_batch: int = 32

    def __post_init__(self):
        if self.handshake_timeout <= 0 or self.request_timeout <= 0:
            raise ValueError("timeouts must be positive")
        if self.max_batch < 1:
            raise ValueError("max_batch must be >= 1")
        if not self.command:
            raise ValueError("bridge command must not be empty")


@dataclass
class BridgeInfo:
    name: str
    symmetric: bool = False
    score_range: tuple[float, float] | None = None
    supports_multi_ref: bool = False

    @classmethod
    def from_payload(cls, payload: dict) -> "BridgeInfo":
        name = payload.get("name")
        if not name or not isinstance(name, str):
            raise BridgeProtocolError(f"info reply lacks a name: {payload!r}")
        rng = payload.get("score_range")
        if rng is not None:
            if (not isinstance(rng, (list, tuple)) or len(rng) != 2):
                raise BridgeProtocolError(f"bad score_range: {rng!r}")
            rng = (float(rng[0]), float(rng[1]))
        return cls(name=name,
                   symmetric=bool(payload.get("symmetric", False)),
                   score_range=rng,
                   supports_multi_ref=bool(payload.get("supports_multi_ref", False)))


@dataclass
class ScoreOutcome:
    """Exactly-once result per request id: a score or an error."""

    request_id: int
    score: float | None = None
    error: Exception | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


class _Child:
    """One spawned child with a reader thread feeding a reply queue."""

    def __init__(self, command: list[str]):
        self.proc = subprocess.Popen(
            command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            text=True, encoding="utf-8", bufsize=1)
        self.replies: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self):
        try:
            for line in self.proc.stdout:
                line = line.strip()
                if not line:
                    continue
                try:
                    self.replies.put(("reply", json.loads(line)))
                except json.JSONDecodeError as exc:
                    self.replies.put(("garbage", f"{exc}: {line!r}"))
        finally:
            self.replies.put(("eof", None))

    def send(self, obj: dict):
        try:
            self.proc.stdin.write(json.dumps(obj, ensure_ascii=False) + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BridgeCrashError(f"child stdin closed: {exc}") from exc

    def alive(self) -> bool:
        return self.proc.poll() is None

    def shutdown(self):
        if self.alive():
            try:
                self.send({"op": "shutdown"})
            except BridgeCrashError:
                pass
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()
        if self.proc.stdin:
            try:
                self.proc.stdin.close()
            except OSError:
                pass


class BridgeClient:
    """Protocol driver: handshake plus batched scoring with per-id timeouts."""

    def __init__(self, config: BridgeConfig):
        self.config = config
        self.info: BridgeInfo | None = None
        self._child: _Child | None = None
        self._restarted = False
        self._lock = threading.Lock()

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> BridgeInfo:
        self._child = _Child(self.config.command)
        self.info = self._handshake(self._child)
        return self.info

    def _handshake(self, child: _Child) -> BridgeInfo:
        child.send({"op": "info"})
        try:
            kind, payload = child.replies.get(timeout=self.config.handshake_timeout)
        except queue.Empty:
            child.shutdown()
            raise BridgeTimeoutError(
                f"no info reply within {self.config.handshake_timeout}s")
        if kind == "eof":
            code = child.proc.poll()
            raise BridgeCrashError(f"child exited during handshake (code {code})")
        if kind == "garbage":
            child.shutdown()
            raise BridgeProtocolError(f"malformed info reply: {payload}")
        return BridgeInfo.from_payload(payload)

    def close(self):
        if self._child is not None:
            self._child.shutdown()
            self._child = None

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.close()

    # -- scoring ------------------------------------------------------------

    def score_batch(self, requests: list[tuple[int, str, str]]) -> list[ScoreOutcome]:
        """Score (id, hyp, ref) triples; output order follows request order.

        At most max_batch requests are in flight. A per-id timeout fails only
        that id; a child crash fails all in-flight ids and triggers a single
        restart attempt for the remainder.
        """
        if self.info is None:
            raise BridgeProtocolError("score_batch before handshake")
        with self._lock:
            outcomes = {rid: None for rid, _, _ in requests}
            if len(outcomes) != len(requests):
                raise ValueError("duplicate request ids in batch")
            remaining = list(requests)
            while remaining and any(v is None for v in outcomes.values()):
                remaining = self._pump(remaining, outcomes)
            return [outcomes[rid] for rid, _, _ in requests]

    def _pump(self, pending_requests, outcomes):
        """Run one child lifetime; returns requests to retry after a restart."""
        child = self._child
        if child is None or not child.alive():
            child = self._respawn_or_fail(pending_requests, outcomes)
            if child is None:
                return []
        in_flight: dict[int, tuple[float, tuple[int, str, str]]] = {}
        to_send = list(pending_requests)

        while to_send or in_flight:
            while to_send and len(in_flight) < self.config.max_batch:
                rid, hyp, ref = to_send.pop(0)
                try:
                    child.send({"op": "score", "id": rid, "hyp": hyp, "ref": ref})
                except BridgeCrashError as exc:
                    self._fail_in_flight(in_flight, outcomes, exc)
                    return self._maybe_restart(to_send + [(rid, hyp, ref)],
                                               outcomes)
                in_flight[rid] = (time.monotonic(), (rid, hyp, ref))

            timeout = self._next_deadline(in_flight)
            try:
                kind, payload = child.replies.get(timeout=timeout)
            except queue.Empty:
                self._expire(in_flight, outcomes)
                continue

            if kind == "eof":
                exc = BridgeCrashError(
                    f"child exited (code {child.proc.poll()})")
                self._fail_in_flight(in_flight, outcomes, exc)
                return self._maybe_restart(to_send, outcomes)
            if kind == "garbage":
                log.warning("ignoring malformed reply line: %s", payload)
                self._expire(in_flight, outcomes)
                continue

            rid = payload.get("id")
            if rid not in in_flight:
                log.warning("reply for unknown/expired id %r ignored", rid)
                self._expire(in_flight, outcomes)
                continue
            in_flight.pop(rid)
            outcomes[rid] = self._to_outcome(rid, payload)
            self._expire(in_flight, outcomes)
        return []

    def _to_outcome(self, rid: int, payload: dict) -> ScoreOutcome:
        if "error" in payload:
            return ScoreOutcome(rid, error=ScorerError(
                f"{self.info.name}: {payload['error']}"))
        if "score" not in payload:
            return ScoreOutcome(rid, error=BridgeProtocolError(
                f"reply for id {rid} has neither score nor error"))
        try:
            value = float(payload["score"])
        except (TypeError, ValueError):
            return ScoreOutcome(rid, error=BridgeProtocolError(
                f"non-numeric score for id {rid}: {payload['score']!r}"))
        if self.info.score_range is not None:
            lo, hi = self.info.score_range
            if not (lo <= value <= hi):
                return ScoreOutcome(rid, error=ScoreRangeError(
                    f"{self.info.name} returned {value} outside advertised "
                    f"range [{lo}, {hi}]"))
        return ScoreOutcome(rid, score=value)

    def _next_deadline(self, in_flight) -> float:
        if not in_flight:
            return self.config.request_timeout
        now = time.monotonic()
        deadlines = [sent + self.config.request_timeout for sent, _ in in_flight.values()]
        return max(0.0, min(deadlines) - now)

    def _expire(self, in_flight, outcomes):
        now = time.monotonic()
        for rid in [r for r, (sent, _) in in_flight.items()
                    if now - sent >= self.config.request_timeout]:
            in_flight.pop(rid)
            outcomes[rid] = ScoreOutcome(rid, error=BridgeTimeoutError(
                f"id {rid}: no reply within {self.config.request_timeout}s"))

    def _fail_in_flight(self, in_flight, outcomes, exc):
        for rid in list(in_flight):
            in_flight.pop(rid)
            outcomes[rid] = ScoreOutcome(rid, error=exc)

    def _maybe_restart(self, leftover, outcomes):
        """After a crash: one restart attempt for requests never sent."""
        if self._restarted or not leftover:
            for rid, _, _ in leftover:
                outcomes[rid] = ScoreOutcome(rid, error=BridgeCrashError(
                    "child crashed and restart budget is exhausted"))
            return []
        self._restarted = True
        return leftover

    def _respawn_or_fail(self, pending, outcomes):
        try:
            self._child = _Child(self.config.command)
            self.info = self._handshake(self._child)
            return self._child
        except Exception as exc:
            for rid, _, _ in pending:
                outcomes[rid] = ScoreOutcome(rid, error=BridgeCrashError(
                    f"restart failed: {exc}"))
            return None


def _cache_path(cache_dir: str, metric_name: str) -> str:
    digest = hashlib.sha256(metric_name.encode("utf-8")).hexdigest()[:16]
    return os.path.join(cache_dir, f"bridge-{digest}.jsonl")


class ScoreCache:
    """Per-metric (hyp, ref) -> score cache, optionally persisted as JSONL."""

    def __init__(self, metric_name: str, cache_dir: str | None = None):
        self._mem: dict[tuple[str, str], float] = {}
        self._path = None
        if cache_dir:
            os.makedirs(cache_dir, exist_ok=True)
            self._path = _cache_path(cache_dir, metric_name)
            if os.path.exists(self._path):
                with open(self._path, encoding="utf-8") as fh:
                    for line in fh:
                        try:
                            row = json.loads(line)
                            self._mem[(row["hyp"], row["ref"])] = float(row["score"])
                        except (json.JSONDecodeError, KeyError, ValueError):
                            continue

    def get(self, hyp: str, ref: str) -> float | None:
        return self._mem.get((hyp, ref))

    def put(self, hyp: str, ref: str, score: float):
        key = (hyp, ref)
        if key in self._mem:
            return
        self._mem[key] = score
        if self._path:
            with open(self._path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps({"hyp": hyp, "ref": ref, "score": score},
                                    ensure_ascii=False) + "\n")


class BridgeScorer(Scorer):
    """Scorer backed by a bridge child; scores are cached per (hyp, ref)."""

    single_flight = True

    def __init__(self, config: BridgeConfig, cache_dir: str | None = None):
        self.config = config
        self.client = BridgeClient(config)
        info = self.client.start()
        self.name = info.name
        self.symmetric = info.symmetric
        self.score_range = info.score_range
        self.supports_multi_ref = info.supports_multi_ref
        if cache_dir is None:
            cache_dir = os.environ.get(CACHE_ENV_VAR) or None
        self.cache = ScoreCache(self.name, cache_dir)
        self._next_id = 0

    def close(self):
        self.client.close()

    def score(self, hyp: Text, ref: Text) -> float:
        cached = self.cache.get(hyp.raw, ref.raw)
        if cached is not None:
            return cached
        rid = self._next_id
        self._next_id += 1
        outcome = self.client.score_batch([(rid, hyp.raw, ref.raw)])[0]
        if not outcome.ok:
            raise outcome.error
        self.cache.put(hyp.raw, ref.raw, outcome.score)
        return outcome.score

    def score_pairs(self, pairs: list[tuple[str, str]]) -> list[ScoreOutcome]:
        """Batch raw-string pairs through the child, using the cache."""
        requests = []
        id_for_pair = {}
        for hyp, ref in pairs:
            if self.cache.get(hyp, ref) is None and (hyp, ref) not in id_for_pair:
                rid = self._next_id
                self._next_id += 1
                id_for_pair[(hyp, ref)] = rid
                requests.append((rid, hyp, ref))
        fresh = {o.request_id: o for o in self.client.score_batch(requests)}
        outcomes = []
        for i, (hyp, ref) in enumerate(pairs):
            cached = self.cache.get(hyp, ref)
            if cached is not None:
                outcomes.append(ScoreOutcome(i, score=cached))
                continue
            out = fresh[id_for_pair[(hyp, ref)]]
            if out.ok:
                self.cache.put(hyp, ref, out.score)
                outcomes.append(ScoreOutcome(i, score=out.score))
            else:
                outcomes.append(ScoreOutcome(i, error=out.error))
        return outcomes
