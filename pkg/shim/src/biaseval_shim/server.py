"""Request loop: one JSON object per line on stdin, one reply per line on
stdout, flushed immediately. A bad request yields an error reply, never a
crash; `shutdown` ends the loop."""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass

from .registry import ShimMetric, resolve


@dataclass
class ModelConfig:
    model: str | None = None
    batch_size: int = 8


def _write(stream, payload: dict) -> None:
    stream.write(json.dumps(payload, ensure_ascii=False,
                            separators=(",", ":")) + "\n")
    stream.flush()


class ShimServer:
    def __init__(self, metric: ShimMetric, config: ModelConfig):
        self.metric = metric
        self.config = config
        self._scorer = None

    def _score(self, hyp: str, ref: str) -> float:
        if self._scorer is None:
            # lazy: model assets load at the first score request so that
            # `info` is instant even for heavyweight metrics
            self._scorer = self.metric.factory(self.config)
        return float(self._scorer(hyp, ref))

    def handle_line(self, line: str, out) -> bool:
        """Process one request line; returns False when the loop should end."""
        line = line.strip()
        if not line:
            return True
        try:
            req = json.loads(line)
            if not isinstance(req, dict):
                raise ValueError("request is not an object")
        except (json.JSONDecodeError, ValueError) as exc:
            _write(out, {"id": None, "error": f"bad request: {exc}"})
            return True

        op = req.get("op")
        if op == "info":
            _write(out, self.metric.info_payload())
            return True
        if op == "shutdown":
            return False
        if op == "score":
            rid = req.get("id")
            try:
                hyp = req["hyp"]
                ref = req["ref"]
                if not isinstance(hyp, str) or not isinstance(ref, str):
                    raise TypeError("hyp and ref must be strings")
                _write(out, {"id": rid, "score": self._score(hyp, ref)})
            except Exception as exc:  # never crash the loop on one request
                _write(out, {"id": rid, "error": str(exc)})
            return True
        _write(out, {"id": req.get("id"), "error": f"unknown op {op!r}"})
        return True

    def run(self, stdin=None, stdout=None) -> None:
        stdin = stdin or sys.stdin
        stdout = stdout or sys.stdout
        for line in stdin:
            if not self.handle_line(line, stdout):
                break


def serve(metric_name: str, config: ModelConfig | None = None,
          stdin=None, stdout=None) -> None:
    """Serve one metric until shutdown or EOF."""
    metric = resolve(metric_name)
    ShimServer(metric, config or ModelConfig()).run(stdin, stdout)
