"""Metric registry: name -> (info fields, scoring callable factory).

Test shims (constant, exact) are pure Python. Model-based metrics declare
their backend imports up front so `info` can report unavailability, but only
load weights at the first score request.
"""

from __future__ import annotations

import importlib.util
from dataclasses import dataclass, field
from typing import Callable


@dataclass
class ShimMetric:
    """One servable metric: static info plus a lazy scorer factory."""

    name: str
    symmetric: bool
    score_range: tuple[float, float] | None
    supports_multi_ref: bool = False
    model: str | None = None  # checkpoint recorded in the info reply
    requires: tuple[str, ...] = ()
    # factory(config) -> callable(hyp, ref) -> float; called lazily once
    factory: Callable = None

    def missing_backends(self) -> list[str]:
        return [mod for mod in self.requires
                if importlib.util.find_spec(mod) is None]

    def info_payload(self) -> dict:
        payload = {
            "name": self.name,
            "symmetric": self.symmetric,
            "score_range": list(self.score_range) if self.score_range else None,
            "supports_multi_ref": self.supports_multi_ref,
        }
        if self.model:
            payload["model"] = self.model
        missing = self.missing_backends()
        if missing:
            payload["error"] = ("backend module(s) not installed: "
                                + ", ".join(missing))
        return payload


def _constant_factory(config):
    return lambda hyp, ref: 0.5


def _exact_factory(config):
    return lambda hyp, ref: 1.0 if hyp == ref else 0.0


def build_registry() -> dict[str, ShimMetric]:
    from . import models
    return {m.name: m for m in [
        ShimMetric(name="constant", symmetric=True, score_range=(0.5, 0.5),
                   factory=_constant_factory),
        ShimMetric(name="exact", symmetric=True, score_range=(0.0, 1.0),
                   factory=_exact_factory),
        ShimMetric(name="bertscore", symmetric=True, score_range=(-1.0, 1.0),
                   model="roberta-large",
                   requires=("torch", "transformers", "numpy"),
                   factory=models.bertscore_factory),
        ShimMetric(name="moverscore", symmetric=False, score_range=None,
                   model="bert-base-uncased",
                   requires=("torch", "transformers", "numpy", "scipy"),
                   factory=models.moverscore_factory),
        ShimMetric(name="bleurt", symmetric=False, score_range=None,
                   model="Elron/bleurt-base-512",
                   requires=("torch", "transformers"),
                   factory=models.bleurt_factory),
        ShimMetric(name="bartscore", symmetric=False, score_range=None,
                   model="facebook/bart-large-cnn",
                   requires=("torch", "transformers"),
                   factory=models.bartscore_factory),
    ]}


def resolve(metric_name: str) -> ShimMetric:
    registry = build_registry()
    if metric_name not in registry:
        raise KeyError(
            f"unknown metric {metric_name!r}; available: "
            + ", ".join(sorted(registry)))
    return registry[metric_name]
