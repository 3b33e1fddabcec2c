"""Deterministic report serialization: JSON always, markdown/CSV on request.

Two runs with identical inputs and seed produce byte-identical JSON, so
reports carry no timestamps; they embed the toolkit version, the seed, the
metric configurations, and sha256 digests of every input file.
"""

from __future__ import annotations

import hashlib
import json

SIGNIFICANCE_ALPHA = 0.01


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def base_report(command: str, seed: int, metrics: list[dict],
                inputs: dict[str, str]) -> dict:
    from . import __version__
    return {
        "tool": {"name": "biaseval", "version": __version__},
        "command": command,
        "seed": seed,
        "metrics": metrics,
        "inputs": inputs,
    }


def to_json_bytes(report: dict) -> bytes:
    return (json.dumps(report, ensure_ascii=False, sort_keys=True, indent=2)
            + "\n").encode("utf-8")


def write_report(report: dict, path) -> None:
    with open(path, "wb") as fh:
        fh.write(to_json_bytes(report))


def _star(p_value: float | None) -> str:
    return "*" if p_value is not None and p_value <= SIGNIFICANCE_ALPHA else ""


def _cell(value: float | None, p_value: float | None = None,
          failed: str | None = None) -> str:
    if failed is not None:
        return "err"
    return f"{value:.2f}{_star(p_value)}"


def assoc_markdown(report: dict) -> str:
    """Rows = test x level, columns = metrics, star at p <= 0.01."""
    metrics = [m["name"] for m in report["metrics"]]
    lines = ["| Test | Level | " + " | ".join(metrics) + " |",
             "|---|---|" + "---|" * len(metrics)]
    for row in report["results"]:
        cells = []
        for name in metrics:
            cell = row["cells"][name]
            cells.append(_cell(cell.get("effect_size"), cell.get("p_value"),
                               cell.get("error")))
        lines.append(f"| {row['test']} | {row['level']} | "
                     + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def prefer_markdown(report: dict) -> str:
    lines = [f"# Preference analysis (N={report['n_qualifying']})", ""]
    lines += ["| Metric | male | female | > | < | = |",
              "|---|---|---|---|---|---|"]
    for row in report["results"]:
        if row.get("empty"):
            lines.append(f"| {row['metric']} | - | - | - | - | - |")
            continue
        lines.append(
            f"| {row['metric']} | {row['male_mean']:.3f} | "
            f"{row['female_mean']:.3f} | {row['prop_gt']:.2f} | "
            f"{row['prop_lt']:.2f} | {row['prop_eq']:.2f} |")
    return "\n".join(lines) + "\n"


def correlate_markdown(report: dict) -> str:
    lines = ["| Metric | Dimension | origin | swap | delta |",
             "|---|---|---|---|---|"]
    for row in report["results"]:
        if row.get("error"):
            lines.append(f"| {row['metric']} | {row['dimension']} | err | err | - |")
            continue
        lines.append(
            f"| {row['metric']} | {row['dimension']} | "
            f"{row['origin']['rho']:.3f}{_star(row['origin']['p_value'])} | "
            f"{row['swap']['rho']:.3f}{_star(row['swap']['p_value'])} | "
            f"{row['delta']:+.3f} |")
    return "\n".join(lines) + "\n"


def topk_csv(rows: list[dict]) -> str:
    """Plot-ready series: metric,k,rho_origin,rho_swap per line."""
    lines = ["metric,k,rho_origin,rho_swap"]
    for row in rows:
        lines.append(f"{row['metric']},{row['k']},"
                     f"{row['rho_origin']:.6f},{row['rho_swap']:.6f}")
    return "\n".join(lines) + "\n"


def render(report: dict, fmt: str) -> str:
    renderers = {"assoc": assoc_markdown, "prefer": prefer_markdown,
                 "correlate": correlate_markdown}
    command = report.get("command")
    if fmt == "markdown" and command in renderers:
        return renderers[command](report)
    if fmt == "csv" and command == "correlate" and "topk" in report:
        return topk_csv(report["topk"])
    raise ValueError(f"no {fmt} renderer for {command!r} reports")
