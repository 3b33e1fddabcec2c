"""Batch command-line front-end: assoc, swap, prefer, correlate, report."""

from __future__ import annotations

import hashlib
import json
import shlex
import sys

import click

from . import assoc as assoc_mod
from . import metaeval as me
from . import reporting
from .bridge import BridgeConfig, BridgeScorer
from .errors import BiasEvalError
from .genderswap import GenderLexicon, default_lexicon, swap_dataset
from .metrics import available_metrics, make_scorer
from .metrics.embedding import load_embeddings
from .metrics.ngram import IdfTable, load_synonyms


def _load_lexicon(path) -> GenderLexicon:
    return GenderLexicon.load(path) if path else default_lexicon()


def _build_scorers(metric_names, embeddings_path, idf_path, synonyms_path,
                   bridge_cmds):
    store = load_embeddings(embeddings_path) if embeddings_path else None
    idf = IdfTable.load(idf_path) if idf_path else None
    synonyms = load_synonyms(synonyms_path) if synonyms_path else None
    scorers = [make_scorer(name, embeddings=store, idf=idf, synonyms=synonyms)
               for name in metric_names]
    for cmd in bridge_cmds:
        scorers.append(BridgeScorer(BridgeConfig(command=shlex.split(cmd))))
    return scorers


def _metric_configs(scorers) -> list[dict]:
    return [s.describe() for s in scorers]


def _input_digests(**paths) -> dict:
    """sha256 per named input file; None-valued entries are skipped."""
    return {f"{label}:{path}": reporting.file_digest(path)
            for label, path in paths.items() if path}


metrics_opt = click.option(
    "--metrics", default="", metavar="NAMES",
    help="Comma-separated native metrics, e.g. bleu-4,rouge-1,rouge-l. "
         f"Available: {', '.join(available_metrics())}.")
bridge_opt = click.option(
    "--bridge", "bridges", multiple=True, metavar="CMDLINE",
    help="Bridge child command line exposing an external metric (repeatable).")
seed_opt = click.option("--seed", default=0, show_default=True)
out_opt = click.option("--out", required=True, type=click.Path(),
                       help="Output path for the JSON report.")
format_opt = click.option("--format", "fmt",
                          type=click.Choice(["json", "markdown", "csv"]),
                          default="json", show_default=True)
embeddings_opt = click.option("--embeddings", type=click.Path(exists=True),
                              default=None, help="Word-vector text file.")
idf_opt = click.option("--idf", type=click.Path(exists=True), default=None,
                       help="Idf table (JSON) for CIDEr.")
synonyms_opt = click.option("--synonyms", type=click.Path(exists=True),
                            default=None, help="Synonym table for METEOR.")
lexicon_opt = click.option("--lexicon", type=click.Path(exists=True),
                           default=None,
                           help="Gender lexicon JSON (default: bundled).")


@click.group()
def main():
    """Audit social bias in reference-based text-generation metrics."""


def _parse_metric_names(metrics: str) -> list[str]:
    return [m.strip() for m in metrics.split(",") if m.strip()]


def _emit(report: dict, out, fmt: str):
    reporting.write_report(report, out)
    if fmt != "json":
        try:
            rendered = reporting.render(report, fmt)
        except ValueError as exc:
            raise click.ClickException(str(exc))
        side = f"{out}.{'md' if fmt == 'markdown' else 'csv'}"
        with open(side, "w", encoding="utf-8") as fh:
            fh.write(rendered)
        click.echo(rendered, nl=False)


@main.command()
@click.option("--tests", default="", metavar="NAMES",
              help="Comma-separated bundled test names or spec file paths "
                   "(default: all bundled tests).")
@click.option("--level", default=None,
              type=click.Choice(["word", "sentence", "sentence_unbleached"]),
              help="Restrict to one level.")
@metrics_opt
@bridge_opt
@embeddings_opt
@idf_opt
@synonyms_opt
@seed_opt
@format_opt
@out_opt
def assoc(tests, level, metrics, bridges, embeddings, idf, synonyms, seed,
          fmt, out):
    """Run association tests (s, permutation p, effect size) per metric."""
    names = _parse_metric_names(tests) or assoc_mod.bundled_test_names()
    inputs = _input_digests(embeddings=embeddings, idf=idf, synonyms=synonyms)
    specs = []
    for name in names:
        if name.endswith(".json"):
            specs.append(assoc_mod.load_test_spec(name))
            inputs[f"test:{name}"] = reporting.file_digest(name)
        else:
            spec = assoc_mod.load_bundled_test(name)
            specs.append(spec)
            blob = json.dumps(spec.to_dict(), sort_keys=True).encode("utf-8")
            inputs[f"test:{name}"] = hashlib.sha256(blob).hexdigest()
    if level:
        specs = [s for s in specs if s.level == level]
    if not specs:
        raise click.ClickException("no tests selected")
    scorers = _build_scorers(_parse_metric_names(metrics), embeddings, idf,
                             synonyms, bridges)
    if not scorers:
        raise click.ClickException("no metrics selected")

    results = []
    failures = 0
    for spec in specs:
        cells = {}
        for scorer in scorers:
            try:
                res = assoc_mod.run_association_test(spec, scorer, seed=seed)
                cells[scorer.name] = res.to_dict()
            except BiasEvalError as exc:
                failures += 1
                cells[scorer.name] = {"error": str(exc)}
        results.append({"test": spec.name, "level": spec.level,
                        "variant": spec.variant, "cells": cells})

    report = reporting.base_report("assoc", seed, _metric_configs(scorers),
                                   inputs)
    report["results"] = results
    _emit(report, out, fmt)
    if failures:
        click.echo(f"{failures} cell(s) failed", err=True)
        sys.exit(1)


@main.command()
@click.argument("input_path", type=click.Path(exists=True))
@click.argument("output_path", type=click.Path())
@lexicon_opt
@click.option("--audit", "audit_path", type=click.Path(), default=None,
              help="Where to write the replacement log (default: OUTPUT.audit.log).")
def swap(input_path, output_path, lexicon, audit_path):
    """Gender-swap every hypothesis and reference of a dataset file."""
    lex = _load_lexicon(lexicon)
    dataset = me.load_dataset(input_path)
    swapped = swap_dataset(dataset, lex)
    swapped.save(output_path)
    audit_path = audit_path or f"{output_path}.audit.log"
    n_lines = 0
    with open(audit_path, "w", encoding="utf-8") as fh:
        for example_id, system_id, part, rep in swapped.swap_audit:
            for pos, old, new, rule in rep.replacements:
                fh.write(f"{example_id}\t{system_id}\t{part}\t{pos}\t"
                         f"{old} -> {new}\t{rule}\n")
                n_lines += 1
    click.echo(f"{n_lines} replacements -> {audit_path}")


@main.command()
@click.argument("dataset_path", type=click.Path(exists=True))
@metrics_opt
@bridge_opt
@embeddings_opt
@idf_opt
@synonyms_opt
@lexicon_opt
@click.option("--mode", default="max", show_default=True,
              type=click.Choice(["max", "mean", "native", "both"]),
              help='"both" reports -max and -mean rows for metrics without '
                   "native multi-reference support.")
@seed_opt
@format_opt
@out_opt
def prefer(dataset_path, metrics, bridges, embeddings, idf, synonyms,
           lexicon, mode, seed, fmt, out):
    """Male vs gender-swapped hypothesis preference on neutral references."""
    lex = _load_lexicon(lexicon)
    dataset = me.load_dataset(dataset_path)
    scorers = _build_scorers(_parse_metric_names(metrics), embeddings, idf,
                             synonyms, bridges)
    if not scorers:
        raise click.ClickException("no metrics selected")

    results = []
    n_qualifying = None
    for scorer in scorers:
        for label, use_mode in _expand_modes(scorer, mode):
            rep = me.preference_analysis(dataset, scorer, lex, mode=use_mode)
            n_qualifying = rep.n
            results.append({"metric": label, "mode": use_mode, "n": rep.n,
                            "empty": rep.empty,
                            "male_mean": rep.male_mean,
                            "female_mean": rep.female_mean,
                            "prop_gt": rep.prop_gt, "prop_lt": rep.prop_lt,
                            "prop_eq": rep.prop_eq})

    report = reporting.base_report(
        "prefer", seed, _metric_configs(scorers),
        _input_digests(dataset=dataset_path, lexicon=lexicon,
                       embeddings=embeddings, idf=idf, synonyms=synonyms))
    report["n_qualifying"] = n_qualifying
    report["results"] = results
    _emit(report, out, fmt)


def _expand_modes(scorer, mode):
    if mode != "both":
        yield scorer.name, mode
    elif scorer.supports_multi_ref:
        yield scorer.name, "native"
    else:
        yield f"{scorer.name}-max", "max"
        yield f"{scorer.name}-mean", "mean"


@main.command()
@click.argument("dataset_path", type=click.Path(exists=True))
@click.option("--dimension", "dimensions", multiple=True,
              help="Human dimension(s) to correlate (default: all).")
@click.option("--level", default="example", show_default=True,
              type=click.Choice(["example", "system"]))
@click.option("--filter", "which", default="all", show_default=True,
              type=click.Choice(["all", "male_only"]),
              help="Example-level record filter on the original hypotheses.")
@click.option("--mode", default="max", show_default=True,
              type=click.Choice(["max", "mean", "native"]))
@click.option("--topk", default="", metavar="KS",
              help="Comma-separated top-k system counts for the curve CSV.")
@metrics_opt
@bridge_opt
@embeddings_opt
@idf_opt
@synonyms_opt
@lexicon_opt
@seed_opt
@format_opt
@out_opt
def correlate(dataset_path, dimensions, level, which, mode, topk, metrics,
              bridges, embeddings, idf, synonyms, lexicon, seed, fmt, out):
    """Origin vs gender-swapped metric-human correlation (plus top-k curves)."""
    lex = _load_lexicon(lexicon)
    dataset = me.load_dataset(dataset_path)
    dims = list(dimensions) or dataset.dimensions
    scorers = _build_scorers(_parse_metric_names(metrics), embeddings, idf,
                             synonyms, bridges)
    if not scorers:
        raise click.ClickException("no metrics selected")
    k_values = [int(k) for k in topk.split(",") if k.strip()]

    results = []
    topk_rows = []
    for scorer in scorers:
        for dim in dims:
            try:
                origin, swapped, delta = me.compare_origin_swap(
                    dataset, scorer, dim, mode, level, lex, which=which,
                    seed=seed)
            except BiasEvalError as exc:
                results.append({"metric": scorer.name, "dimension": dim,
                                "error": str(exc)})
                continue
            results.append({
                "metric": scorer.name, "dimension": dim,
                "origin": {"rho": origin.rho, "p_value": origin.p_value,
                           "n": origin.n},
                "swap": {"rho": swapped.rho, "p_value": swapped.p_value,
                         "n": swapped.n},
                "delta": delta,
            })
            if k_values and level == "system":
                swapped_ds = swap_dataset(dataset, lex)
                origin_curve = me.topk_system_curve(
                    dataset, scorer, dim, mode, k_values, seed=seed)
                swap_curve = me.topk_system_curve(
                    swapped_ds, scorer, dim, mode, k_values, seed=seed)
                for (k, rho_o), (_, rho_s) in zip(origin_curve, swap_curve):
                    topk_rows.append({"metric": scorer.name, "dimension": dim,
                                      "k": k, "rho_origin": rho_o,
                                      "rho_swap": rho_s})

    report = reporting.base_report(
        "correlate", seed, _metric_configs(scorers),
        _input_digests(dataset=dataset_path, lexicon=lexicon,
                       embeddings=embeddings, idf=idf, synonyms=synonyms))
    report["level"] = level
    report["filter"] = which
    report["mode"] = mode
    report["results"] = results
    if topk_rows:
        report["topk"] = topk_rows
    _emit(report, out, fmt)


@main.command()
@click.argument("report_path", type=click.Path(exists=True))
@click.option("--format", "fmt", default="markdown", show_default=True,
              type=click.Choice(["markdown", "csv"]))
@click.option("--out", default=None, type=click.Path(),
              help="Write here instead of stdout.")
def report(report_path, fmt, out):
    """Re-render a JSON report as markdown or CSV."""
    with open(report_path, encoding="utf-8") as fh:
        payload = json.load(fh)
    rendered = reporting.render(payload, fmt)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(rendered)
    else:
        click.echo(rendered, nl=False)


if __name__ == "__main__":
    main()
