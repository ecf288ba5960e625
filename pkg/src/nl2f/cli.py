"""Command-line interface wiring the full pipeline:

filter -> annotate -> validate -> partition/select/stats -> export -> evaluate -> analyze

Every mutating command writes a run manifest next to its output so runs
against mock endpoints (or a warm cache) can be replayed byte-identically.
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

import click
import yaml

from . import __version__
from .compare import MatchConfig
from .errors import Nl2fError
from .formulas import load_deprecated_list
from .gateway import ChatModelSpec, DEFAULT_PREVIEW_ROWS, Gateway, generate_utterance
from .formulas import parse_formula
from .runner import DEFAULT_MEMORY_MB, DEFAULT_TIMEOUT_MS, ProgramRunner
from .tables import load_corpus, save_corpus
from . import datasets, evalharness, validators


def _load_config(path):
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        return yaml.safe_load(fh) or {}


def _model_spec(config, model=None, temperature=None, n=None) -> ChatModelSpec:
    cfg = config.get("model", {})
    endpoint = cfg.get("endpoint")
    if endpoint is None:
        raise Nl2fError("no model endpoint configured (set model.endpoint in config)")
    return ChatModelSpec(
        endpoint=endpoint,
        model=model or cfg.get("name", "default"),
        temperature=cfg.get("temperature", 0.0) if temperature is None else temperature,
        n=cfg.get("n", 1) if n is None else n,
        max_tokens=cfg.get("max_tokens", 1024),
        api_key_env=cfg.get("api_key_env", "NL2F_API_KEY"),
    )


def _match_config(config, num_tol=None, str_coef=None, strict_strings=False) -> MatchConfig:
    cfg = config.get("comparator", {})
    return MatchConfig(
        num_tol=cfg.get("num_tol", 0.05) if num_tol is None else num_tol,
        str_coef=cfg.get("str_coef", 0.8) if str_coef is None else str_coef,
        strict_strings=strict_strings or cfg.get("strict_strings", False),
        contiguous=cfg.get("contiguous", True),
    )


def _gateway(config) -> Gateway:
    return Gateway(cache_dir=config.get("cache_dir"))


def _file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(out_path, inputs, outputs, seed, config_path):
    manifest = {
        "command": sys.argv,
        "tool_version": __version__,
        "config_hash": _file_hash(config_path) if config_path else None,
        "inputs": {str(p): _file_hash(p) for p in inputs},
        "outputs": {str(p): _file_hash(p) for p in outputs},
        "seed": seed,
    }
    path = Path(str(out_path) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _fail(message):
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="YAML config file (endpoint, tolerances, limits).")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for all randomized operations.")
@click.pass_context
def main(ctx, config_path, seed):
    """Validate synthetic formula annotations and evaluate formula models."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    ctx.obj["config"] = _load_config(config_path)
    ctx.obj["seed"] = seed


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--deprecated-list", type=click.Path(exists=True), default=None,
              help="Deprecated-function list, one name per line.")
@click.option("--dropped-out", type=click.Path(), default=None,
              help="Also write dropped examples (with reasons) to this file.")
@click.pass_context
def filter(ctx, corpus_path, out_path, deprecated_list, dropped_out):
    """Drop unparseable, deprecated, non-derived and all-empty formulas."""
    try:
        corpus = load_corpus(corpus_path)
        deprecated = (
            load_deprecated_list(deprecated_list) if deprecated_list else None
        )
        kept, dropped = datasets.filter_corpus(corpus, deprecated)
        save_corpus(kept, out_path)
        reasons = {}
        for _, reason, _ in dropped:
            reasons[reason] = reasons.get(reason, 0) + 1
        if dropped_out:
            save_corpus(
                [e.with_provenance(drop_reason=r) for e, r, _ in dropped], dropped_out
            )
        click.echo(f"kept {len(kept)}, dropped {len(dropped)}: {json.dumps(reasons, sort_keys=True)}")
        _write_manifest(out_path, [corpus_path], [out_path], ctx.obj["seed"],
                        ctx.obj["config_path"])
    except Nl2fError as exc:
        _fail(exc)


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--model", default=None)
@click.option("--max-rows", type=int, default=DEFAULT_PREVIEW_ROWS, show_default=True)
@click.pass_context
def annotate(ctx, corpus_path, out_path, model, max_rows):
    """Generate a natural-language utterance for every example."""
    config = ctx.obj["config"]
    try:
        corpus = load_corpus(corpus_path)
        gateway = _gateway(config)
        spec = _model_spec(config, model=model,
                           temperature=config.get("annotate_temperature", 0.7), n=1)
        annotated = []
        for example in corpus:
            ast = parse_formula(example.formula_text)
            utterance = generate_utterance(
                gateway, spec, example.table, ast, max_rows=max_rows
            )
            annotated.append(example.with_utterance(utterance))
        save_corpus(annotated, out_path)
        _write_manifest(out_path, [corpus_path], [out_path], ctx.obj["seed"],
                        ctx.obj["config_path"])
    except Nl2fError as exc:
        _fail(exc)


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--validators", "which", default="VO,VP,VC", show_default=True,
              help="Comma-separated validator ids.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--model", default=None)
@click.option("--runner-cmd", default=None,
              help="Command invoking the external program runner (needed for VP).")
@click.option("--num-tol", type=float, default=None, help="Numeric tolerance (default 0.05).")
@click.option("--str-coef", type=float, default=None, help="Substring coefficient (default 0.8).")
@click.option("--strict-strings", is_flag=True, default=False)
@click.option("--max-rows", type=int, default=DEFAULT_PREVIEW_ROWS, show_default=True)
@click.pass_context
def validate(ctx, corpus_path, which, out_path, model, runner_cmd, num_tol,
             str_coef, strict_strings, max_rows):
    """Run the requested validators over an annotated corpus."""
    config = ctx.obj["config"]
    try:
        corpus = load_corpus(corpus_path)
        which_ids = [w.strip().upper() for w in which.split(",") if w.strip()]
        runner = None
        runner_cmd = runner_cmd or config.get("runner_cmd")
        if runner_cmd:
            runner = ProgramRunner(
                runner_cmd,
                timeout_ms=config.get("runner_timeout_ms", DEFAULT_TIMEOUT_MS),
                memory_mb=config.get("runner_memory_mb", DEFAULT_MEMORY_MB),
            )
        validated = validators.run_validation(
            corpus,
            which_ids,
            _gateway(config),
            _model_spec(config, model=model, temperature=0.0, n=1),
            runner=runner,
            match_config=_match_config(config, num_tol, str_coef, strict_strings),
            max_rows=max_rows,
        )
        save_corpus(validated, out_path)
        _write_manifest(out_path, [corpus_path], [out_path], ctx.obj["seed"],
                        ctx.obj["config_path"])
    except Nl2fError as exc:
        _fail(exc)


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Also write machine-readable stats to this file.")
@click.pass_context
def stats(ctx, corpus_path, out_path):
    """Print subset characteristics (size, functions, calls, depth, ops)."""
    try:
        corpus = load_corpus(corpus_path)
        result = datasets.subset_stats(corpus)
        click.echo(f"size:              {result.size}")
        click.echo(f"unique functions:  {result.unique_function_count}")
        if result.size:
            click.echo(f"avg calls:         {result.avg_function_calls:.2f}")
            click.echo(f"avg depth:         {result.avg_depth:.2f}")
            click.echo(f"avg operators:     {result.avg_operator_count:.2f}")
            for metric, buckets in result.histograms.items():
                row = "  ".join(f"{b}:{c}" for b, c in buckets.items())
                click.echo(f"{metric:16} {row}")
        if out_path:
            Path(out_path).write_text(
                json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n",
                encoding="utf-8",
            )
    except Nl2fError as exc:
        _fail(exc)


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_context
def partition(ctx, corpus_path, out_path):
    """Report the 8-region overlap of the three validators' accept sets."""
    try:
        corpus = load_corpus(corpus_path)
        result = datasets.overlap_partition(corpus)
        click.echo(json.dumps(result.to_dict(), indent=2, sort_keys=True))
        if out_path:
            Path(out_path).write_text(
                json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n",
                encoding="utf-8",
            )
    except Nl2fError as exc:
        _fail(exc)


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--expr", required=True,
              help='Selector, e.g. "accepted(VP) & accepted(VC)" or "rejected(VO)".')
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def select(ctx, corpus_path, expr, out_path):
    """Write the subset of examples matching a selector expression."""
    try:
        corpus = load_corpus(corpus_path)
        selected = datasets.select_subset(corpus, expr)
        save_corpus(selected, out_path)
        click.echo(f"selected {len(selected)} of {len(corpus)}")
        _write_manifest(out_path, [corpus_path], [out_path], ctx.obj["seed"],
                        ctx.obj["config_path"])
    except Nl2fError as exc:
        _fail(exc)


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--size", required=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def subsample(ctx, corpus_path, size, out_path):
    """Seeded uniform subsample preserving corpus order."""
    try:
        corpus = load_corpus(corpus_path)
        sampled = datasets.subsample(corpus, size, ctx.obj["seed"])
        save_corpus(sampled, out_path)
        _write_manifest(out_path, [corpus_path], [out_path], ctx.obj["seed"],
                        ctx.obj["config_path"])
    except Nl2fError as exc:
        _fail(exc)


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--splits", default=None,
              help="Comma-separated split sizes; default is everything in train.")
@click.option("--out-dir", required=True, type=click.Path())
@click.pass_context
def export(ctx, corpus_path, splits, out_dir):
    """Export prompt/completion fine-tuning files."""
    try:
        corpus = load_corpus(corpus_path)
        sizes = (
            [int(s) for s in splits.split(",")] if splits else [len(corpus)]
        )
        paths = datasets.export_finetune_files(corpus, sizes, out_dir)
        for path in paths:
            click.echo(str(path))
        _write_manifest(Path(out_dir) / "export", [corpus_path], paths,
                        ctx.obj["seed"], ctx.obj["config_path"])
    except Nl2fError as exc:
        _fail(exc)


@main.command()
@click.option("--tasks", "tasks_path", required=True, type=click.Path(exists=True))
@click.option("--model", default=None)
@click.option("--n", type=int, default=10, show_default=True)
@click.option("--temp", "temperature", type=float, default=0.6, show_default=True)
@click.option("--k", "k_list", multiple=True, type=int, default=(5,), show_default=True)
@click.option("--scoring", type=click.Choice(["estimator", "first-k"]),
              default="estimator", show_default=True)
@click.option("--num-tol", type=float, default=None)
@click.option("--str-coef", type=float, default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def evaluate(ctx, tasks_path, model, n, temperature, k_list, scoring, num_tol,
             str_coef, out_path):
    """Run the execution-match benchmark and report mean pass@k."""
    config = ctx.obj["config"]
    try:
        tasks = evalharness.load_tasks(tasks_path)
        report = evalharness.run_benchmark(
            _gateway(config),
            _model_spec(config, model=model),
            tasks,
            n=n,
            temperature=temperature,
            k_list=tuple(k_list),
            scoring=scoring,
            match_config=_match_config(config, num_tol, str_coef),
        )
        report.save(out_path)
        for k, score in sorted(report.pass_at_k.items()):
            click.echo(f"pass@{k}: {score:.4f}")
        if report.failed_task_ids:
            click.echo(f"warning: {len(report.failed_task_ids)} task(s) failed transport", err=True)
        if report.unevaluable_task_ids:
            click.echo(f"warning: {len(report.unevaluable_task_ids)} task(s) unevaluable", err=True)
        _write_manifest(out_path, [tasks_path], [out_path], ctx.obj["seed"],
                        ctx.obj["config_path"])
    except Nl2fError as exc:
        _fail(exc)


@main.group()
def analyze():
    """Analytics over saved benchmark reports."""


@analyze.command()
@click.option("--report", "report_path", required=True, type=click.Path(exists=True))
@click.option("--tasks", "tasks_path", required=True, type=click.Path(exists=True))
def solved(report_path, tasks_path):
    """Metrics of gold formulas for tasks with at least one correct sample."""
    try:
        report = evalharness.BenchmarkReport.load(report_path)
        tasks = evalharness.load_tasks(tasks_path)
        result = evalharness.solved_case_analysis(report, tasks)
        click.echo(json.dumps(result.to_dict(), indent=2, sort_keys=True))
    except Nl2fError as exc:
        _fail(exc)


@analyze.command()
@click.option("--base-report", required=True, type=click.Path(exists=True))
@click.option("--ft-report", required=True, type=click.Path(exists=True))
@click.option("--removed", required=True,
              help="Comma-separated function names removed during validation.")
def recovered(base_report, ft_report, removed):
    """Removed functions the fine-tuned model emits but the base did not."""
    try:
        base = evalharness.BenchmarkReport.load(base_report)
        ft = evalharness.BenchmarkReport.load(ft_report)
        names = evalharness.recovered_functions(
            base, ft, {r.strip() for r in removed.split(",") if r.strip()}
        )
        click.echo(json.dumps(sorted(names)))
    except Nl2fError as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
