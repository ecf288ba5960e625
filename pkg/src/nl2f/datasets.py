"""Corpus filtering, subset statistics, validator-overlap partitioning,
set algebra over verdicts, subsampling, and fine-tuning file export."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import FormulaSyntaxError, Nl2fError
from .formulas import (
    formula_metrics,
    is_derived_column,
    parse_formula,
    uses_deprecated_function,
)
from .gateway import DEFAULT_PREVIEW_ROWS, render_table_preview
from .interp import evaluate_formula

HISTOGRAM_BUCKETS = ("0", "1", "2", "3", "4", ">=5")

DROP_UNPARSEABLE = "unparseable"
DROP_DEPRECATED = "deprecated-function"
DROP_ALL_EMPTY = "all-empty-output"
DROP_NOT_DERIVED = "not-derived-column"


def default_deprecated_functions() -> frozenset:
    text = resources.files("nl2f").joinpath("data/deprecated_functions.txt").read_text(
        encoding="utf-8"
    )
    return frozenset(
        line.strip().upper()
        for line in text.splitlines()
        if line.strip() and not line.startswith("#")
    )


def filter_corpus(raw, deprecated=None):
    """Split a raw corpus into (kept, dropped-with-reason) lists.

    Drop reasons, in check order: unparseable formula, deprecated
    function use, non-derived-column reference, all rows evaluating to
    blank/error.
    """
    if deprecated is None:
        deprecated = default_deprecated_functions()
    kept = []
    dropped = []
    for example in raw:
        try:
            ast = parse_formula(example.formula_text)
        except FormulaSyntaxError as exc:
            dropped.append((example, DROP_UNPARSEABLE, str(exc)))
            continue
        if uses_deprecated_function(ast, deprecated):
            dropped.append((example, DROP_DEPRECATED, ""))
            continue
        if not is_derived_column(ast, example.table):
            dropped.append((example, DROP_NOT_DERIVED, ""))
            continue
        outcome = evaluate_formula(ast, example.table)
        if outcome.all_errors_or_blank:
            dropped.append((example, DROP_ALL_EMPTY, ""))
            continue
        kept.append(example)
    return kept, dropped


def _bucket(value) -> str:
    idx = int(round(value))
    return HISTOGRAM_BUCKETS[idx] if idx < 5 else ">=5"


@dataclass(frozen=True)
class SubsetStats:
    size: int
    unique_function_count: int
    avg_function_calls: float | None
    avg_depth: float | None
    avg_operator_count: float | None
    histograms: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "unique_function_count": self.unique_function_count,
            "avg_function_calls": self.avg_function_calls,
            "avg_depth": self.avg_depth,
            "avg_operator_count": self.avg_operator_count,
            "histograms": self.histograms,
        }


def stats_from_formulas(formulas) -> SubsetStats:
    metrics = [formula_metrics(parse_formula(f)) for f in formulas]
    size = len(metrics)
    if size == 0:
        return SubsetStats(0, 0, None, None, None, {})
    functions = set()
    for m in metrics:
        functions |= m.unique_functions
    histograms = {
        name: {b: 0 for b in HISTOGRAM_BUCKETS}
        for name in ("function_calls", "depth", "operators")
    }
    for m in metrics:
        histograms["function_calls"][_bucket(m.function_call_count)] += 1
        histograms["depth"][_bucket(m.depth)] += 1
        histograms["operators"][_bucket(m.operator_count)] += 1
    return SubsetStats(
        size=size,
        unique_function_count=len(functions),
        avg_function_calls=sum(m.function_call_count for m in metrics) / size,
        avg_depth=sum(m.depth for m in metrics) / size,
        avg_operator_count=sum(m.operator_count for m in metrics) / size,
        histograms=histograms,
    )


def subset_stats(examples) -> SubsetStats:
    return stats_from_formulas([e.formula_text for e in examples])


def unique_functions(examples) -> set:
    names = set()
    for e in examples:
        names |= formula_metrics(parse_formula(e.formula_text)).unique_functions
    return names


@dataclass(frozen=True)
class OverlapPartition:
    """Counts over the 8 acceptance-signature regions (bit order VO,VP,VC)."""

    region_counts: dict
    excluded: int

    @property
    def total(self) -> int:
        return sum(self.region_counts.values())

    def validator_total(self, validator_id: str) -> int:
        bit = {"VO": 0, "VP": 1, "VC": 2}[validator_id]
        return sum(
            count for sig, count in self.region_counts.items() if sig[bit] == "1"
        )

    @property
    def none_pass(self) -> int:
        return self.region_counts["000"]

    @property
    def all_pass(self) -> int:
        return self.region_counts["111"]

    def to_dict(self) -> dict:
        return {
            "regions": dict(sorted(self.region_counts.items())),
            "excluded": self.excluded,
            "totals": {vid: self.validator_total(vid) for vid in ("VO", "VP", "VC")},
            "none_pass": self.none_pass,
        }


def overlap_partition(corpus) -> OverlapPartition:
    """Assign each fully-judged example to one of 8 signature regions.

    Examples missing any of the three verdicts are excluded and counted,
    never guessed.
    """
    counts = {f"{i:03b}": 0 for i in range(8)}
    excluded = 0
    for example in corpus:
        verdicts = example.verdicts
        if not all(vid in verdicts for vid in ("VO", "VP", "VC")):
            excluded += 1
            continue
        signature = "".join(
            "1" if verdicts[vid].accepted else "0" for vid in ("VO", "VP", "VC")
        )
        counts[signature] += 1
    return OverlapPartition(counts, excluded)


def select_subset(corpus, expr: str) -> list:
    """Evaluate a selector expression over the corpus.

    The expression combines ``accepted(V)``, ``rejected(V)`` and ``raw``
    with ``&`` and ``|``, e.g. ``accepted(VP) & accepted(VC)``.
    Examples lacking a verdict for a referenced validator belong to
    neither its accepted nor its rejected set.
    """
    by_id = {e.id: e for e in corpus}

    def verdict_set(validator_id: str, want: bool):
        if validator_id not in ("VO", "VP", "VC"):
            raise Nl2fError(f"unknown validator {validator_id!r}")
        if not any(validator_id in e.verdicts for e in corpus):
            raise Nl2fError(f"no verdicts present for validator {validator_id}")
        return {
            e.id
            for e in corpus
            if validator_id in e.verdicts
            and e.verdicts[validator_id].accepted == want
        }

    namespace = {
        "accepted": lambda v: verdict_set(v, True),
        "rejected": lambda v: verdict_set(v, False),
        "raw": set(by_id),
        "VO": "VO",
        "VP": "VP",
        "VC": "VC",
    }
    try:
        selected = eval(expr, {"__builtins__": {}}, namespace)  # noqa: S307 - restricted namespace
    except Nl2fError:
        raise
    except Exception as exc:
        raise Nl2fError(f"invalid selector expression {expr!r}: {exc}")
    if not isinstance(selected, (set, frozenset)):
        raise Nl2fError(f"selector expression {expr!r} did not produce a set")
    return [e for e in corpus if e.id in selected]


def subsample(examples, target_size: int, seed: int) -> list:
    """Seeded uniform sample without replacement, original order preserved."""
    if target_size > len(examples):
        raise Nl2fError(
            f"target too large: {target_size} > {len(examples)} examples"
        )
    rng = random.Random(seed)
    chosen = sorted(rng.sample(range(len(examples)), target_size))
    return [examples[i] for i in chosen]


def removed_functions(reference, subset) -> set:
    """Functions used by the reference corpus but absent from the subset."""
    return unique_functions(reference) - unique_functions(subset)


def export_finetune_files(
    examples, split_sizes, out_dir, max_rows: int = DEFAULT_PREVIEW_ROWS
) -> list:
    """Write prompt/completion files, one per split, deterministic order.

    Splits are named train/valid (then split2, split3, ...) and consume
    the corpus in order.
    """
    if sum(split_sizes) > len(examples):
        raise Nl2fError("split sizes exceed corpus size")
    for example in examples:
        if not example.utterance:
            raise Nl2fError(f"example {example.id} has no utterance")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = ["train", "valid"] + [f"split{i}" for i in range(2, len(split_sizes))]
    paths = []
    offset = 0
    for name, size in zip(names, split_sizes):
        path = out_dir / f"{name}.jsonl"
        with open(path, "w", encoding="utf-8") as fh:
            for example in examples[offset : offset + size]:
                record = {
                    "prompt": example.utterance
                    + "\n"
                    + render_table_preview(example.table, max_rows),
                    "completion": example.formula_text,
                }
                fh.write(json.dumps(record, ensure_ascii=False))
                fh.write("\n")
        offset += size
        paths.append(path)
    return paths
