"""Execution-match benchmark runner with pass@k scoring and report analytics."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .compare import MatchConfig, DEFAULT_CONFIG, columns_match
from .errors import (
    CorpusFormatError,
    FormulaSyntaxError,
    GatewayError,
    Nl2fError,
    UnknownColumnError,
)
from .datasets import SubsetStats, stats_from_formulas
from .formulas import formula_metrics, parse_formula
from .gateway import (
    ChatModelSpec,
    DEFAULT_PREVIEW_ROWS,
    Gateway,
    load_template,
    render_table_preview,
)
from .interp import evaluate_formula
from .tables import Table, table_from_strings
from .validators import extract_code_block

OUTCOME_MATCH = "match"
OUTCOME_MISMATCH = "mismatch"
OUTCOME_PARSE_ERROR = "parse error"
OUTCOME_EVAL_ERROR = "eval error"


@dataclass(frozen=True)
class Task:
    id: str
    table: Table
    utterance: str
    gold_formula: str


def load_tasks(path) -> list:
    """Load a benchmark task file (corpus format plus gold_formula)."""
    tasks = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"line {line_no}: invalid record: {exc}")
            try:
                table = table_from_strings(
                    record["table"]["headers"], record["table"]["rows"]
                )
                task = Task(
                    id=str(record["id"]),
                    table=table,
                    utterance=str(record.get("utterance", "")),
                    gold_formula=str(
                        record.get("gold_formula", record.get("formula", ""))
                    ),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise CorpusFormatError(f"line {line_no}: {exc}")
            if task.id in seen:
                raise CorpusFormatError(f"line {line_no}: duplicate id {task.id!r}")
            seen.add(task.id)
            tasks.append(task)
    return tasks


def execution_match(
    predicted: str,
    gold: str,
    table: Table,
    match_config: MatchConfig = DEFAULT_CONFIG,
) -> str:
    """Score one prediction against the gold formula by executing both."""
    try:
        gold_out = evaluate_formula(parse_formula(gold), table)
    except (FormulaSyntaxError, UnknownColumnError) as exc:
        raise Nl2fError(f"gold formula does not evaluate: {exc}")
    try:
        pred_ast = parse_formula(predicted)
    except FormulaSyntaxError:
        return OUTCOME_PARSE_ERROR
    try:
        pred_out = evaluate_formula(pred_ast, table)
    except UnknownColumnError:
        return OUTCOME_EVAL_ERROR
    report = columns_match(gold_out.column, pred_out.column, match_config)
    return OUTCOME_MATCH if report.matched else OUTCOME_MISMATCH


def pass_at_k(n: int, c: int, k: int) -> float:
    """Unbiased estimator 1 - C(n-c, k)/C(n, k), in stable product form."""
    if not (0 <= c <= n and 1 <= k <= n):
        raise Nl2fError(f"invalid pass@k arguments n={n} c={c} k={k}")
    if n - c < k:
        return 1.0
    prod = 1.0
    for i in range(n - c + 1, n + 1):
        prod *= 1.0 - k / i
    return 1.0 - prod


def pass_at_k_first(n: int, c_flags, k: int) -> float:
    """Ablation scoring: 1 if any of the first k samples was correct."""
    return 1.0 if any(c_flags[:k]) else 0.0


def extract_formula(completion: str) -> str | None:
    """First line starting with '=', else first fenced block's first line."""
    for line in completion.splitlines():
        if line.strip().startswith("="):
            return line.strip()
    block = extract_code_block(completion)
    if block:
        first = block.splitlines()[0].strip()
        if first:
            return first
    return None


@dataclass(frozen=True)
class TaskResult:
    task_id: str
    predictions: tuple
    outcomes: tuple

    @property
    def n(self) -> int:
        return len(self.predictions)

    @property
    def correct_count(self) -> int:
        return sum(1 for o in self.outcomes if o == OUTCOME_MATCH)

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "predictions": list(self.predictions),
            "outcomes": list(self.outcomes),
        }


@dataclass(frozen=True)
class BenchmarkReport:
    results: tuple
    pass_at_k: dict
    solved_task_ids: tuple
    failed_task_ids: tuple = ()
    unevaluable_task_ids: tuple = ()

    def to_dict(self) -> dict:
        return {
            "pass_at_k": {str(k): v for k, v in sorted(self.pass_at_k.items())},
            "solved_task_ids": list(self.solved_task_ids),
            "failed_task_ids": list(self.failed_task_ids),
            "unevaluable_task_ids": list(self.unevaluable_task_ids),
            "results": [r.to_dict() for r in self.results],
        }

    def save(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path) -> "BenchmarkReport":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        results = tuple(
            TaskResult(r["task_id"], tuple(r["predictions"]), tuple(r["outcomes"]))
            for r in data["results"]
        )
        return cls(
            results=results,
            pass_at_k={int(k): v for k, v in data["pass_at_k"].items()},
            solved_task_ids=tuple(data["solved_task_ids"]),
            failed_task_ids=tuple(data.get("failed_task_ids", ())),
            unevaluable_task_ids=tuple(data.get("unevaluable_task_ids", ())),
        )


def run_benchmark(
    gateway: Gateway,
    model: ChatModelSpec,
    tasks,
    n: int = 10,
    temperature: float = 0.6,
    k_list=(5,),
    scoring: str = "estimator",
    match_config: MatchConfig = DEFAULT_CONFIG,
    template_dir=None,
    max_rows: int = DEFAULT_PREVIEW_ROWS,
) -> BenchmarkReport:
    """Sample n formula predictions per task and aggregate mean pass@k.

    Tasks whose gold formula does not evaluate are excluded and listed as
    unevaluable; per-task transport failures are listed as failed.
    Neither is silently counted as zero.
    """
    template = load_template("NL2F_PREDICT", template_dir)
    results = []
    failed = []
    unevaluable = []
    per_task_scores = {k: [] for k in k_list}
    for task in tasks:
        try:
            evaluate_formula(parse_formula(task.gold_formula), task.table)
        except (FormulaSyntaxError, UnknownColumnError):
            unevaluable.append(task.id)
            continue
        prompt = template.render(
            table=render_table_preview(task.table, max_rows),
            utterance=task.utterance,
        )
        try:
            completions = gateway.complete(
                model.sampling(temperature=temperature, n=n), prompt
            )
        except GatewayError:
            failed.append(task.id)
            continue
        predictions = []
        outcomes = []
        for completion in completions:
            formula = extract_formula(completion)
            if formula is None:
                predictions.append(completion.strip())
                outcomes.append(OUTCOME_PARSE_ERROR)
                continue
            predictions.append(formula)
            outcomes.append(
                execution_match(formula, task.gold_formula, task.table, match_config)
            )
        result = TaskResult(task.id, tuple(predictions), tuple(outcomes))
        results.append(result)
        flags = [o == OUTCOME_MATCH for o in result.outcomes]
        for k in k_list:
            if scoring == "first-k":
                per_task_scores[k].append(pass_at_k_first(result.n, flags, k))
            else:
                per_task_scores[k].append(
                    pass_at_k(result.n, result.correct_count, k)
                )
    aggregates = {
        k: (sum(scores) / len(scores) if scores else 0.0)
        for k, scores in per_task_scores.items()
    }
    solved = tuple(r.task_id for r in results if r.correct_count >= 1)
    return BenchmarkReport(
        results=tuple(results),
        pass_at_k=aggregates,
        solved_task_ids=solved,
        failed_task_ids=tuple(failed),
        unevaluable_task_ids=tuple(unevaluable),
    )


def solved_case_analysis(report: BenchmarkReport, tasks) -> SubsetStats:
    """Metrics of the gold formulas of tasks with at least one correct sample."""
    by_id = {t.id: t for t in tasks}
    solved = [by_id[tid].gold_formula for tid in report.solved_task_ids if tid in by_id]
    return stats_from_formulas(solved)


def _prediction_functions(report: BenchmarkReport) -> set:
    names = set()
    for result in report.results:
        for prediction in result.predictions:
            try:
                ast = parse_formula(prediction)
            except FormulaSyntaxError:
                continue
            names |= formula_metrics(ast).unique_functions
    return names


def recovered_functions(
    base_report: BenchmarkReport, ft_report: BenchmarkReport, removed
) -> set:
    """Removed functions that the fine-tuned model emits but the base did not."""
    removed = {name.upper() for name in removed}
    new = _prediction_functions(ft_report) - _prediction_functions(base_report)
    return new & removed
