"""The three surrogate validators over (utterance, table, formula).

* VO — asks the model to predict the derived column directly and
  compares it to the formula's output under the relaxed comparator.
* VP — asks the model for a Python program, executes it through the
  external runner, and compares the program's output the same way.
* VC — asks the model for a binary correct/incorrect judgment.

A validator failure to produce a verdict (transport error, unevaluable
gold formula) is "unknown", not "reject": such examples are flagged in
provenance and excluded from accept/reject sets downstream.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

from .compare import ComparisonReport, MatchConfig, DEFAULT_CONFIG, columns_match
from .errors import FormulaSyntaxError, GatewayError, RunnerError, UnknownColumnError, ValidatorError
from .formulas import parse_formula
from .gateway import (
    ChatModelSpec,
    DEFAULT_PREVIEW_ROWS,
    Gateway,
    load_template,
    render_table_preview,
)
from .interp import evaluate_formula
from .runner import ProgramRunner
from .tables import Column, Example, Table, VerdictRecord, parse_cell

VALIDATOR_IDS = ("VO", "VP", "VC")

ACCEPT_LABELS = frozenset({"yes", "true", "correct", "1"})
REJECT_LABELS = frozenset({"no", "false", "incorrect", "0"})

_CODE_FENCE_RE = re.compile(r"```[a-zA-Z0-9_+-]*\n(.*?)```", re.DOTALL)


@dataclass(frozen=True)
class Verdict:
    validator_id: str
    accepted: bool
    evidence: str = ""
    comparison: ComparisonReport | None = None
    reason: str = ""

    def to_record(self) -> VerdictRecord:
        return VerdictRecord(self.accepted, self.evidence)


def _truncated(table: Table, max_rows: int) -> Table:
    if table.row_count <= max_rows:
        return table
    return Table(
        tuple(Column(c.header, c.cells[:max_rows]) for c in table.columns)
    )


def _gold_output(example: Example, table: Table) -> Column:
    try:
        ast = parse_formula(example.formula_text)
        return evaluate_formula(ast, table).column
    except (FormulaSyntaxError, UnknownColumnError) as exc:
        raise ValidatorError(f"gold formula unevaluable for {example.id}: {exc}")


def _require_utterance(example: Example) -> str:
    if not example.utterance:
        raise ValidatorError(f"example {example.id} has no utterance")
    return example.utterance


def parse_predicted_column(completion: str, row_count: int) -> Column | None:
    """Parse a one-value-per-line completion into a column.

    Tolerates surrounding code fences and one extra leading header line.
    Returns None when the line count cannot be reconciled.
    """
    text = completion.strip()
    fence = _CODE_FENCE_RE.search(text)
    if fence:
        text = fence.group(1)
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if len(lines) == row_count + 1:
        lines = lines[1:]
    if len(lines) != row_count:
        return None
    return Column("predicted", tuple(parse_cell(ln) for ln in lines))


def extract_code_block(completion: str) -> str | None:
    """First fenced code block of a completion; later blocks are ignored."""
    match = _CODE_FENCE_RE.search(completion)
    if match:
        return match.group(1).strip()
    return None


def validate_output_prediction(
    example: Example,
    gateway: Gateway,
    model: ChatModelSpec,
    match_config: MatchConfig = DEFAULT_CONFIG,
    template_dir=None,
    max_rows: int = DEFAULT_PREVIEW_ROWS,
) -> Verdict:
    utterance = _require_utterance(example)
    table = _truncated(example.table, max_rows)
    expected = _gold_output(example, table)
    prompt = load_template("VO_OUTPUT", template_dir).render(
        table=render_table_preview(table, max_rows), utterance=utterance
    )
    completion = gateway.complete(replace(model, n=1), prompt)[0]
    predicted = parse_predicted_column(completion, table.row_count)
    if predicted is None:
        return Verdict(
            "VO", False, evidence=completion.strip(), reason="unparseable prediction"
        )
    report = columns_match(expected, predicted, match_config)
    return Verdict(
        "VO",
        report.matched,
        evidence=completion.strip(),
        comparison=report,
        reason=report.summary(),
    )


def validate_alt_code(
    example: Example,
    gateway: Gateway,
    model: ChatModelSpec,
    runner: ProgramRunner,
    match_config: MatchConfig = DEFAULT_CONFIG,
    template_dir=None,
    max_rows: int = DEFAULT_PREVIEW_ROWS,
) -> Verdict:
    utterance = _require_utterance(example)
    expected = _gold_output(example, example.table)
    prompt = load_template("VP_PROGRAM", template_dir).render(
        table=render_table_preview(example.table, max_rows), utterance=utterance
    )
    completion = gateway.complete(replace(model, n=1), prompt)[0]
    program = extract_code_block(completion)
    if program is None:
        return Verdict("VP", False, evidence=completion.strip(), reason="no program")
    response = runner.run(program, example.table)
    if response.status != "ok":
        return Verdict(
            "VP",
            False,
            evidence=f"{program}\n# run {response.status}: {response.error}",
            reason=f"execution {response.status}: {response.error}",
        )
    actual = Column("program", tuple(parse_cell(v) for v in response.column))
    report = columns_match(expected, actual, match_config)
    return Verdict(
        "VP",
        report.matched,
        evidence=f"{program}\n# output: {list(response.column)}",
        comparison=report,
        reason=report.summary(),
    )


def parse_classification_label(completion: str):
    """First-token parse of a yes/no style label; None when unparseable."""
    tokens = re.findall(r"[A-Za-z0-9]+", completion)
    if not tokens:
        return None
    first = tokens[0].lower()
    if first in ACCEPT_LABELS:
        return True
    if first in REJECT_LABELS:
        return False
    return None


def validate_classification(
    example: Example,
    gateway: Gateway,
    model: ChatModelSpec,
    template_dir=None,
    max_rows: int = DEFAULT_PREVIEW_ROWS,
) -> Verdict:
    utterance = _require_utterance(example)
    prompt = load_template("VC_CLASSIFY", template_dir).render(
        table=render_table_preview(example.table, max_rows),
        formula=example.formula_text,
        utterance=utterance,
    )
    completion = gateway.complete(replace(model, n=1), prompt)[0]
    label = parse_classification_label(completion)
    if label is None:
        return Verdict(
            "VC", False, evidence=completion.strip(), reason="unparseable label"
        )
    return Verdict("VC", label, evidence=completion.strip())


def run_validation(
    corpus,
    which,
    gateway: Gateway,
    model: ChatModelSpec,
    runner: ProgramRunner | None = None,
    match_config: MatchConfig = DEFAULT_CONFIG,
    template_dir=None,
    max_rows: int = DEFAULT_PREVIEW_ROWS,
) -> list:
    """Attach one verdict per requested validator to every example.

    Per-example validator errors are recorded in provenance under
    ``validator_errors`` and the run continues; verdicts already present
    for other validators are preserved.
    """
    unknown = set(which) - set(VALIDATOR_IDS)
    if unknown:
        raise ValidatorError(f"unknown validator id(s): {', '.join(sorted(unknown))}")
    which = [vid for vid in VALIDATOR_IDS if vid in set(which)]
    if "VP" in which and runner is None:
        raise ValidatorError("VP requested but no runner configured")
    out = []
    for example in corpus:
        updated = example
        errors = dict(example.provenance.get("validator_errors", {}))
        for vid in which:
            try:
                if vid == "VO":
                    verdict = validate_output_prediction(
                        updated, gateway, model, match_config, template_dir, max_rows
                    )
                elif vid == "VP":
                    verdict = validate_alt_code(
                        updated, gateway, model, runner, match_config,
                        template_dir, max_rows,
                    )
                else:
                    verdict = validate_classification(
                        updated, gateway, model, template_dir, max_rows
                    )
            except (ValidatorError, GatewayError, RunnerError) as exc:
                errors[vid] = str(exc)
                continue
            updated = updated.with_verdict(vid, verdict.to_record())
        if errors:
            updated = updated.with_provenance(validator_errors=errors)
        if "VO" in which and example.table.row_count > max_rows:
            updated = updated.with_provenance(vo_rows_compared=max_rows)
        out.append(updated)
    return out
