import json
import os
import shutil
from pathlib import Path

import pytest

from nl2f.tables import table_from_strings

REPO_ROOT = Path(__file__).resolve().parent.parent


def make_table(headers, rows):
    return table_from_strings(headers, [[str(c) for c in row] for row in rows])


def find_runner_cmd():
    """Locate the external program runner, if built.

    Order: NL2F_RUNNER_CMD env var, then the bundled runner package's
    compiled entry point.
    """
    env = os.environ.get("NL2F_RUNNER_CMD")
    if env:
        return env
    entry = REPO_ROOT / "runner" / "dist" / "main.js"
    if entry.exists() and shutil.which("node"):
        return f"node {entry} run"
    return None


@pytest.fixture
def runner_cmd():
    cmd = find_runner_cmd()
    if cmd is None:
        pytest.skip("program runner not available (set NL2F_RUNNER_CMD)")
    return cmd


class FakeRunner:
    """In-process stand-in honoring the program runner's semantics."""

    def run(self, program, table):
        from nl2f.runner import RunResponse
        from nl2f.tables import Blank, Boolean, Number, cell_to_text

        data = {}
        for col in table.columns:
            values = []
            for cell in col.cells:
                if isinstance(cell, Number):
                    values.append(cell.value)
                elif isinstance(cell, Blank):
                    values.append(None)
                elif isinstance(cell, Boolean):
                    values.append(cell.value)
                else:
                    values.append(cell_to_text(cell))
            data[col.header] = values
        namespace = {}
        try:
            exec(program, namespace)
            if "derive" not in namespace:
                return RunResponse("error", (), "entrypoint not found")
            result = namespace["derive"](data)
            out = []
            for v in result:
                if v is None:
                    out.append("")
                elif isinstance(v, bool):
                    out.append("TRUE" if v else "FALSE")
                elif isinstance(v, float) and v == int(v):
                    out.append(str(int(v)))
                else:
                    out.append(str(v))
            if len(out) != table.row_count:
                return RunResponse("error", (), "wrong output length")
            return RunResponse("ok", tuple(out), "")
        except Exception as exc:  # noqa: BLE001 - mirrors runner error capture
            return RunResponse("error", (), str(exc).splitlines()[0] if str(exc) else type(exc).__name__)


def write_mock_script(path, mapping):
    Path(path).write_text(json.dumps(mapping, ensure_ascii=False), encoding="utf-8")
    return f"mock:{path}"
