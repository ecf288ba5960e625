"""Client for the out-of-process program runner used by the code validator.

Wire protocol: one JSON RunRequest on the runner's stdin, one JSON
RunResponse on its stdout.  The runner command is configurable
(``--runner-cmd``); any executable honoring the protocol works.
"""

from __future__ import annotations

import json
import shlex
import subprocess
from dataclasses import dataclass

from .errors import RunnerError
from .tables import Table, table_to_strings

DEFAULT_TIMEOUT_MS = 10_000
DEFAULT_MEMORY_MB = 512


@dataclass(frozen=True)
class RunResponse:
    status: str  # ok | error | timeout
    column: tuple = ()
    error: str = ""


class ProgramRunner:
    """Submits one program + table per subprocess invocation."""

    def __init__(
        self,
        cmd,
        timeout_ms: int = DEFAULT_TIMEOUT_MS,
        memory_mb: int = DEFAULT_MEMORY_MB,
    ):
        if isinstance(cmd, str):
            cmd = shlex.split(cmd)
        self.cmd = list(cmd)
        self.timeout_ms = timeout_ms
        self.memory_mb = memory_mb

    def run(self, program: str, table: Table) -> RunResponse:
        headers, rows = table_to_strings(table)
        request = {
            "program": program,
            "table": {"headers": headers, "rows": rows},
            "timeout_ms": self.timeout_ms,
            "memory_mb": self.memory_mb,
        }
        try:
            proc = subprocess.run(
                self.cmd,
                input=json.dumps(request).encode("utf-8"),
                capture_output=True,
                # The runner enforces the program timeout itself; allow it
                # generous slack before declaring the protocol broken.
                timeout=self.timeout_ms / 1000 + 30,
            )
        except FileNotFoundError as exc:
            raise RunnerError(f"runner command not found: {exc}")
        except subprocess.TimeoutExpired:
            raise RunnerError("runner did not respond within its grace period")
        if proc.returncode != 0:
            raise RunnerError(
                f"runner exited with code {proc.returncode}: "
                f"{proc.stderr.decode('utf-8', 'replace')[:200]}"
            )
        try:
            payload = json.loads(proc.stdout.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise RunnerError(f"malformed runner response: {exc}")
        status = payload.get("status")
        if status not in ("ok", "error", "timeout"):
            raise RunnerError(f"runner response has invalid status {status!r}")
        column = payload.get("column") or []
        if status == "ok":
            if not isinstance(column, list) or len(column) != table.row_count:
                raise RunnerError("runner ok response with wrong column length")
            column = [str(v) for v in column]
        return RunResponse(status, tuple(column), str(payload.get("error") or ""))
