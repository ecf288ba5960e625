"""Worker executed once per run request.

Reads the full RunRequest JSON on stdin, executes the program's
``derive`` function against the table, and writes a RunResponse JSON to
stdout.  The parent process owns the wall-clock timeout; this side owns
the memory cap, the import whitelist, and cell conversion.
"""

import builtins
import json
import sys
import traceback

# Best-effort containment for generated (not hostile) code: stdlib
# helpers a data-derivation snippet might plausibly want, nothing that
# reaches the network or spawns processes.
IMPORT_WHITELIST = {
    "calendar",
    "collections",
    "datetime",
    "decimal",
    "fractions",
    "functools",
    "itertools",
    "json",
    "math",
    "numbers",
    "operator",
    "random",
    "re",
    "statistics",
    "string",
    "time",
    "unicodedata",
}


def respond(status, column=(), error=""):
    json.dump({"status": status, "column": list(column), "error": error}, REAL_STDOUT)
    REAL_STDOUT.write("\n")
    REAL_STDOUT.flush()
    raise SystemExit(0)


def first_line(exc):
    text = "".join(traceback.format_exception_only(type(exc), exc)).strip()
    return text.splitlines()[0] if text else type(exc).__name__


def to_native(cell):
    """Cell string -> value handed to derive()."""
    if cell == "":
        return None
    if cell.upper() == "TRUE":
        return True
    if cell.upper() == "FALSE":
        return False
    try:
        value = float(cell)
    except ValueError:
        return cell
    if value != value or value in (float("inf"), float("-inf")):
        return cell
    return value


def to_cell(value):
    """derive() output value -> cell string."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "TRUE" if value else "FALSE"
    if isinstance(value, (int, float)):
        value = float(value)
        if value.is_integer() and abs(value) < 1e16:
            return str(int(value))
        return repr(value)
    return str(value)


def apply_memory_cap(memory_mb):
    try:
        import resource
    except ImportError:  # non-POSIX; parent limits are all we have
        return
    cap = memory_mb * 1024 * 1024
    try:
        resource.setrlimit(resource.RLIMIT_AS, (cap, cap))
    except (ValueError, OSError):
        pass


def main():
    request = json.load(sys.stdin)
    program = request["program"]
    headers = request["table"]["headers"]
    rows = request["table"]["rows"]
    apply_memory_cap(int(request.get("memory_mb") or 512))

    data = {
        header: [to_native(row[i]) for row in rows]
        for i, header in enumerate(headers)
    }

    real_import = builtins.__import__

    def guarded_import(name, *args, **kwargs):
        root = name.split(".")[0]
        if root not in IMPORT_WHITELIST:
            raise ImportError(f"import of {root!r} is not allowed")
        return real_import(name, *args, **kwargs)

    builtins.__import__ = guarded_import
    # Anything the program prints must not corrupt the protocol stream.
    sys.stdout = sys.stderr

    namespace = {}
    try:
        exec(compile(program, "<program>", "exec"), namespace)
    except MemoryError:
        respond("error", error="memory limit")
    except BaseException as exc:
        respond("error", error=first_line(exc))
    derive = namespace.get("derive")
    if not callable(derive):
        respond("error", error="entrypoint not found")
    try:
        result = list(derive(data))
    except MemoryError:
        respond("error", error="memory limit")
    except BaseException as exc:
        respond("error", error=first_line(exc))
    if len(result) != len(rows):
        respond("error", error=f"wrong output length: got {len(result)}, want {len(rows)}")
    respond("ok", column=[to_cell(v) for v in result])


if __name__ == "__main__":
    REAL_STDOUT = sys.stdout
    main()
