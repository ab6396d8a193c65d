"""Collects one verdict line per acceptance criterion for the run summary."""

LINES = []


def verdict(name: str, ok: bool, detail: str = "") -> bool:
    line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else "")
    LINES.append(line)
    print(line)
    return ok


def skipped(name: str, reason: str) -> None:
    line = f"SKIP  {name}  [{reason}]"
    LINES.append(line)
    print(line)
