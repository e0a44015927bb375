"""Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

LINES = []


def record(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    LINES.append((number, line))
    print(line)
