"""Pass/fail lines collected by test_acceptance and printed in the terminal summary."""
LINES: list[str] = []


def record(number: int, name: str, ok: bool, detail: str) -> None:
    LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {name} -- {detail}")
