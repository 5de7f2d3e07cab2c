from collections import defaultdict

import pytest

# criterion number -> [(part, passed, detail)], filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = defaultdict(list)


@pytest.fixture
def acceptance():
    """Record one part of an acceptance criterion, then assert it."""

    def record(criterion: int, part: str, ok: bool, detail: str) -> None:
        ACCEPTANCE[criterion].append((part, bool(ok), detail))
        assert ok, f"criterion {criterion} [{part}]: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[number]
        verdict = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        body = "; ".join(f"{part}: {'ok' if ok else 'FAILED'} ({detail})" for part, ok, detail in parts)
        terminalreporter.write_line(f"criterion {number:>2} {verdict}  {body}")
