import pytest

# filled by tests/test_acceptance.py, printed once at the end of the session
ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(request):
    """Record a PASS/FAIL line for an acceptance criterion.

    Usage: ``with criterion(3, "gradient correctness", max_seconds=5) as rec: ...``
    and put the headline numbers in ``rec["detail"]``.
    """
    import time
    from contextlib import contextmanager

    @contextmanager
    def run(number, title, max_seconds):
        rec = {"detail": ""}
        t0 = time.perf_counter()
        ok = False
        try:
            yield rec
            ok = True
        finally:
            elapsed = time.perf_counter() - t0
            in_time = elapsed < max_seconds
            status = "PASS" if ok and in_time else "FAIL"
            note = rec["detail"] if ok else "assertion failed"
            if ok and not in_time:
                note += f"; over the {max_seconds:g} s budget"
            line = f"[{status}] criterion {number:2d} {title}: {note} ({elapsed:.2f} s)"
            ACCEPTANCE_LINES.append((number, line))
            print(line)
        assert elapsed < max_seconds, f"criterion {number} took {elapsed:.1f} s (budget {max_seconds} s)"

    return run


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
