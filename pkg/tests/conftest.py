import functools

import pytest

from riswave.scene import RisGeometry, medium_from_wavelength

# criterion number -> list of (label, passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE = {}


def criterion(number, title):
    """Mark an acceptance test. The body returns ``[(label, ok, detail), ...]``.

    Every check is recorded for the end-of-run summary before the test
    asserts, so failing criteria still print their measured values.
    """

    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                checks = fn(*args, **kwargs)
            except Exception as exc:
                ACCEPTANCE.setdefault(number, (title, []))[1].append(("error", False, f"{type(exc).__name__}: {exc}"))
                raise
            ACCEPTANCE.setdefault(number, (title, []))[1].extend(checks)
            failed = [f"{label}: {detail}" for label, ok, detail in checks if not ok]
            assert not failed, "; ".join(failed)

        return run

    return wrap


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, checks = ACCEPTANCE[number]
        ok = all(c[1] for c in checks)
        tr.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}")
        for label, passed, detail in checks:
            tr.write_line(f"    [{'ok' if passed else 'x '}] {label}: {detail}")


@pytest.fixture
def med():
    return medium_from_wavelength(2e-3)


@pytest.fixture
def small_ris():
    return RisGeometry(64, 64, 1e-3)
