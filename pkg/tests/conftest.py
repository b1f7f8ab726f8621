import collections

# criterion number -> list of (label, passed, detail); filled by test_acceptance
ACCEPTANCE = collections.defaultdict(list)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        rows = ACCEPTANCE[n]
        ok = all(p for _, p, _ in rows)
        detail = "; ".join(f"{label}: {d}" if label else d for label, _, d in rows)
        tr.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
