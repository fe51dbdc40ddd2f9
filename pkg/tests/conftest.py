from _verdicts import N_CRITERIA, VERDICTS


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        if n in VERDICTS:
            ok, detail = VERDICTS[n]
            tr.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            tr.write_line(f"criterion {n:>2}: FAIL  no verdict recorded (not run or errored)")
