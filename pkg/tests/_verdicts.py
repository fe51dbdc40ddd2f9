"""Acceptance verdicts collected during the run, printed in the summary."""

VERDICTS: dict[int, tuple[bool, str]] = {}
N_CRITERIA = 10


def verdict(n: int, ok: bool, detail: str) -> bool:
    VERDICTS[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    return bool(ok)
