"""Pass/fail lines collected by test_acceptance and printed at the end of the run."""

LINES = []


def record(number, ok, detail):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    LINES.append((number, line))
    return line
