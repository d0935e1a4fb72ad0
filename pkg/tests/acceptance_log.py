"""One PASS/FAIL line per acceptance criterion, filled in as the criteria run."""

LINES = {}


def record(number, title, checks, seconds):
    failed = [name for name, ok in checks if not ok]
    verdict = "FAIL" if failed else "PASS"
    line = f"{verdict} criterion {number}: {title} ({seconds:.2f} s)"
    if failed:
        line += " -- failing: " + "; ".join(failed)
    LINES[number] = line
    print(line)
    return not failed
