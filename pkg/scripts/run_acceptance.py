"""Run the eight acceptance criteria and print one PASS/FAIL line each.

Exit status is 0 when every criterion passes.
"""

import sys
import time

from canvessel.acceptance import CRITERIA


def main() -> int:
    ok = True
    for check in CRITERIA:
        start = time.perf_counter()
        result = check()
        print(f"{result.line()}  ({time.perf_counter() - start:.1f} s)", flush=True)
        ok &= result.passed
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
