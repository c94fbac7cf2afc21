"""Run the example configurations as a suite and print the summary.

Equivalent to ``momentqm suite configs/examples --out <dir> --threads 2``.

Run with ``python3 demos/cli_suite.py``.
"""

import sys
import tempfile
from pathlib import Path

from momentqm.cli import suite

ROOT = Path(__file__).resolve().parents[1]


def main():
    with tempfile.TemporaryDirectory() as out:
        code = suite(ROOT / "configs" / "examples", out, threads=2, log=sys.stdout)
        print(f"\nexit code {code}")
        print((Path(out) / "suite_summary.csv").read_text())


if __name__ == "__main__":
    main()
