#!/usr/bin/env python3
"""Regenerate scenarios/example6.json from the builtin example scenario.

The checked-in file is a plain data export of ``builtin_example_scenario``
so that command-line runs, docs, and tests can refer to a scenario document
on disk; run this script after changing the builtin definition.
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from rol.model import builtin_example_scenario, save_scenario  # noqa: E402


def main() -> None:
    out_dir = os.path.join(os.path.dirname(__file__), "..", "scenarios")
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.normpath(os.path.join(out_dir, "example6.json"))
    save_scenario(builtin_example_scenario(), path)
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
