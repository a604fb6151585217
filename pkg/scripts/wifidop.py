#!/usr/bin/env python3
"""Run the wifidop CLI from a checkout without installing it."""

from __future__ import annotations

import sys
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO_ROOT))

from wifidop.cli import main


if __name__ == "__main__":
    raise SystemExit(main())
