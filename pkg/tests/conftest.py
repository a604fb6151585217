from __future__ import annotations

import pytest

from helpers import REPO_ROOT


@pytest.fixture
def lab_path():
    return REPO_ROOT / "data" / "lab.json"


@pytest.fixture
def walk_path():
    return REPO_ROOT / "data" / "walk.json"
