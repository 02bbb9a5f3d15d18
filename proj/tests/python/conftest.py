import json
import os
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[2]


@pytest.fixture(scope="session")
def schemas():
    base = Path(os.environ.get("FDSEL_SCHEMAS", ROOT / "schemas"))
    return {p.name.split(".")[0]: json.loads(p.read_text()) for p in base.glob("*.schema.json")}


@pytest.fixture(scope="session")
def cli():
    path = os.environ.get("FDSEL_CLI", str(ROOT / "build" / "fdsel"))
    if not Path(path).exists():
        pytest.skip("fdsel binary not built")
    return path
