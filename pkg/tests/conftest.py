import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from graphfam.callgraph import default_registry, make_registry


@pytest.fixture(scope="session")
def registry():
    return default_registry()


@pytest.fixture(scope="session")
def big_registry():
    """Synthetic 426-entry registry matching the production list size."""
    return make_registry(f"test.api.Cls{i // 8}.method{i}" for i in range(426))
