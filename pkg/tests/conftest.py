import numpy as np
import pytest
from synthlib import build_library

from segforge.library import ingest_manifest


@pytest.fixture(scope="session")
def std_manifest(tmp_path_factory):
    root = tmp_path_factory.mktemp("library")
    return build_library(root)


@pytest.fixture(scope="session")
def std_index(std_manifest):
    return ingest_manifest(std_manifest)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _isolate_seed_env(monkeypatch):
    monkeypatch.delenv("SEGFORGE_SEED", raising=False)
