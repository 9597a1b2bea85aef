import os
from pathlib import Path

import pytest


@pytest.fixture(scope="session")
def accept_cache(tmp_path_factory):
    """Root for acceptance artifacts (lives, checkpoints, extracted maps).

    Point SINGLELIFE_ACCEPT_CACHE at a stable directory to resume finished
    trainings across pytest invocations; artifacts are keyed by their full
    configuration, so reuse cannot change results.
    """
    env = os.environ.get("SINGLELIFE_ACCEPT_CACHE")
    if env:
        root = Path(env)
        root.mkdir(parents=True, exist_ok=True)
        return root
    return tmp_path_factory.mktemp("acceptance")
