import pytest

from feederflow import load_feeder_tree, load_single_feeder


@pytest.fixture(scope="session")
def single_feeder():
    """Bundled four-station straight feeder (frozen dataclasses, share freely)."""
    return load_single_feeder()


@pytest.fixture(scope="session")
def feeder_tree():
    """Bundled 16-station branched scenario."""
    return load_feeder_tree()
