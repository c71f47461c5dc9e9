import pytest

from tckit.config import PipelineConfig, build_gateway
from tckit.store import Store


@pytest.fixture
def store(tmp_path):
    return Store(tmp_path / "store")


@pytest.fixture
def config(tmp_path):
    cfg = PipelineConfig()
    cfg.store = str(tmp_path / "store")
    return cfg


@pytest.fixture
def gateway():
    return build_gateway(PipelineConfig())
