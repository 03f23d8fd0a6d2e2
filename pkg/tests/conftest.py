import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from salengine.graph import GraphConfig
from salengine.models import (
    build_s3d_encoder,
    build_slowfast_encoder,
    build_vinet_a,
    build_vinet_s,
)
from salengine.weights import bind, random_init

REPO = Path(__file__).resolve().parents[1]
CONFIG_DIR = REPO / "configs"

_BUILDERS = {
    "slowfast_r50.json": lambda: build_slowfast_encoder(),
    "s3d.json": lambda: build_s3d_encoder(),
    "vinet_a.json": lambda: build_vinet_a(),
    "vinet_s.json": lambda: build_vinet_s(),
    "vinet_a_tiny.json": lambda: build_vinet_a(input_hw=(32, 64), width_div=8, name="vinet_a_tiny"),
    "vinet_s_tiny.json": lambda: build_vinet_s(input_hw=(32, 64), width_div=8, name="vinet_s_tiny"),
}


def config_path(fname: str) -> Path:
    path = CONFIG_DIR / fname
    if not path.exists():
        CONFIG_DIR.mkdir(exist_ok=True)
        _BUILDERS[fname]().save(path)
    return path


@pytest.fixture(scope="session")
def tiny_a_graph() -> GraphConfig:
    return GraphConfig.load(config_path("vinet_a_tiny.json"))


@pytest.fixture(scope="session")
def tiny_s_graph() -> GraphConfig:
    return GraphConfig.load(config_path("vinet_s_tiny.json"))


@pytest.fixture(scope="session")
def tiny_a_model(tiny_a_graph):
    return bind(tiny_a_graph, random_init(tiny_a_graph, seed=7))


@pytest.fixture(scope="session")
def tiny_s_model(tiny_s_graph):
    return bind(tiny_s_graph, random_init(tiny_s_graph, seed=3))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo one PASS/FAIL line per acceptance criterion after the run."""
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
