import os
from dataclasses import replace

import hypothesis
import numpy as np
import pytest

from adm_shells import pipeline
from adm_shells.config import RunConfig

hypothesis.settings.register_profile("default", max_examples=25, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_RESULTS = []


@pytest.fixture
def record():
    """Record one acceptance outcome; printed in the terminal summary."""

    def add(number, name, ok, detail):
        _RESULTS.append((number, name, bool(ok), detail))
        return ok

    return add


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(_RESULTS):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number:2d} {name}: {detail}")


@pytest.fixture(scope="session")
def cfg():
    return RunConfig()


@pytest.fixture(scope="session")
def pair(cfg):
    return pipeline.base_pair(cfg)


@pytest.fixture(scope="session")
def angular_run(cfg):
    """Pipeline with alpha = (0, 0, 0.1) over k = 4, 8, 16."""
    return pipeline.run_pipeline(replace(cfg, alpha=(0.0, 0.0, 0.1), gamma=(0.0, 0.0, 0.0), k_list=(4.0, 8.0, 16.0)))


@pytest.fixture(scope="session")
def cm_run(cfg):
    """Pipeline with tau = 0 and gamma = (0, 0, 0.1) over k = 4, 8, 16."""
    return pipeline.run_pipeline(replace(cfg, alpha=(0.0, 0.0, 0.0), gamma=(0.0, 0.0, 0.1), k_list=(4.0, 8.0, 16.0)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
