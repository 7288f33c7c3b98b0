import sys
import warnings

import pytest

from dynpipe.core import PRESETS, build_15to1, build_levels
from dynpipe.errors import IneffectiveLevelWarning
from dynpipe.simulator import TwoLevelConfig


@pytest.fixture
def table1():
    return PRESETS["table1"]


@pytest.fixture
def supercond():
    return PRESETS["supercond"]


@pytest.fixture
def table1_levels(table1):
    return build_levels((3, 9, 15), table1)


def make_config(d_low, d_high, budget, n_buf, params=PRESETS["supercond"], **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IneffectiveLevelWarning)
        low, high = build_levels((d_low, d_high), params)
    return TwoLevelConfig.build((low,), high, budget, n_buf, params, **kw)


@pytest.fixture
def config_factory():
    return make_config


@pytest.fixture
def d3_supercond(supercond):
    return build_15to1(3, supercond.eps_raw, supercond)


def pytest_terminal_summary(terminalreporter):
    mod = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
