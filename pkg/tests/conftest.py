"""Shared fixtures: random parameter sets for cells and small batches."""

import numpy as np
import pytest

from elstm_lab.numkernel import make_rng


def random_gated_params(rng, n, d, with_scale=False, scale_period=None, scale="random"):
    """Random LSTM-style parameter dict over joint-input width d.

    With ``with_scale`` a periodic scaling table "s" and cell bias "b" are
    added; ``scale`` chooses their values ("random" or "identity" for the
    s = 1, b = 0 configuration).
    """
    params = {}
    for name in ("W_f", "W_i", "W_o", "W_in"):
        params[name] = rng.normal(scale=0.8, size=(n, d))
    for name in ("b_f", "b_i", "b_o", "b_in"):
        params[name] = rng.normal(scale=0.3, size=n)
    if with_scale:
        period = scale_period or 4
        if scale == "identity":
            params["s"] = np.ones((period, n))
            params["b"] = np.zeros(n)
        else:
            params["s"] = rng.normal(loc=1.0, scale=0.5, size=(period, n))
            params["b"] = rng.normal(scale=0.2, size=n)
    return params


@pytest.fixture
def rng():
    return make_rng(1234)


# One line per acceptance criterion, echoed after the run so the verdicts
# survive pytest's stdout capture.
CRITERION_LINES = []


def record_criterion(line):
    CRITERION_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)
