"""Poison every row dated after ``t`` and check nothing observed at ``t`` moves.

Probes use ``t >= fit_stop``: the train-fitted components (embedding,
shock statistics, descriptor scaling, VAR) legitimately read all training
rows, so poisoning inside the training era would change them by design.
"""

from dataclasses import replace

import numpy as np
import pytest

from conftest import FIT_STOP, SMALL_SCR
from scenario_rl.agent import TrainConfig, exogenous_features, train, training_days
from scenario_rl.scr import ScenarioContext


def poison(tape, t):
    prices = tape.prices.copy()
    macro = tape.macro_raw.copy()
    prices[t + 1 :] = 1e9
    macro[t + 1 :] = -1e6
    return replace(tape, prices=prices, macro_raw=macro)


def assert_prefix_equal(a, b, t):
    np.testing.assert_array_equal(a[: t + 1], b[: t + 1])


@pytest.fixture(scope="module", params=[FIT_STOP, FIT_STOP + 37, FIT_STOP + 120])
def probe(request, tape, ctx):
    t = request.param
    return t, ctx, ScenarioContext(poison(tape, t), FIT_STOP, SMALL_SCR, seed=0)


def test_descriptor_channels_and_gate_unchanged(probe):
    t, clean, dirty = probe
    assert_prefix_equal(clean.psi, dirty.psi, t)
    assert_prefix_equal(clean.chi, dirty.chi, t)
    assert_prefix_equal(clean.g, dirty.g, t)
    assert_prefix_equal(clean.v, dirty.v, t)
    assert_prefix_equal(clean.regime.embeddings, dirty.regime.embeddings, t)
    assert_prefix_equal(exogenous_features(clean), exogenous_features(dirty), t)


def test_retrieval_unchanged(probe):
    t, clean, dirty = probe
    for s in (t - 3, t):
        np.testing.assert_array_equal(clean.neighbors(s), dirty.neighbors(s))
        np.testing.assert_array_equal(clean.atoms(s), dirty.atoms(s))


def test_training_stats_unchanged(probe):
    t, clean, dirty = probe
    cfg = TrainConfig(iterations=2, minibatch=64, seed=1)
    days = training_days(clean, 0, FIT_STOP, cfg)
    a = train(clean, days, cfg)
    b = train(dirty, days, cfg)
    assert a.stats == b.stats


def test_poisoning_the_current_row_is_detected(tape, ctx):
    # sanity check that the probe has teeth: poisoning row t itself must change psi_t
    t = FIT_STOP + 37
    dirty = ScenarioContext(poison(tape, t - 1), FIT_STOP, SMALL_SCR, seed=0)
    assert not np.array_equal(ctx.psi[t], dirty.psi[t])
