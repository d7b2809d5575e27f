import logging
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sccrfmq.baselines import (CalaAgent, CalaParams, DiscreteRfmqAgent, SmcActor, SmcAgent,
                               SmcParams, SmcRfmqAgent, SmcRfmqParams, boltzmann_weights,
                               cala_step, kernel_bandwidth, smc_resample, smc_rfmq_weights,
                               smc_select, temperature)
from sccrfmq.core import ConfigError, RandomSource
from sccrfmq.games import climbing_game

LN2 = math.log(2.0)


# ------------------------------------------------------------------ rFMQ

def test_rfmq_initial_set_and_exploration():
    ag = DiscreteRfmqAgent(5, rng=RandomSource(0, "r"))
    assert ag.state(0).actions == [1 / 6, 2 / 6, 3 / 6, 4 / 6, 5 / 6]
    assert ag.epsilon() == 1.0
    ag.act(0)
    ag.observe(3.0, 0, True)
    assert ag.t == 1 and ag.epsilon() == pytest.approx(10 / 11)


def test_rfmq_new_max_sets_frequency_one():
    ag = DiscreteRfmqAgent(3, rng=RandomSource(0, "r"))
    st_ = ag.state(0)
    st_.qmax = [5.0, 5.0, 5.0]
    st_.f = [0.2, 0.2, 0.2]
    a = ag.act(0)
    i = st_.actions.index(a)
    ag.observe(9.0, 0, True)
    assert st_.f[i] == 1.0 and st_.qmax[i] == 9.0
    assert st_.e[i] == pytest.approx(9.0)


def test_rfmq_greedy_after_long_run():
    ag = DiscreteRfmqAgent(4, rng=RandomSource(1, "r"))
    ag.t = 10**7
    st_ = ag.state(0)
    st_.e = [0.0, 0.0, 3.0, 1.0]
    assert {ag.act(0) for _ in range(100)} == {st_.actions[2]}


# ------------------------------------------------------------------ weights

def test_boltzmann_examples():
    assert boltzmann_weights([2.0, 2.0, 2.0, 2.0], 1.0) == pytest.approx([0.25] * 4)
    assert boltzmann_weights([3.0 * LN2, 0.0], 3.0) == pytest.approx([2 / 3, 1 / 3])
    with pytest.raises(ConfigError):
        boltzmann_weights([1.0], 0.0)


def test_smc_rfmq_weights_examples():
    assert smc_rfmq_weights([0.0] * 5, 20.0) == pytest.approx([0.2] * 5)
    assert smc_rfmq_weights([20.0 * LN2, 0.0], 20.0) == pytest.approx([2 / 3, 1 / 3])
    w = smc_rfmq_weights([1e6 * 20.0, 0.0, -3.0], 20.0)
    assert all(math.isfinite(x) for x in w)
    assert w[0] == pytest.approx(1.0) and sum(w) == pytest.approx(1.0)


values = st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20)


@given(values, st.floats(-1e3, 1e3), st.floats(0.05, 100.0))
def test_weights_shift_invariant_and_normalised(dq, shift, tau):
    w = smc_rfmq_weights(dq, tau)
    assert all(x >= 0.0 for x in w)
    assert abs(sum(w) - 1.0) <= 1e-12
    w2 = smc_rfmq_weights([x + shift for x in dq], tau)
    assert w2 == pytest.approx(w, abs=1e-9)


def test_temperature_schedules():
    assert temperature(4999, 25.0, 0.9, 5000) == 25.0
    assert temperature(5000, 25.0, 0.9, 5000) == pytest.approx(25.0 * 0.9)
    assert temperature(4000, 10.0, 0.9, 2000) == pytest.approx(10.0 * 0.81)


# ------------------------------------------------------------------ SMC

def test_smc_select_uniform_frequencies():
    actor = SmcActor([(i / 10,) for i in range(10)])
    rng = RandomSource(2, "sel")
    counts = np.bincount([smc_select(actor, rng) for _ in range(100_000)], minlength=10)
    assert np.all(np.abs(counts / 100_000 - 0.1) < 0.01)


def test_smc_select_degenerate_weights(caplog):
    rng = RandomSource(2, "sel")
    actor = SmcActor([(0.1,), (0.2,), (0.3,), (0.4,)])
    actor.w = [1.0, 0.0, 0.0, 0.0]
    assert {smc_select(actor, rng) for _ in range(500)} == {0}
    actor.w = [0.5, 0.5, 0.0, 0.0]
    assert {smc_select(actor, rng) for _ in range(500)} == {0, 1}
    actor.w = [0.0] * 4
    with caplog.at_level(logging.WARNING):
        smc_select(actor, rng)
    assert actor.w == [0.25] * 4
    assert "zero" in caplog.text


def test_smc_update_weights_are_boltzmann_over_q():
    ag = SmcAgent(2, SmcParams(tau0=5.0, threshold=1.0), RandomSource(0, "s"))
    actor = ag.state(0)
    ag.smc_update(actor, 0, 0.0, None)
    assert actor.w == pytest.approx([0.5, 0.5])
    actor.q = [0.0, 0.0]
    ag.smc_update(actor, 0, 4.0 * LN2, None)
    assert actor.w == pytest.approx(boltzmann_weights([2.0 * LN2, 0.0], 5.0))
    ag.t = 5000
    assert ag.tau == pytest.approx(5.0 * 0.9)


def test_smc_update_closed_form_two_thirds():
    ag = SmcAgent(2, SmcParams(tau0=3.0, threshold=1.0), RandomSource(0, "s"))
    actor = ag.state(0)
    ag.smc_update(actor, 0, 2.0 * 3.0 * LN2, None)
    assert actor.q == pytest.approx([3.0 * LN2, 0.0])
    assert actor.w == pytest.approx([2 / 3, 1 / 3])


def test_smc_bad_temperature():
    with pytest.raises(ConfigError):
        SmcParams(tau0=0.0)


def test_kernel_bandwidth_against_numpy():
    rng = np.random.default_rng(4)
    for _ in range(50):
        n = int(rng.integers(2, 30))
        pts = rng.random(n)
        w = rng.random(n)
        w /= w.sum()
        ref = max(float(np.sqrt(np.cov(pts, aweights=w, ddof=0))) * (4 / (3 * n)) ** 0.2, 0.01)
        assert kernel_bandwidth(pts.tolist(), w.tolist()) == pytest.approx(ref, rel=1e-9)
    assert kernel_bandwidth([0.3] * 5, [0.2] * 5) == 0.01


def test_smc_resample_from_degenerate_weights():
    actor = SmcActor([(0.4,), (0.9,), (0.1,), (0.6,), (0.2,)])
    actor.w = [1.0, 0.0, 0.0, 0.0, 0.0]
    actor.q = [3.0, 1.0, 0.0, 0.0, 0.0]
    smc_resample(actor, RandomSource(0, "rs"))
    # weighted std is zero, so the kernel falls back to the 0.01 floor
    assert all(abs(a[0] - 0.4) < 0.06 for a in actor.actions)
    assert actor.w == [0.2] * 5 and actor.q == [0.0] * 5


def test_smc_resample_triggered_by_concentration():
    ag = SmcAgent(4, SmcParams(tau0=1.0, threshold=0.9), RandomSource(0, "s"))
    actor = ag.state(0)
    actor.q = [10.0, 0.0, 0.0, 0.0]
    ag.smc_update(actor, 0, 20.0, None)
    assert ag.resamples == 1
    assert actor.w == [0.25] * 4


def test_smc_joint_agent():
    ag = SmcAgent(5, SmcParams(), RandomSource(0, "s"), dim=2)
    actor = ag.state(0)
    assert len(actor.actions) == 25
    a = ag.act(0)
    assert isinstance(a, tuple) and len(a) == 2
    ag.observe(1.0, None, True)
    assert sum(actor.w) == pytest.approx(1.0)


def test_smc_weights_normalised_through_learning():
    ag = SmcAgent(10, SmcParams(threshold=0.5, tau0=2.0), RandomSource(3, "s"))
    rng = RandomSource(1, "r")
    for _ in range(5000):
        a = ag.act(0)
        ag.observe(10.0 * a + rng.normal(), 0, True)
        w = ag.state(0).w
        assert min(w) >= 0.0 and abs(sum(w) - 1.0) <= 1e-12
    assert ag.resamples > 0


# ------------------------------------------------------------------ SMC + rFMQ

def test_smc_rfmq_weights_normalised_and_resampled():
    ag = SmcRfmqAgent(10, SmcRfmqParams(c=50), RandomSource(0, "sr"))
    rng = RandomSource(1, "r")
    for _ in range(1000):
        a = ag.act(0)
        ag.observe(5.0 - 10.0 * abs(a - 0.3) + rng.normal(), 0, True)
        ag.end_episode()
        w = ag.state(0).w
        assert min(w) >= 0.0 and abs(sum(w) - 1.0) <= 1e-12
    st_ = ag.state(0)
    assert st_.resamples == 19
    assert all(0.0 <= a <= 1.0 for a in st_.actions)


def test_smc_rfmq_weight_recursion():
    ag = SmcRfmqAgent(3, SmcRfmqParams(tau0=2.0), RandomSource(0, "sr"))
    st_ = ag.state(0)
    ag._last = (st_, 1)
    ag.observe(4.0, None, True)  # Q[1]: 0 -> 2
    expected = [1.0, math.exp(2.0 / 2.0), 1.0]
    z = sum(expected)
    assert st_.w == pytest.approx([x / z for x in expected])


# ------------------------------------------------------------------ CALA

def test_cala_equal_rewards_leave_mean():
    ag = CalaAgent(CalaParams(mu0=0.3), RandomSource(0, "c"))
    for _ in range(50):
        ag.sample()
        ag.update(2.0, 2.0)
    assert ag.mu == 0.3


def test_cala_sample_at_mean_leaves_mean():
    ag = CalaAgent(CalaParams(mu0=0.3), RandomSource(0, "c"))
    ag._lo, ag._hi = 0.0, 10.0
    ag.x = 0.3
    ag.update(9.0, 1.0)
    assert ag.mu == 0.3


def test_cala_spread_decays_to_floor():
    ag = CalaAgent(CalaParams(), RandomSource(0, "c"))
    seen = []
    for _ in range(2000):
        cala_step(ag, lambda x, mu: (1.0, 1.0))
        seen.append(ag.s)
        assert ag.s >= 1e-5
    assert seen[-1] == pytest.approx(1e-5, rel=1e-3)
    assert all(a >= b for a, b in zip(seen, seen[1:]))


def test_cala_moves_toward_better_rewards():
    ag = CalaAgent(CalaParams(mu0=0.5, s0=0.2, k=0.0), RandomSource(0, "c"))
    for _ in range(3000):
        cala_step(ag, lambda x, mu: (-(x - 0.8) ** 2, -(mu - 0.8) ** 2))
        assert ag.s >= 1e-5
    assert ag.mu == pytest.approx(0.8, abs=0.05)


def test_rfmq_coordinates_on_three_action_climbing_game():
    game = climbing_game()
    coordinated = 0
    for run in range(50):
        base = RandomSource(run, "rfmq3")
        agents = [DiscreteRfmqAgent(3, rng=base.child(f"agent{i}"), actions=[0.0, 0.5, 1.0])
                  for i in range(2)]
        env = base.child("env")
        greedy = []
        for t in range(20_000):
            tr = game.step([ag.act(0) for ag in agents], env)
            for ag in agents:
                ag.observe(tr.reward, None, True)
            if t >= 19_000:
                greedy.append(tuple(ag.best_action(0) for ag in agents))
        coordinated += set(greedy) == {(0.0, 0.0)}
    assert coordinated > 25
