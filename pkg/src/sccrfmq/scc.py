"""SCC-rFMQ: coordination resampling of a finite action set per state,
evaluated with frequency-maximum Q values.

One ``SccRfmqAgent`` is an independent learner for one agent. It keeps a
sparse table of ``StateLearner`` records, created the first time a state is
visited, so it scales to the five million cells of the boat game.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .core import ConfigError, DataError, RandomSource, UsageError, argmax_first

SIGMA_FLOOR = 1e-300


@dataclass
class HyperParams:
    alpha: float = 0.5
    alpha_f: float = 0.01
    gamma: float = 1.0
    c: int = 200
    sigma0: float = 0.33
    delta_d: float = 0.5
    delta_l: float = 1.1
    delta_re: float = 0.5
    # epsilon-greedy: eps = eps_scale / (eps_scale + visits since last resample)
    eps_scale: float = 10.0
    eta: float = 1e-9
    init: str = "even"
    # "variance": sigma is the variance of the resampling normal, so draws use
    # std sqrt(sigma); "std": sigma is used as the standard deviation directly
    sigma_mode: str = "variance"

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0 and 0.0 < self.alpha_f <= 1.0):
            raise ConfigError("alpha and alpha_f must lie in (0, 1]")
        if not self.delta_d < 1.0 < self.delta_l:
            raise ConfigError("need delta_d < 1 < delta_l")
        if not 0.0 <= self.delta_re < 1.0:
            raise ConfigError("delta_re must lie in [0, 1)")
        if self.sigma0 <= 0.0:
            raise ConfigError("sigma0 must be positive")
        if int(self.c) < 1:
            raise ConfigError("resample period c must be >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")
        if self.eps_scale <= 0.0:
            raise ConfigError("eps_scale must be positive")
        if self.init not in ("even", "uniform"):
            raise ConfigError(f"init must be 'even' or 'uniform', got {self.init!r}")
        if self.sigma_mode not in ("variance", "std"):
            raise ConfigError(f"sigma_mode must be 'variance' or 'std', got {self.sigma_mode!r}")
        self.c = int(self.c)

    @classmethod
    def keys(cls) -> set[str]:
        return {f.name for f in fields(cls)}


def even_actions(n: int) -> list[float]:
    return [i / (n + 1) for i in range(1, n + 1)]


class StateLearner:
    """Sample set and resampling bookkeeping for one state."""

    __slots__ = ("actions", "q", "qmax", "f", "e", "sigma", "eps_re",
                 "a_star", "v", "visits", "resamples")

    def __init__(self, actions: list[float], sigma0: float):
        n = len(actions)
        self.actions = list(actions)
        self.q = [0.0] * n
        self.qmax = [0.0] * n
        self.f = [1.0] * n
        self.e = [0.0] * n
        self.sigma = sigma0
        self.eps_re = 1.0
        self.a_star: float | None = None
        self.v = 0.0
        self.visits = 0
        self.resamples = 0

    def __len__(self):
        return len(self.actions)


def rfmq_update(st: StateLearner, i: int, target: float, alpha: float,
                alpha_f: float, eta: float) -> None:
    """Q step toward ``target`` followed by the max-priority frequency update."""
    q = (1.0 - alpha) * st.q[i] + alpha * target
    st.q[i] = q
    qmax = st.qmax[i]
    if target > qmax + eta:
        qmax = target
        st.qmax[i] = qmax
        f = 1.0
    elif target >= qmax - eta:
        f = (1.0 - alpha_f) * st.f[i] + alpha_f
    else:
        f = (1.0 - alpha_f) * st.f[i]
    st.f[i] = f
    st.e[i] = (1.0 - f) * q + f * qmax


class SccRfmqAgent:
    """Independent SCC-rFMQ learner over a continuous action in [0, 1]."""

    name = "scc_rfmq"

    def __init__(self, n: int, params: HyperParams | None = None,
                 rng: RandomSource | None = None):
        if n < 3:
            raise ConfigError("SCC-rFMQ needs n >= 3 samples so that n // 3 >= 1 survive a resample")
        self.n = n
        self.params = params or HyperParams()
        rng = rng or RandomSource(0, "scc")
        self._init_rng = rng.child("init")
        self._select_rng = rng.child("select")
        self._resample_rng = rng.child("resample")
        self.table: dict[int, StateLearner] = {}
        self._last: tuple[StateLearner, int] | None = None

    # -- table ------------------------------------------------------------
    def state(self, s: int) -> StateLearner:
        st = self.table.get(s)
        if st is None:
            if self.params.init == "even":
                acts = even_actions(self.n)
            else:
                acts = [self._init_rng.uniform() for _ in range(self.n)]
            st = StateLearner(acts, self.params.sigma0)
            self.table[s] = st
        return st

    def max_q(self, s: int) -> float:
        st = self.table.get(s)
        return max(st.q) if st is not None else 0.0

    # -- action selection -------------------------------------------------
    def epsilon(self, st: StateLearner) -> float:
        k = self.params.eps_scale
        return k / (k + st.visits)

    def select_action(self, st: StateLearner) -> int:
        if self._select_rng.uniform() < self.epsilon(st):
            return self._select_rng.index(len(st.actions))
        return argmax_first(st.e)

    def act(self, s: int) -> float:
        st = self.state(s)
        if st.visits >= self.params.c:
            self.coordination_resample(st)
        i = self.select_action(st)
        self._last = (st, i)
        return st.actions[i]

    # -- evaluation update ------------------------------------------------
    def observe(self, reward: float, next_state: int | None, terminal: bool) -> None:
        if self._last is None:
            raise UsageError("observe() called before act()")
        if not math.isfinite(reward):
            raise DataError(f"non-finite reward {reward!r}")
        st, i = self._last
        self._last = None
        p = self.params
        target = reward if terminal else reward + p.gamma * self.max_q(next_state)
        rfmq_update(st, i, target, p.alpha, p.alpha_f, p.eta)
        st.visits += 1

    def end_episode(self) -> None:
        pass

    # -- coordination resample --------------------------------------------
    def wolm_update(self, st: StateLearner) -> float:
        """Win-or-learn-more update of the exploratory rate; returns the new sigma."""
        p = self.params
        i = argmax_first(st.q)
        a_max = st.actions[i]
        if st.a_star is None or a_max != st.a_star:
            st.sigma = p.sigma0
        elif st.q[i] >= st.v:
            st.sigma = max(st.sigma * p.delta_d, SIGMA_FLOOR)
        else:
            st.sigma = min(st.sigma * p.delta_l, p.sigma0)
        return st.sigma

    def coordination_resample(self, st: StateLearner) -> None:
        p = self.params
        rng = self._resample_rng
        n = len(st.actions)
        i_max = argmax_first(st.q)
        a_max = st.actions[i_max]
        self.wolm_update(st)
        st.a_star = a_max
        st.v = st.q[i_max]

        k = n // 3
        order = sorted(range(n), key=lambda j: (-st.q[j], j))
        kept = sorted(order[:k])
        acts = [st.actions[j] for j in kept]
        spread = math.sqrt(st.sigma) if p.sigma_mode == "variance" else st.sigma
        for _ in range(n - k):
            if rng.uniform() < st.eps_re:
                a = rng.uniform()
            else:
                a = min(max(rng.normal(a_max, spread), 0.0), 1.0)
            acts.append(a)
        st.actions = acts
        st.eps_re *= p.delta_re

        # Q reset of the resample plus the F/Qmax/E reset of the evaluation layer
        st.q = [0.0] * n
        st.qmax = [0.0] * n
        st.f = [1.0] * n
        st.e = [0.0] * n
        st.visits = 0
        st.resamples += 1

    # -- inspection -------------------------------------------------------
    def best_action(self, s: int = 0) -> float:
        st = self.state(s)
        return st.actions[argmax_first(st.e)]

    def snapshot_rows(self) -> list[dict]:
        rows = []
        for s in sorted(self.table):
            st = self.table[s]
            for j in range(len(st.actions)):
                rows.append({
                    "state": s, "index": j, "action": st.actions[j],
                    "q": st.q[j], "qmax": st.qmax[j], "f": st.f[j], "e": st.e[j],
                    "sigma": st.sigma, "eps_re": st.eps_re,
                    "a_star": "" if st.a_star is None else st.a_star,
                    "v": st.v, "visits": st.visits,
                })
        return rows
