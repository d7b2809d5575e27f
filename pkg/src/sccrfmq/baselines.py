"""Comparison learners: discrete rFMQ, SMC-learning, SMC+rFMQ and CALA."""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, fields
from typing import Callable, Sequence

from .core import ConfigError, DataError, RandomSource, UsageError, argmax_first
from .scc import StateLearner, even_actions, rfmq_update

log = logging.getLogger(__name__)


def boltzmann_weights(values: Sequence[float], tau: float) -> list[float]:
    """Softmax of ``values / tau`` with max-subtraction."""
    if not tau > 0.0:
        raise ConfigError(f"temperature must be positive, got {tau}")
    m = max(values)
    ex = [math.exp((v - m) / tau) for v in values]
    z = sum(ex)
    return [e / z for e in ex]


def smc_rfmq_weights(dq: Sequence[float], tau: float) -> list[float]:
    """Boltzmann weights over per-round Q increments."""
    return boltzmann_weights(dq, tau)


def kernel_bandwidth(points: Sequence[float], weights: Sequence[float],
                     floor: float = 0.01) -> float:
    """Weighted std scaled by Silverman's factor (4 / 3n)^(1/5), floored."""
    n = len(points)
    mean = sum(w * p for w, p in zip(weights, points))
    var = sum(w * (p - mean) ** 2 for w, p in zip(weights, points))
    h = math.sqrt(max(var, 0.0)) * (4.0 / (3.0 * n)) ** 0.2
    return max(h, floor)


def temperature(t: int, tau0: float, decay: float, period: int) -> float:
    return tau0 * decay ** (t // period)


def _check_reward(reward: float) -> None:
    if not math.isfinite(reward):
        raise DataError(f"non-finite reward {reward!r}")


# ---------------------------------------------------------------- rFMQ

class DiscreteRfmqAgent:
    """rFMQ on a fixed action set, {i/(n+1)} unless ``actions`` is given.

    Exploration is epsilon = 10/(10+t) on a global round clock.
    """

    name = "rfmq"

    def __init__(self, n: int, alpha: float = 0.5, alpha_f: float = 0.01,
                 gamma: float = 1.0, eps_scale: float = 10.0, eta: float = 1e-9,
                 rng: RandomSource | None = None, actions: Sequence[float] | None = None):
        if actions is not None:
            n = len(actions)
        if n < 1:
            raise ConfigError("rFMQ needs at least one action")
        self.n = n
        self._actions = list(actions) if actions is not None else even_actions(n)
        self.alpha, self.alpha_f, self.gamma = alpha, alpha_f, gamma
        self.eps_scale, self.eta = eps_scale, eta
        self.t = 0
        self._rng = (rng or RandomSource(0, "rfmq")).child("select")
        self.table: dict[int, StateLearner] = {}
        self._last: tuple[StateLearner, int] | None = None

    def state(self, s: int) -> StateLearner:
        st = self.table.get(s)
        if st is None:
            st = self.table[s] = StateLearner(list(self._actions), 0.0)
        return st

    def epsilon(self) -> float:
        return self.eps_scale / (self.eps_scale + self.t)

    def act(self, s: int) -> float:
        st = self.state(s)
        if self._rng.uniform() < self.epsilon():
            i = self._rng.index(self.n)
        else:
            i = argmax_first(st.e)
        self._last = (st, i)
        return st.actions[i]

    def observe(self, reward: float, next_state: int | None, terminal: bool) -> None:
        _check_reward(reward)
        st, i = self._last
        if terminal:
            target = reward
        else:
            nxt = self.table.get(next_state)
            target = reward + self.gamma * (max(nxt.q) if nxt else 0.0)
        rfmq_update(st, i, target, self.alpha, self.alpha_f, self.eta)
        st.visits += 1
        self.t += 1

    def end_episode(self) -> None:
        pass

    def best_action(self, s: int = 0) -> float:
        st = self.state(s)
        return st.actions[argmax_first(st.e)]

    def snapshot_rows(self) -> list[dict]:
        return [{"state": s, "index": j, "action": st.actions[j], "q": st.q[j],
                 "qmax": st.qmax[j], "f": st.f[j], "e": st.e[j]}
                for s, st in sorted(self.table.items()) for j in range(self.n)]


# ---------------------------------------------------------------- SMC

@dataclass
class SmcParams:
    alpha: float = 0.5
    gamma: float = 1.0
    threshold: float = 0.9
    tau0: float = 25.0
    tau_decay: float = 0.9
    tau_period: int = 5000
    bandwidth_floor: float = 0.01
    init: str = "even"

    def __post_init__(self):
        if self.tau0 <= 0.0:
            raise ConfigError("tau0 must be positive")
        if not 0.0 < self.threshold <= 1.0:
            raise ConfigError("resample threshold must lie in (0, 1]")
        if self.init not in ("even", "uniform"):
            raise ConfigError(f"unknown init mode {self.init!r}")
        self.tau_period = int(self.tau_period)

    @classmethod
    def keys(cls) -> set[str]:
        return {f.name for f in fields(cls)}


class SmcActor:
    """Weighted action samples and their critic values for one state."""

    __slots__ = ("actions", "q", "w")

    def __init__(self, actions: list[tuple[float, ...]]):
        n = len(actions)
        self.actions = actions
        self.q = [0.0] * n
        self.w = [1.0 / n] * n


def smc_select(actor: SmcActor, rng: RandomSource) -> int:
    if not any(w > 0.0 for w in actor.w):
        log.warning("all SMC weights are zero; resetting to uniform")
        n = len(actor.w)
        actor.w = [1.0 / n] * n
    return rng.categorical(actor.w)


def smc_resample(actor: SmcActor, rng: RandomSource, floor: float = 0.01) -> None:
    """Importance resampling with a Gaussian kernel; weights uniform, Q reset."""
    n = len(actor.actions)
    dim = len(actor.actions[0])
    hs = [kernel_bandwidth([a[d] for a in actor.actions], actor.w, floor) for d in range(dim)]
    parents = [rng.categorical(actor.w) for _ in range(n)]
    actor.actions = [
        tuple(min(max(actor.actions[p][d] + rng.normal(0.0, hs[d]), 0.0), 1.0) for d in range(dim))
        for p in parents
    ]
    actor.w = [1.0 / n] * n
    actor.q = [0.0] * n


class SmcAgent:
    """SMC-learning actor-critic.

    ``dim=2`` gives the single-controller variant that picks a joint
    action; its initial set is the ``n x n`` product of the even grid.
    """

    name = "smc"

    def __init__(self, n: int, params: SmcParams | None = None,
                 rng: RandomSource | None = None, dim: int = 1):
        if n < 1 or dim not in (1, 2):
            raise ConfigError("SMC needs n >= 1 and dim in {1, 2}")
        self.n = n
        self.dim = dim
        self.params = params or SmcParams()
        rng = rng or RandomSource(0, "smc")
        self._init_rng = rng.child("init")
        self._select_rng = rng.child("select")
        self._resample_rng = rng.child("resample")
        self.t = 0
        self.resamples = 0
        self.table: dict[int, SmcActor] = {}
        self._last: tuple[SmcActor, int] | None = None

    def state(self, s: int) -> SmcActor:
        actor = self.table.get(s)
        if actor is None:
            if self.params.init == "even":
                acts = list(itertools.product(even_actions(self.n), repeat=self.dim))
            else:
                acts = [tuple(self._init_rng.uniform() for _ in range(self.dim))
                        for _ in range(self.n ** self.dim)]
            actor = self.table[s] = SmcActor(acts)
        return actor

    @property
    def tau(self) -> float:
        p = self.params
        return temperature(self.t, p.tau0, p.tau_decay, p.tau_period)

    def act(self, s: int):
        actor = self.state(s)
        i = smc_select(actor, self._select_rng)
        self._last = (actor, i)
        a = actor.actions[i]
        return a[0] if self.dim == 1 else a

    def observe(self, reward: float, next_state: int | None, terminal: bool) -> None:
        _check_reward(reward)
        actor, i = self._last
        self.smc_update(actor, i, reward, None if terminal else next_state)

    def smc_update(self, actor: SmcActor, i: int, reward: float, next_state: int | None) -> None:
        p = self.params
        target = reward
        if next_state is not None:
            nxt = self.table.get(next_state)
            target += p.gamma * (max(nxt.q) if nxt else 0.0)
        actor.q[i] = (1.0 - p.alpha) * actor.q[i] + p.alpha * target
        actor.w = boltzmann_weights(actor.q, self.tau)
        if max(actor.w) > p.threshold:
            smc_resample(actor, self._resample_rng, p.bandwidth_floor)
            self.resamples += 1

    def end_episode(self) -> None:
        self.t += 1

    def best_action(self, s: int = 0):
        actor = self.state(s)
        a = actor.actions[argmax_first(actor.w)]
        return a[0] if self.dim == 1 else a

    def snapshot_rows(self) -> list[dict]:
        rows = []
        for s, actor in sorted(self.table.items()):
            for j, a in enumerate(actor.actions):
                rows.append({"state": s, "index": j, "action": " ".join(repr(x) for x in a),
                             "q": actor.q[j], "w": actor.w[j]})
        return rows


# ---------------------------------------------------------------- SMC + rFMQ

@dataclass
class SmcRfmqParams:
    alpha: float = 0.5
    alpha_f: float = 0.01
    gamma: float = 1.0
    c: int = 200
    eps_scale: float = 10.0
    tau0: float = 20.0
    tau_decay: float = 0.9
    tau_period: int = 5000
    bandwidth_floor: float = 0.01
    eta: float = 1e-9

    def __post_init__(self):
        if self.tau0 <= 0.0:
            raise ConfigError("tau0 must be positive")
        if int(self.c) < 1:
            raise ConfigError("resample period c must be >= 1")
        self.c = int(self.c)
        self.tau_period = int(self.tau_period)

    @classmethod
    def keys(cls) -> set[str]:
        return {f.name for f in fields(cls)}


class _WeightedState(StateLearner):
    __slots__ = ("w",)

    def __init__(self, actions: list[float]):
        super().__init__(actions, 0.0)
        self.w = [1.0 / len(actions)] * len(actions)


class SmcRfmqAgent:
    """Multi-state rFMQ evaluation with SMC importance resampling every ``c`` visits.

    Importance weights are carried from round to round: each update
    multiplies them by the Boltzmann weights of the Q increments and
    renormalises.
    """

    name = "smc_rfmq"

    def __init__(self, n: int, params: SmcRfmqParams | None = None,
                 rng: RandomSource | None = None):
        if n < 1:
            raise ConfigError("SMC+rFMQ needs at least one sample")
        self.n = n
        self.params = params or SmcRfmqParams()
        rng = rng or RandomSource(0, "smc_rfmq")
        self._select_rng = rng.child("select")
        self._resample_rng = rng.child("resample")
        self.t = 0
        self.table: dict[int, _WeightedState] = {}
        self._last: tuple[_WeightedState, int] | None = None

    def state(self, s: int) -> _WeightedState:
        st = self.table.get(s)
        if st is None:
            st = self.table[s] = _WeightedState(even_actions(self.n))
        return st

    @property
    def tau(self) -> float:
        p = self.params
        return temperature(self.t, p.tau0, p.tau_decay, p.tau_period)

    def act(self, s: int) -> float:
        st = self.state(s)
        if st.visits >= self.params.c:
            self.resample(st)
        k = self.params.eps_scale
        if self._select_rng.uniform() < k / (k + st.visits):
            i = self._select_rng.index(len(st.actions))
        else:
            i = argmax_first(st.e)
        self._last = (st, i)
        return st.actions[i]

    def observe(self, reward: float, next_state: int | None, terminal: bool) -> None:
        _check_reward(reward)
        p = self.params
        st, i = self._last
        if terminal:
            target = reward
        else:
            nxt = self.table.get(next_state)
            target = reward + p.gamma * (max(nxt.q) if nxt else 0.0)
        old = st.q[i]
        rfmq_update(st, i, target, p.alpha, p.alpha_f, p.eta)
        dq = [0.0] * len(st.q)
        dq[i] = st.q[i] - old
        g = smc_rfmq_weights(dq, self.tau)
        w = [a * b for a, b in zip(st.w, g)]
        z = sum(w)
        if z > 0.0:
            st.w = [x / z for x in w]
        else:
            log.warning("SMC+rFMQ weights underflowed; resetting to uniform")
            st.w = [1.0 / len(w)] * len(w)
        st.visits += 1

    def resample(self, st: _WeightedState) -> None:
        n = len(st.actions)
        rng = self._resample_rng
        h = kernel_bandwidth(st.actions, st.w, self.params.bandwidth_floor)
        parents = [rng.categorical(st.w) for _ in range(n)]
        st.actions = [min(max(st.actions[j] + rng.normal(0.0, h), 0.0), 1.0) for j in parents]
        st.w = [1.0 / n] * n
        st.q = [0.0] * n
        st.qmax = [0.0] * n
        st.f = [1.0] * n
        st.e = [0.0] * n
        st.visits = 0
        st.resamples += 1

    def end_episode(self) -> None:
        self.t += 1

    def best_action(self, s: int = 0) -> float:
        st = self.state(s)
        return st.actions[argmax_first(st.e)]

    def snapshot_rows(self) -> list[dict]:
        return [{"state": s, "index": j, "action": st.actions[j], "q": st.q[j],
                 "qmax": st.qmax[j], "f": st.f[j], "e": st.e[j], "w": st.w[j]}
                for s, st in sorted(self.table.items()) for j in range(len(st.actions))]


# ---------------------------------------------------------------- CALA

@dataclass
class CalaParams:
    lam: float = 0.05
    sigma_l: float = 1e-5
    k: float = 1.0
    mu0: float = 0.5
    s0: float = 0.33

    def __post_init__(self):
        if self.lam <= 0.0 or self.sigma_l <= 0.0:
            raise ConfigError("lam and sigma_l must be positive")
        if not 0.0 <= self.mu0 <= 1.0:
            raise ConfigError("mu0 must lie in [0, 1]")

    @classmethod
    def keys(cls) -> set[str]:
        return {f.name for f in fields(cls)}


class CalaAgent:
    """Continuous action learning automaton with a Gaussian policy N(mu, s).

    Stateless games only: every round it needs the reward of both the
    sampled action and the current mean.
    """

    name = "cala"

    def __init__(self, params: CalaParams | None = None, rng: RandomSource | None = None):
        self.params = params or CalaParams()
        self.mu = self.params.mu0
        self.s = max(self.params.s0, self.params.sigma_l)
        self._rng = (rng or RandomSource(0, "cala")).child("sample")
        self._lo = math.inf
        self._hi = -math.inf
        self.x: float | None = None

    @property
    def phi(self) -> float:
        return max(self.s, self.params.sigma_l)

    def sample(self) -> float:
        self.x = min(max(self._rng.normal(self.mu, self.phi), 0.0), 1.0)
        return self.x

    def _scale(self, beta: float) -> float:
        span = self._hi - self._lo
        return (beta - self._lo) / span if span > 0.0 else 0.0

    def update(self, beta_x: float, beta_mu: float) -> None:
        _check_reward(beta_x)
        _check_reward(beta_mu)
        if self.x is None:
            raise UsageError("update() called before sample()")
        p = self.params
        self._lo = min(self._lo, beta_x, beta_mu)
        self._hi = max(self._hi, beta_x, beta_mu)
        diff = self._scale(beta_x) - self._scale(beta_mu)
        phi = self.phi
        z = (self.x - self.mu) / phi
        self.mu = min(max(self.mu + p.lam * diff * z, 0.0), 1.0)
        s = self.s + p.lam * diff * (z * z - 1.0) - p.lam * p.k * (self.s - p.sigma_l)
        self.s = max(s, p.sigma_l)
        self.x = None

    def end_episode(self) -> None:
        pass

    def best_action(self, s: int = 0) -> float:
        return self.mu

    def snapshot_rows(self) -> list[dict]:
        return [{"state": 0, "index": 0, "action": self.mu, "s": self.s}]


def cala_step(policy: CalaAgent, evaluate: Callable[[float, float], tuple[float, float]]) -> CalaAgent:
    """One automaton round; ``evaluate(x, mu)`` returns the rewards of playing x and mu."""
    x = policy.sample()
    beta_x, beta_mu = evaluate(x, policy.mu)
    policy.update(beta_x, beta_mu)
    return policy
