"""Shared numeric primitives and the seeded randomness contract."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

_BLOCK = 4096


class UsageError(ValueError):
    """Raised when an operation is called outside its precondition."""


class ConfigError(ValueError):
    """Raised for invalid learner or experiment configuration."""


class DataError(ValueError):
    """Raised when a learner is fed non-finite data."""


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise UsageError(f"invalid interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __contains__(self, x: float) -> bool:
        return self.lo <= x <= self.hi


def project(x: float, iv: Interval) -> float:
    """Clamp ``x`` into ``iv``."""
    return min(max(x, iv.lo), iv.hi)


def argmax_first(values: Sequence[float]) -> int:
    """Index of the largest value, lowest index on ties."""
    if len(values) == 0:
        raise UsageError("argmax_first of an empty sequence")
    best = 0
    best_v = values[0]
    for i in range(1, len(values)):
        v = values[i]
        if v > best_v:
            best, best_v = i, v
    return best


def _label_key(label: str) -> int:
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class RandomSource:
    """Independent PCG64 stream keyed by ``(seed, label)``.

    Draws are served from pre-generated blocks so scalar calls stay cheap;
    the block size never changes the sequence, since uniforms and normals
    come from two separately keyed child streams.
    """

    def __init__(self, seed: int, label: str = ""):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.label = label
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(_label_key(label),))
        u_seq, n_seq = ss.spawn(2)
        self._ugen = np.random.Generator(np.random.PCG64(u_seq))
        self._ngen = np.random.Generator(np.random.PCG64(n_seq))
        self._ubuf: list[float] = []
        self._ui = 0
        self._nbuf: list[float] = []
        self._ni = 0

    def child(self, label: str) -> "RandomSource":
        return RandomSource(self.seed, f"{self.label}/{label}")

    def uniform(self) -> float:
        """One draw on [0, 1)."""
        i = self._ui
        if i >= len(self._ubuf):
            self._ubuf = self._ugen.random(_BLOCK).tolist()
            i = 0
        self._ui = i + 1
        return self._ubuf[i]

    def normal(self, mean: float = 0.0, std: float = 1.0) -> float:
        i = self._ni
        if i >= len(self._nbuf):
            self._nbuf = self._ngen.standard_normal(_BLOCK).tolist()
            i = 0
        self._ni = i + 1
        return mean + std * self._nbuf[i]

    def index(self, n: int) -> int:
        """Uniform integer in ``range(n)``."""
        k = int(self.uniform() * n)
        return k if k < n else n - 1

    def categorical(self, weights: Sequence[float]) -> int:
        """Index drawn with probability proportional to ``weights``."""
        total = 0.0
        for w in weights:
            total += w
        u = self.uniform() * total
        acc = 0.0
        last = 0
        for i, w in enumerate(weights):
            if w > 0.0:
                last = i
                acc += w
                if u < acc:
                    return i
        return last
