"""Experiment orchestration: configuration, seeded runs, metrics and output files."""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .baselines import (CalaAgent, CalaParams, DiscreteRfmqAgent, SmcAgent, SmcParams,
                        SmcRfmqAgent, SmcRfmqParams)
from .core import ConfigError, RandomSource, UsageError
from .games import BoatGame, MatrixGame, climbing_game, colormap_grid, stochastic_climbing_game
from .scc import HyperParams, SccRfmqAgent

GAMES = ("cg", "pscg", "boat", "custom-grid")
ALGOS = ("scc_rfmq", "rfmq", "smc", "smc_rfmq", "cala")
MATRIX_GAMES = ("cg", "pscg", "custom-grid")

# Learner parameters accepted through ``--param key=value``. Prefixed keys
# address one learner family; bare keys are shared.
PARAM_KEYS = {
    "alpha", "alpha_f", "gamma", "c", "sigma0", "delta_d", "delta_l", "delta_re",
    "eps_scale", "eta", "init", "sigma_mode",
    "smc_threshold", "smc_tau0", "smc_tau_decay", "smc_tau_period", "bandwidth_floor",
    "smc_rfmq_tau0", "smc_rfmq_tau_decay", "smc_rfmq_tau_period",
    "cala_lam", "cala_sigma_l", "cala_k", "cala_mu0", "cala_s0",
    "step_cap", "grid",
}
TOP_KEYS = {"game", "algo", "agents", "episodes", "runs", "seed", "samples", "out", "workers"}


@dataclass
class ExperimentConfig:
    game: str = "cg"
    algo: tuple[str, ...] = ("scc_rfmq",)
    agents: int = 2
    episodes: int | None = None
    runs: int = 1
    seed: int = 0
    samples: int | None = None
    out: str | None = None
    workers: int = 1
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.algo, str):
            self.algo = tuple(a.strip() for a in self.algo.split(",") if a.strip())
        self.algo = tuple(self.algo)
        if self.game not in GAMES:
            raise ConfigError(f"unknown game {self.game!r}; choose from {', '.join(GAMES)}")
        for a in self.algo:
            if a not in ALGOS:
                raise ConfigError(f"unknown algo {a!r}; choose from {', '.join(ALGOS)}")
        if self.agents not in (1, 2):
            raise ConfigError("agents must be 1 or 2")
        if len(self.algo) not in (1, self.agents):
            raise ConfigError(f"give one algo or one per agent ({self.agents}), got {len(self.algo)}")
        if len(self.algo) == 1:
            self.algo = self.algo * self.agents
        if self.agents == 1 and (self.game != "boat" or self.algo != ("smc",)):
            raise ConfigError("the single-controller mode (agents=1) exists only for smc on boat")
        if "cala" in self.algo:
            if self.game not in ("cg", "pscg"):
                raise ConfigError("cala is only defined for the stateless games cg and pscg")
            if set(self.algo) != {"cala"}:
                raise ConfigError("cala cannot be mixed with other learners")
        if self.game == "custom-grid" and "grid" not in self.params:
            raise ConfigError("custom-grid needs --param grid=v1,...,v9 (row-major, agent 1 rows)")
        unknown = set(self.params) - PARAM_KEYS
        if unknown:
            raise ConfigError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
        if self.episodes is None:
            self.episodes = 800_000 if self.game == "boat" else 80_000
        self.episodes = int(self.episodes)
        self.runs = int(self.runs)
        self.workers = int(self.workers)
        if self.episodes < 1 or self.runs < 1:
            raise ConfigError("episodes and runs must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        # fail early on bad learner parameters
        for i in range(self.agents):
            make_agent(self, i, RandomSource(0, "probe"))

    @property
    def is_matrix(self) -> bool:
        return self.game in MATRIX_GAMES

    def as_items(self) -> list[tuple[str, str]]:
        items = [("game", self.game), ("algo", ",".join(self.algo)), ("agents", str(self.agents)),
                 ("episodes", str(self.episodes)), ("runs", str(self.runs)),
                 ("seed", str(self.seed))]
        if self.samples is not None:
            items.append(("samples", str(self.samples)))
        items += [(k, str(self.params[k])) for k in sorted(self.params)]
        return items


def _coerce(value: str):
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    return value


def parse_items(lines: Iterable[str]) -> dict:
    """Parse flat ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key=value, got {raw.rstrip()!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out


def load_config(path: str | os.PathLike | None = None, **flags) -> ExperimentConfig:
    """Build a config from an optional key=value file, overridden by ``flags``.

    Top-level keys map onto ``ExperimentConfig`` fields; every other key is a
    learner/environment parameter and must appear in ``PARAM_KEYS``.
    """
    raw: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        raw.update(parse_items(text.splitlines()))
    params = dict(flags.pop("params", None) or {})
    raw.update({k: v for k, v in flags.items() if v is not None})
    top = {}
    for k, v in raw.items():
        if k in TOP_KEYS:
            top[k] = v
        elif k in PARAM_KEYS:
            params.setdefault(k, v)
        else:
            raise ConfigError(f"unknown configuration key {k!r}")
    for k in ("agents", "episodes", "runs", "seed", "samples", "workers"):
        if k in top and isinstance(top[k], str):
            try:
                top[k] = int(top[k])
            except ValueError as exc:
                raise ConfigError(f"{k} must be an integer, got {top[k]!r}") from exc
    params = {k: (_coerce(v) if isinstance(v, str) and k not in ("init", "sigma_mode", "grid") else v)
              for k, v in params.items()}
    return ExperimentConfig(params=params, **top)


# ------------------------------------------------------------------ factories

def make_game(cfg: ExperimentConfig):
    if cfg.game == "cg":
        return climbing_game()
    if cfg.game == "pscg":
        return stochastic_climbing_game()
    if cfg.game == "custom-grid":
        vals = [float(v) for v in str(cfg.params["grid"]).replace(";", ",").split(",")]
        if len(vals) != 9:
            raise ConfigError("grid needs exactly 9 comma-separated values")
        return MatrixGame([np.reshape(vals, (3, 3))])
    return BoatGame(step_cap=int(cfg.params.get("step_cap", 200)))


def _pick(params: dict, keys: Iterable[str], prefix: str = "") -> dict:
    return {k: params[prefix + k] for k in keys if prefix + k in params}


def default_samples(cfg: ExperimentConfig, algo: str) -> int:
    if cfg.samples is not None:
        return int(cfg.samples)
    if cfg.game == "boat":
        if cfg.agents == 1:
            return 5
        return 5 if algo == "scc_rfmq" else 10
    return 10


def make_agent(cfg: ExperimentConfig, index: int, rng: RandomSource):
    algo = cfg.algo[index]
    p = cfg.params
    n = default_samples(cfg, algo)
    if algo == "scc_rfmq":
        kw = _pick(p, HyperParams.keys())
        if cfg.game == "boat":
            # untried actions tie at E = 0 and the first index wins; an ordered
            # initial set would then always pick the smallest acceleration
            kw.setdefault("init", "uniform")
        return SccRfmqAgent(n, HyperParams(**kw), rng)
    if algo == "rfmq":
        kw = _pick(p, {"alpha", "alpha_f", "gamma", "eps_scale", "eta"})
        return DiscreteRfmqAgent(n, rng=rng, **kw)
    if algo == "smc":
        if cfg.game == "boat":
            kw = {"threshold": 0.6 if cfg.agents == 1 else 0.8, "tau0": 10.0, "tau_period": 2000}
        else:
            kw = {"threshold": 0.9, "tau0": 25.0, "tau_period": 5000}
        kw.update(_pick(p, ("alpha", "gamma", "bandwidth_floor", "init")))
        kw.update(_pick(p, ("threshold", "tau0", "tau_decay", "tau_period"), prefix="smc_"))
        return SmcAgent(n, SmcParams(**kw), rng, dim=2 if cfg.agents == 1 else 1)
    if algo == "smc_rfmq":
        kw = _pick(p, ("alpha", "alpha_f", "gamma", "c", "eps_scale", "eta", "bandwidth_floor"))
        kw.update(_pick(p, ("tau0", "tau_decay", "tau_period"), prefix="smc_rfmq_"))
        return SmcRfmqAgent(n, SmcRfmqParams(**kw), rng)
    if algo == "cala":
        return CalaAgent(CalaParams(**_pick(p, CalaParams.keys(), prefix="cala_")), rng)
    raise ConfigError(f"unknown algo {algo!r}")


# ------------------------------------------------------------------ running

def run_episodes(game, agents: Sequence, episodes: int, env_rng: RandomSource) -> np.ndarray:
    """Play ``episodes`` episodes; returns the total reward of each."""
    out = np.empty(episodes)
    n_agents = len(agents)
    for ep in range(episodes):
        s = game.reset()
        total = 0.0
        while True:
            if n_agents == 1:
                acts = agents[0].act(s)
            else:
                acts = [ag.act(s) for ag in agents]
            tr = game.step(acts, env_rng)
            total += tr.reward
            for ag in agents:
                ag.observe(tr.reward, tr.next, tr.terminal)
            if tr.terminal:
                break
            s = tr.next
        for ag in agents:
            ag.end_episode()
        out[ep] = total
    return out


def run_cala_episodes(game, agents: Sequence[CalaAgent], episodes: int,
                      env_rng: RandomSource) -> np.ndarray:
    """CALA rounds on a stateless game; each round queries the sampled and the mean joint action."""
    if not getattr(game, "single_state", False):
        raise UsageError("CALA is defined for single-state games only")
    out = np.empty(episodes)
    for ep in range(episodes):
        xs = [ag.sample() for ag in agents]
        mus = [ag.mu for ag in agents]
        beta_x = game.evaluate(xs, env_rng)
        beta_mu = game.evaluate(mus, env_rng)
        for ag in agents:
            ag.update(beta_x, beta_mu)
        out[ep] = beta_x
    return out


def run_single(cfg: ExperimentConfig, run: int) -> np.ndarray:
    base = RandomSource(cfg.seed, f"run{run}")
    game = make_game(cfg)
    agents = [make_agent(cfg, i, base.child(f"agent{i}")) for i in range(cfg.agents)]
    env_rng = base.child("env")
    if cfg.algo[0] == "cala":
        return run_cala_episodes(game, agents, cfg.episodes, env_rng)
    return run_episodes(game, agents, cfg.episodes, env_rng)


def _run_job(args):
    cfg, run = args
    return run_single(cfg, run)


@dataclass
class MetricSeries:
    """Per-run episode rewards, indexed by run."""

    rewards: list[np.ndarray]

    @property
    def runs(self) -> int:
        return len(self.rewards)

    def cumulative(self) -> np.ndarray:
        return np.vstack([cumulative_average(r) for r in self.rewards])

    def windowed(self, window: int = 1000) -> np.ndarray:
        return np.vstack([windowed_mean(r, window) for r in self.rewards])

    def final_cumavg(self) -> np.ndarray:
        return np.array([float(np.mean(r)) for r in self.rewards])

    def aggregate(self) -> tuple[np.ndarray, np.ndarray]:
        """Mean over runs of per-run cumulative averages, and its standard error."""
        cum = self.cumulative()
        mean = cum.mean(axis=0)
        if self.runs > 1:
            se = cum.std(axis=0, ddof=1) / math.sqrt(self.runs)
        else:
            se = np.zeros_like(mean)
        return mean, se


def run_experiment(cfg: ExperimentConfig) -> MetricSeries:
    """Execute ``cfg.runs`` independent runs; run r is seeded by (cfg.seed, r)."""
    jobs = [(cfg, r) for r in range(cfg.runs)]
    if cfg.workers == 1 or cfg.runs == 1:
        results = [_run_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_job, jobs))
    return MetricSeries(results)


def cumulative_average(series: Sequence[float]) -> np.ndarray:
    arr = np.asarray(series, dtype=float)
    if arr.size == 0:
        raise UsageError("cumulative_average of an empty series")
    return np.cumsum(arr) / np.arange(1, arr.size + 1)


def windowed_mean(series: Sequence[float], window: int = 1000) -> np.ndarray:
    """Trailing mean over at most ``window`` episodes."""
    arr = np.asarray(series, dtype=float)
    c = np.concatenate(([0.0], np.cumsum(arr)))
    idx = np.arange(1, arr.size + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


# ------------------------------------------------------------------ outputs

def _fmt(x: float) -> str:
    return repr(float(x))


def write_run_csv(path: Path, run: int, rewards: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("run,episode,reward\n")
        fh.writelines(f"{run},{k},{_fmt(r)}\n" for k, r in enumerate(rewards.tolist(), 1))


def write_aggregate_csv(path: Path, mean: np.ndarray, se: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("episode,mean_cumavg,stderr\n")
        fh.writelines(f"{k},{_fmt(m)},{_fmt(s)}\n"
                      for k, (m, s) in enumerate(zip(mean.tolist(), se.tolist()), 1))


def write_grid_csv(path: Path, grid: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in grid:
            w.writerow([_fmt(v) for v in row])


def write_ppm(path: Path, grid: np.ndarray) -> None:
    """Plain (P3) RGB image, blue at the minimum, red at the maximum.

    Image row 0 is agent 1's highest action so that a1 grows upward.
    """
    lo, hi = float(grid.min()), float(grid.max())
    span = hi - lo if hi > lo else 1.0
    rows, cols = grid.shape
    lines = ["P3", f"{cols} {rows}", "255"]
    for r in range(rows - 1, -1, -1):
        px = []
        for v in grid[r]:
            t = (float(v) - lo) / span
            red = int(round(255 * t))
            green = int(round(255 * (1.0 - abs(2.0 * t - 1.0))))
            blue = int(round(255 * (1.0 - t)))
            px.append(f"{red} {green} {blue}")
        lines.append(" ".join(px))
    Path(path).write_text("\n".join(lines) + "\n")


def write_svg(path: Path, mean: np.ndarray, se: np.ndarray, title: str,
              width: int = 640, height: int = 400, max_points: int = 800) -> None:
    """Line chart of the mean cumulative average with a one-stderr band."""
    n = mean.size
    idx = np.unique(np.linspace(0, n - 1, min(n, max_points)).astype(int))
    m, s = mean[idx], se[idx]
    lo, hi = float((m - s).min()), float((m + s).max())
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    ml, mr, mt, mb = 60, 20, 30, 40
    pw, ph = width - ml - mr, height - mt - mb

    def xy(i, v):
        x = ml + (i / max(n - 1, 1)) * pw
        y = mt + (1.0 - (v - lo) / (hi - lo)) * ph
        return f"{x:.2f},{y:.2f}"

    line = " ".join(xy(i, v) for i, v in zip(idx, m))
    band = " ".join([xy(i, v) for i, v in zip(idx, m + s)]
                    + [xy(i, v) for i, v in zip(idx[::-1], (m - s)[::-1])])
    svg = f"""<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">
<rect width="100%" height="100%" fill="white"/>
<text x="{width / 2}" y="18" text-anchor="middle" font-family="sans-serif" font-size="14">{title}</text>
<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>
<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>
<text x="{ml - 5}" y="{mt + 5}" text-anchor="end" font-family="sans-serif" font-size="11">{hi:.3g}</text>
<text x="{ml - 5}" y="{mt + ph}" text-anchor="end" font-family="sans-serif" font-size="11">{lo:.3g}</text>
<text x="{ml}" y="{height - 10}" font-family="sans-serif" font-size="11">1</text>
<text x="{ml + pw}" y="{height - 10}" text-anchor="end" font-family="sans-serif" font-size="11">{n}</text>
<text x="{ml + pw / 2}" y="{height - 10}" text-anchor="middle" font-family="sans-serif" font-size="11">episode</text>
<polygon points="{band}" fill="steelblue" fill-opacity="0.25" stroke="none"/>
<polyline points="{line}" fill="none" stroke="steelblue" stroke-width="1.5"/>
</svg>
"""
    Path(path).write_text(svg)


def emit_outputs(series: MetricSeries, cfg: ExperimentConfig, out: str | os.PathLike | None = None) -> list[Path]:
    """Write per-run CSVs, the aggregate CSV, an SVG chart and (matrix games) the colormap."""
    out_dir = Path(out or cfg.out or ".")
    written: list[Path] = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for r, rewards in enumerate(series.rewards):
            p = out_dir / f"run_{r:03d}.csv"
            write_run_csv(p, r, rewards)
            written.append(p)
        mean, se = series.aggregate()
        p = out_dir / "aggregate.csv"
        write_aggregate_csv(p, mean, se)
        written.append(p)
        p = out_dir / "curve.svg"
        write_svg(p, mean, se, f"{cfg.game}: {'/'.join(cfg.algo)} (mean cumulative average, {cfg.runs} runs)")
        written.append(p)
        p = out_dir / "config.txt"
        p.write_text("".join(f"{k}={v}\n" for k, v in cfg.as_items()))
        written.append(p)
        if cfg.is_matrix:
            grid = colormap_grid(make_game(cfg), 101)
            for name, fn in (("colormap.csv", write_grid_csv), ("colormap.ppm", write_ppm)):
                p = out_dir / name
                fn(p, grid)
                written.append(p)
    except OSError as exc:
        raise OSError(f"failed writing outputs under {out_dir}: {exc}") from exc
    return written


def write_snapshot(path: str | os.PathLike, agent) -> None:
    """Dump a learner's per-state sample sets and statistics as CSV."""
    rows = agent.snapshot_rows()
    cols: list[str] = []
    for r in rows:
        cols.extend(k for k in r if k not in cols)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, restval="")
        w.writeheader()
        for r in rows:
            w.writerow({k: (_fmt(v) if isinstance(v, float) else v) for k, v in r.items()})
