"""Independent-learner coordination in cooperative games with continuous actions.

The main learner is :class:`SccRfmqAgent`; baselines live in
:mod:`sccrfmq.baselines` and the environments in :mod:`sccrfmq.games`.
"""
from .baselines import CalaAgent, DiscreteRfmqAgent, SmcAgent, SmcRfmqAgent
from .core import ConfigError, DataError, Interval, RandomSource, UsageError, argmax_first, project
from .games import BoatGame, MatrixGame, climbing_game, stochastic_climbing_game
from .harness import ExperimentConfig, load_config, run_experiment
from .scc import HyperParams, SccRfmqAgent

__all__ = [
    "BoatGame", "CalaAgent", "ConfigError", "DataError", "DiscreteRfmqAgent", "ExperimentConfig",
    "HyperParams", "Interval", "MatrixGame", "RandomSource", "SccRfmqAgent", "SmcAgent",
    "SmcRfmqAgent", "UsageError", "argmax_first", "climbing_game", "load_config", "project",
    "run_experiment", "stochastic_climbing_game",
]
