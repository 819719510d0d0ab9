"""Multi-run market experiments and their aggregates."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .market import MarketConfig, RoundRecord, run_simulation

DEFAULT_RUNS = 40
DEFAULT_GAMMAS = (0.0, math.pi / 8, math.pi / 4, 3 * math.pi / 8, math.pi / 2)


@dataclass
class Experiment:
    config: MarketConfig
    runs: list  # list[list[RoundRecord]], indexed by run

    def prices(self) -> np.ndarray:
        """(runs, rounds) array of recorded average prices."""
        return np.array([[r.avg_price for r in run] for run in self.runs])

    def final_prices(self) -> np.ndarray:
        return np.array([run[-1].avg_price for run in self.runs])

    def delta_prices(self) -> np.ndarray:
        return self.final_prices() - self.config.initial_price


def _run(args) -> list[RoundRecord]:
    config, run_index = args
    return run_simulation(config, run_index)


def run_experiment(config: MarketConfig, runs: int = DEFAULT_RUNS, threads: int = 1) -> Experiment:
    """Independent runs 0..runs-1; results do not depend on ``threads``."""
    if runs < 1:
        raise ValueError("runs must be at least 1")
    jobs = [(config, i) for i in range(runs)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(_run, jobs))
    else:
        records = [_run(job) for job in jobs]
    return Experiment(config, records)


@dataclass
class SweepRow:
    gamma: float
    mean_delta: float
    std_delta: float
    runs: int


def gamma_sweep(config: MarketConfig, gammas=DEFAULT_GAMMAS, runs: int = DEFAULT_RUNS,
                threads: int = 1) -> tuple[list[SweepRow], list[Experiment]]:
    """Quantum-mode experiment per gamma; Delta price = final price - initial price."""
    rows, experiments = [], []
    for gamma in gammas:
        exp = run_experiment(replace(config, mode="quantum", gamma=float(gamma)), runs, threads)
        delta = exp.delta_prices()
        rows.append(SweepRow(float(gamma), float(delta.mean()), float(delta.std()), runs))
        experiments.append(exp)
    return rows, experiments
