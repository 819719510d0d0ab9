"""CSV and manifest writers.

All tables carry a header row.  Floats are written in positional notation with
at most 9 significant digits so that repeated runs produce identical bytes.
Files are written to a temporary name and renamed into place.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .experiments import Experiment, SweepRow

PRICES_HEADER = ("run_id", "round", "avg_price", "volume")
TRADERS_HEADER = ("run_id", "round", "trader_id", "cash", "stock", "net_worth")
SUMMARY_HEADER = ("round", "mean_price", "std_price", "mean_volume", "runs")
SWEEP_HEADER = ("gamma", "mean_delta_price", "std_delta_price", "runs")
SURFACE_HEADER = ("player", "theta1_index", "theta2_index", "theta1", "theta2", "utility")
BEST_RESPONSE_HEADER = ("player", "method", "opponent_theta", "best_theta")
PURE_NASH_HEADER = ("theta1", "theta2")
NASH_HEADER = ("k", "equilibrium_index", "player", "avg_theta", "support_size", "weights",
               "solver", "completeness")


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    value = float(value)
    if value == 0:
        return "0"
    text = np.format_float_positional(value, precision=9, unique=True, fractional=False, trim="-")
    return text


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_table(path, header: Sequence[str], rows: Iterable[Sequence]) -> int:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    count = 0
    for row in rows:
        writer.writerow([fmt(v) for v in row])
        count += 1
    atomic_write_text(path, buf.getvalue())
    return count


def read_table(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def price_rows(exp: Experiment):
    for run_id, run in enumerate(exp.runs):
        for rec in run:
            yield run_id, rec.round, rec.avg_price, rec.volume


def trader_rows(exp: Experiment):
    for run_id, run in enumerate(exp.runs):
        for rec in run:
            for tid, (cash, stock, worth) in enumerate(zip(rec.cash, rec.stock, rec.net_worth)):
                yield run_id, rec.round, tid, cash, stock, worth


def summary_rows(exp: Experiment):
    prices = exp.prices()
    volumes = np.array([[r.volume for r in run] for run in exp.runs], dtype=float)
    mean, std, vol = prices.mean(axis=0), prices.std(axis=0), volumes.mean(axis=0)
    for i in range(prices.shape[1]):
        yield i, mean[i], std[i], vol[i], prices.shape[0]


def write_market(out_dir, exp: Experiment) -> dict:
    out_dir = Path(out_dir)
    return {
        "prices.csv": write_table(out_dir / "prices.csv", PRICES_HEADER, price_rows(exp)),
        "traders.csv": write_table(out_dir / "traders.csv", TRADERS_HEADER, trader_rows(exp)),
        "summary.csv": write_table(out_dir / "summary.csv", SUMMARY_HEADER, summary_rows(exp)),
    }


def write_sweep(path, rows: Sequence[SweepRow]) -> int:
    return write_table(path, SWEEP_HEADER, ((r.gamma, r.mean_delta, r.std_delta, r.runs) for r in rows))


def write_manifest(out_dir, manifest: dict) -> None:
    atomic_write_text(Path(out_dir) / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
