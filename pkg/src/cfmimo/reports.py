"""Evaluation runs and their on-disk report directories.

A report directory holds four text files, all written with shortest
round-trip float formatting so that save/load/save reproduces every byte:

    summary.json                  headline numbers and provenance
    per_sample.csv                per snapshot: power vector and rates
    cdf_min_rate.csv              empirical CDF of the worst-user rate
    cdf_user_net_throughput.csv   empirical CDF of pooled per-user bit rates

The audit entry point regenerates all four files from the stored power
vectors and the dataset and byte-compares them against disk, which catches
both tampering and stale results.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .checkpoints import Checkpoint
from .config import SystemConfig, TrainConfig, scenario_digest
from .datasets import Dataset
from .errors import FormatError, ValidationError
from .mlp import Mlp, Normalizer
from .rates import batch_rates, batch_sinr_coefficients, net_throughput
from .solver import solve_maxmin_bisection
from .training import online_finetune

METHODS = ("baseline", "max-power", "dnn", "dnn-online")

SUMMARY_NAME = "summary.json"
PER_SAMPLE_NAME = "per_sample.csv"
CDF_MIN_RATE_NAME = "cdf_min_rate.csv"
CDF_NET_NAME = "cdf_user_net_throughput.csv"

LIKELY_PERCENTILE = 5.0


@dataclass
class RunReport:
    method: str
    n_aps: int
    n_users: int
    dataset_seed: int
    sample_offset: int
    dataset_digest: str        # hex
    net_factor: float          # bits/s per bit/s/Hz after overheads
    q: np.ndarray              # (N, K)
    rates: np.ndarray          # (N, K) bits/s/Hz
    wall_s: np.ndarray | None = None  # (N,) seconds spent producing q

    def __len__(self) -> int:
        return self.q.shape[0]

    def min_rates(self) -> np.ndarray:
        return self.rates.min(axis=1)

    def net(self) -> np.ndarray:
        return self.net_factor * self.rates

    def wall(self) -> np.ndarray:
        if self.wall_s is None:
            return np.zeros(len(self))
        return self.wall_s

    def summary(self) -> dict:
        min_rates = self.min_rates()
        pooled = self.net().ravel()
        return {
            "method": self.method,
            "n_samples": len(self),
            "n_aps": self.n_aps,
            "n_users": self.n_users,
            "dataset_seed": self.dataset_seed,
            "sample_offset": self.sample_offset,
            "dataset_digest": self.dataset_digest,
            "net_factor": self.net_factor,
            "avg_min_rate": float(min_rates.mean()),
            "median_min_rate": float(np.median(min_rates)),
            "p95_likely_user_net_throughput": float(
                np.percentile(pooled, LIKELY_PERCENTILE)
            ),
            "avg_user_net_throughput": float(pooled.mean()),
        }


def _model_state(ck: Checkpoint):
    return (ck.model.sizes, ck.model.params, ck.normalizer.mode,
            ck.normalizer.mean, ck.normalizer.std)


def _restore_model(state):
    sizes, params, mode, mean, std = state
    return Mlp(sizes, params.copy()), Normalizer(mode, mean, std)


def _method_q(method, beta, cfg, model_state, steps, lr):
    """Power vectors and per-sample seconds for a chunk of snapshots.

    Top level so worker processes can run it.  For the vectorized methods
    the batch time is spread evenly over the samples.
    """
    n, k = beta.shape[0], beta.shape[2]
    started = time.perf_counter()
    if method == "max-power":
        q = np.ones((n, k))
        return q, np.full(n, (time.perf_counter() - started) / n)
    if method in ("dnn", "dnn-online"):
        model, norm = _restore_model(model_state)
        x = norm.transform(beta)
        if method == "dnn":
            q = model.forward(x)
            return q, np.full(n, (time.perf_counter() - started) / n)
    coeffs = batch_sinr_coefficients(beta, cfg)
    q = np.empty((n, k))
    wall = np.empty(n)
    for i in range(n):
        tick = time.perf_counter()
        if method == "baseline":
            q[i] = solve_maxmin_bisection(coeffs.sample(i)).q_star
        else:
            q[i] = online_finetune(model, x[i], coeffs.take([i]),
                                   steps=steps, lr=lr)
        wall[i] = time.perf_counter() - tick
    return q, wall


def _method_q_star(args):
    return _method_q(*args)


def evaluate(
    method: str,
    dataset: Dataset,
    cfg: SystemConfig,
    *,
    checkpoint: Checkpoint | None = None,
    finetune_steps: int = 100,
    finetune_lr: float = 0.01,
    workers: int = 1,
) -> RunReport:
    """Run one allocation method over a dataset and collect the rates.

    Per-sample work is independent, so ``workers`` > 1 splits the dataset
    into contiguous chunks across processes without changing any result.
    """
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}, pick from {METHODS}")
    if dataset.digest != scenario_digest(cfg):
        raise ValidationError("dataset was generated under a different scenario")
    model_state = None
    if method in ("dnn", "dnn-online"):
        if checkpoint is None:
            raise ValidationError(f"method {method!r} needs a checkpoint")
        if (checkpoint.n_aps, checkpoint.n_users) != (cfg.n_aps, cfg.n_users):
            raise ValidationError("checkpoint dims do not match the scenario")
        model_state = _model_state(checkpoint)

    beta = dataset.beta
    parallel = workers > 1 and method in ("baseline", "dnn-online") and len(dataset) > 1
    if parallel:
        bounds = np.linspace(0, len(dataset), workers + 1).astype(int)
        jobs = [
            (method, beta[a:b], cfg, model_state, finetune_steps, finetune_lr)
            for a, b in zip(bounds[:-1], bounds[1:]) if b > a
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_method_q_star, jobs))
        q = np.concatenate([c[0] for c in chunks])
        wall = np.concatenate([c[1] for c in chunks])
    else:
        q, wall = _method_q(method, beta, cfg, model_state,
                            finetune_steps, finetune_lr)

    rates = batch_rates(batch_sinr_coefficients(beta, cfg), q)
    return RunReport(
        method=method,
        n_aps=cfg.n_aps,
        n_users=cfg.n_users,
        dataset_seed=dataset.seed,
        sample_offset=dataset.sample_offset,
        dataset_digest=dataset.digest.hex(),
        net_factor=float(net_throughput(1.0, cfg)),
        q=q,
        rates=rates,
        wall_s=wall,
    )


# --- serialization ----------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def _summary_text(report: RunReport) -> str:
    return json.dumps(report.summary(), indent=2, sort_keys=True) + "\n"


def _per_sample_text(report: RunReport) -> str:
    k = report.n_users
    cols = ["sample", "min_rate"]
    cols += [f"q_{i}" for i in range(k)]
    cols += [f"rate_{i}" for i in range(k)]
    cols += [f"net_{i}" for i in range(k)]
    cols += ["wall_s"]
    lines = [",".join(cols)]
    min_rates = report.min_rates()
    net = report.net()
    wall = report.wall()
    for i in range(len(report)):
        row = [str(report.sample_offset + i), _fmt(min_rates[i])]
        row += [_fmt(v) for v in report.q[i]]
        row += [_fmt(v) for v in report.rates[i]]
        row += [_fmt(v) for v in net[i]]
        row.append(_fmt(wall[i]))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _cdf_text(values: np.ndarray) -> str:
    order = np.sort(np.asarray(values, dtype=float).ravel())
    n = len(order)
    lines = ["value,cdf"]
    lines += [f"{_fmt(v)},{_fmt((i + 1) / n)}" for i, v in enumerate(order)]
    return "\n".join(lines) + "\n"


def _render(report: RunReport) -> dict:
    return {
        SUMMARY_NAME: _summary_text(report),
        PER_SAMPLE_NAME: _per_sample_text(report),
        CDF_MIN_RATE_NAME: _cdf_text(report.min_rates()),
        CDF_NET_NAME: _cdf_text(report.net()),
    }


def save_report(dir_path, report: RunReport, *, force: bool = False):
    dir_path = Path(dir_path)
    if dir_path.exists():
        if not force:
            raise ValidationError(f"{dir_path} exists, pass force to overwrite")
        if not dir_path.is_dir():
            raise ValidationError(f"{dir_path} is not a directory")
    dir_path.mkdir(parents=True, exist_ok=True)
    for name, text in _render(report).items():
        (dir_path / name).write_text(text, encoding="ascii")


def load_report(dir_path) -> RunReport:
    dir_path = Path(dir_path)
    summary_path = dir_path / SUMMARY_NAME
    if not summary_path.exists():
        raise FormatError(f"{dir_path}: no {SUMMARY_NAME}")
    try:
        summary = json.loads(summary_path.read_text(encoding="ascii"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{summary_path}: {exc}") from exc
    needed = {"method", "n_samples", "n_aps", "n_users", "dataset_seed",
              "sample_offset", "dataset_digest", "net_factor"}
    missing = needed - set(summary)
    if missing:
        raise FormatError(f"{summary_path}: missing keys {sorted(missing)}")

    n = summary["n_samples"]
    k = summary["n_users"]
    lines = (dir_path / PER_SAMPLE_NAME).read_text(encoding="ascii").splitlines()
    if len(lines) != n + 1:
        raise FormatError(f"{dir_path}: expected {n} data rows")
    q = np.empty((n, k))
    rates = np.empty((n, k))
    wall = np.empty(n)
    try:
        for i, line in enumerate(lines[1:]):
            parts = line.split(",")
            if len(parts) != 3 + 3 * k:
                raise FormatError(f"{dir_path}: bad row {i}")
            q[i] = [float(v) for v in parts[2:2 + k]]
            rates[i] = [float(v) for v in parts[2 + k:2 + 2 * k]]
            wall[i] = float(parts[-1])
    except ValueError as exc:
        raise FormatError(f"{dir_path}: unparsable number: {exc}") from exc
    return RunReport(
        method=summary["method"],
        n_aps=summary["n_aps"],
        n_users=k,
        dataset_seed=summary["dataset_seed"],
        sample_offset=summary["sample_offset"],
        dataset_digest=summary["dataset_digest"],
        net_factor=summary["net_factor"],
        q=q,
        rates=rates,
        wall_s=wall,
    )


def audit_report(dir_path, dataset: Dataset, cfg: SystemConfig) -> list[str]:
    """Recompute a report from its stored power vectors and compare bytes.

    Returns a list of human-readable discrepancies, empty when clean.
    """
    dir_path = Path(dir_path)
    problems = []
    report = load_report(dir_path)
    if report.dataset_digest != dataset.digest.hex():
        problems.append("report and dataset disagree on the scenario digest")
    if dataset.digest != scenario_digest(cfg):
        problems.append("dataset does not match the given config")
    if len(report) != len(dataset):
        problems.append(
            f"report covers {len(report)} samples, dataset has {len(dataset)}"
        )
        return problems
    if report.q.min() < 0.0 or report.q.max() > 1.0 + 1e-12:
        problems.append("stored power coefficients leave [0, 1]")

    fresh_rates = batch_rates(batch_sinr_coefficients(dataset.beta, cfg), report.q)
    dev = np.abs(fresh_rates - report.rates)
    scale = np.maximum(np.abs(fresh_rates), 1e-12)
    worst = float((dev / scale).max())
    if worst > 1e-9:
        problems.append(
            f"stored rates deviate from recomputation, max rel error {worst:.3e}"
        )
    fresh = RunReport(
        method=report.method,
        n_aps=report.n_aps,
        n_users=report.n_users,
        dataset_seed=report.dataset_seed,
        sample_offset=report.sample_offset,
        dataset_digest=report.dataset_digest,
        net_factor=float(net_throughput(1.0, cfg)),
        q=report.q,
        rates=fresh_rates,
        wall_s=report.wall_s,
    )
    for name, text in _render(fresh).items():
        on_disk = (dir_path / name)
        if not on_disk.exists():
            problems.append(f"{name} is missing")
        elif on_disk.read_text(encoding="ascii") != text:
            problems.append(f"{name} does not match its regeneration")
    return problems
