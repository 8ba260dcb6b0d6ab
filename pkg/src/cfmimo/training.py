"""Unsupervised training of the power-control network.

The loss is the negative batch mean of the worst per-user rate, so gradient
descent pushes the network toward max-min fair allocations without labeled
targets.  The rate gradient is analytic; backpropagation only ever sees the
subgradient through the single worst user of each sample (lowest index on
ties).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import SystemConfig, TrainConfig
from .errors import ValidationError
from .mlp import AdamState, Mlp, Normalizer, adam_step, build_model, fit_normalizer
from .rates import LN2, BatchedCoefficients, batch_rates, batch_sinr_coefficients


def batch_loss(model: Mlp, x: np.ndarray, coeffs: BatchedCoefficients) -> float:
    q = model.forward(x)
    return -float(batch_rates(coeffs, q).min(axis=1).mean())


def batch_loss_and_grad(model: Mlp, x: np.ndarray, coeffs: BatchedCoefficients):
    """Loss and its gradient wrt the flat parameter vector."""
    q, zs, acts = model.forward_cached(x)
    denom = np.einsum("nki,ni->nk", coeffs.coupling, q) + coeffs.noise
    sinr = q * coeffs.signal / denom
    rates = np.log1p(sinr) / LN2
    worst = rates.argmin(axis=1)

    b = len(worst)
    rows = np.arange(b)
    a_w = coeffs.signal[rows, worst]
    d_w = denom[rows, worst]
    s_w = sinr[rows, worst]
    q_w = q[rows, worst]
    coup_w = coeffs.coupling[rows, worst, :]

    # d rate_w / d q_i = (a/d) / (ln2 (1+s)) * (1[i=w] - q_w c[w,i] / d)
    onehot = np.zeros_like(q)
    onehot[rows, worst] = 1.0
    factor = (a_w / d_w) / (LN2 * (1.0 + s_w) * b)
    grad_q = -factor[:, None] * (onehot - (q_w / d_w)[:, None] * coup_w)

    loss = -float(rates[rows, worst].mean())
    return loss, model.backward(zs, acts, grad_q)


@dataclass
class TrainingRun:
    """Outcome of one training call, with the best-validation snapshot."""

    model: Mlp
    normalizer: Normalizer
    history: list = field(default_factory=list)  # (iteration, train, val)
    best_iteration: int = 0
    best_val_loss: float = np.inf
    final_params: np.ndarray | None = None


def train_model(
    train_beta: np.ndarray,
    val_beta: np.ndarray,
    cfg: SystemConfig,
    tcfg: TrainConfig,
    *,
    progress=None,
) -> TrainingRun:
    """Train from scratch on a stack of snapshots.

    Two independent random streams are spawned from the seed, one for the
    weight init and one for the batch draws, so changing the iteration count
    never perturbs the initial weights.  Batches are drawn with replacement.
    The returned model carries the parameters of the best validation loss,
    the final parameters stay available in ``final_params``.
    """
    if train_beta.ndim != 3 or val_beta.ndim != 3:
        raise ValidationError("training needs (N, M, K) snapshot stacks")
    n = train_beta.shape[0]
    if tcfg.batch_size > n:
        raise ValidationError("batch size exceeds the training set")

    init_ss, batch_ss = np.random.SeedSequence(tcfg.seed).spawn(2)
    model = build_model(cfg.n_aps, cfg.n_users, np.random.default_rng(init_ss))
    batch_rng = np.random.default_rng(batch_ss)

    norm = fit_normalizer(train_beta, tcfg.input_transform)
    x_train = norm.transform(train_beta)
    x_val = norm.transform(val_beta)
    co_train = batch_sinr_coefficients(train_beta, cfg)
    co_val = batch_sinr_coefficients(val_beta, cfg)

    run = TrainingRun(model=model, normalizer=norm)
    best_params = model.params.copy()
    opt = AdamState.zeros(model.params.size)

    def validate(it, train_loss):
        val_loss = batch_loss(model, x_val, co_val)
        run.history.append((it, train_loss, val_loss))
        if val_loss < run.best_val_loss:
            run.best_val_loss = val_loss
            run.best_iteration = it
            best_params[...] = model.params
        if progress is not None:
            progress(it, train_loss, val_loss)

    validate(0, batch_loss(model, x_train, co_train))
    for it in range(1, tcfg.iterations + 1):
        idx = batch_rng.integers(0, n, size=tcfg.batch_size)
        loss, grad = batch_loss_and_grad(model, x_train[idx], co_train.take(idx))
        adam_step(model.params, grad, opt, tcfg.learning_rate,
                  tcfg.adam_beta1, tcfg.adam_beta2, tcfg.adam_eps)
        if it % tcfg.validation_every == 0 or it == tcfg.iterations:
            validate(it, loss)

    run.final_params = model.params.copy()
    model.params[...] = best_params
    return run


FINETUNE_STEPS = 100
FINETUNE_LR = 0.01


def online_finetune(
    model: Mlp,
    x: np.ndarray,
    coeffs: BatchedCoefficients,
    *,
    steps: int = FINETUNE_STEPS,
    lr: float = FINETUNE_LR,
    tcfg: TrainConfig | None = None,
) -> np.ndarray:
    """Adapt a copy of the trained net to one snapshot, return the best q.

    x is the normalized input of that single snapshot and coeffs its
    coefficient stack of length one.  The candidate set covers the untouched
    network and the state after every update step; the q with the largest
    worst-user rate wins.  The caller's model is never mutated.
    """
    if tcfg is None:
        tcfg = TrainConfig()
    local = model.clone()
    opt = AdamState.zeros(local.params.size)
    xb = x[None, :]

    best_q = local.forward(x)
    best_rate = batch_rates(coeffs, best_q[None, :]).min()
    for _ in range(steps):
        _, grad = batch_loss_and_grad(local, xb, coeffs)
        adam_step(local.params, grad, opt, lr,
                  tcfg.adam_beta1, tcfg.adam_beta2, tcfg.adam_eps)
        q = local.forward(x)
        rate = batch_rates(coeffs, q[None, :]).min()
        if rate > best_rate:
            best_rate = rate
            best_q = q
    return best_q
