"""Collocation sampling, residual-based refinement, Adam and the training loop."""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .diffnet import NetworkParams, NetworkSpec, NonFiniteError, forward_jet, init_network, save_checkpoint
from .residuals import TERMS, LossBreakdown, Problem, pde_residuals, total_loss_and_grad

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    def __init__(self, message, epoch, checkpoint=None):
        super().__init__(message)
        self.epoch = epoch
        self.checkpoint = checkpoint


@dataclass
class CollocationSet:
    interior: np.ndarray  # (n, 2) rows of (x, t)
    initial: np.ndarray   # (n0, 2), t = 0
    terminal: np.ndarray  # (nT, 2), t = T

    def sizes(self):
        return len(self.interior), len(self.initial), len(self.terminal)


@dataclass
class TrainConfig:
    network: NetworkSpec = field(default_factory=NetworkSpec)
    n_interior: int = 5000
    n_initial: int = 1000
    n_terminal: int = 1000
    epochs: int = 15000
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    rar_enabled: bool = True
    rar_period: int = 1000
    rar_pool: int = 2000
    rar_add: int = 50
    seed: int = 0
    T_final: float = 200.0
    x_lo: float = 0.0
    x_hi: float = 6.0
    residual_target: float = 1e-3
    checkpoint_every: int = 1000
    deterministic: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if min(self.n_interior, self.n_initial, self.n_terminal) < 1:
            raise ValueError("every collocation group needs at least one point")
        if not self.T_final > 0:
            raise ValueError("T_final must be positive")
        if self.network.t_final != self.T_final or (self.network.x_lo, self.network.x_hi) != (self.x_lo, self.x_hi):
            self.network = replace(self.network, t_final=self.T_final, x_lo=self.x_lo, x_hi=self.x_hi)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), np.zeros(n), 0)


def sample_collocation(config: TrainConfig, seed=None) -> CollocationSet:
    rng = np.random.default_rng(config.seed if seed is None else seed)
    lo, hi, T = config.x_lo, config.x_hi, config.T_final
    # open interior: resample the (measure-zero) edge hits
    interior = np.column_stack([rng.uniform(lo, hi, config.n_interior), rng.uniform(0.0, T, config.n_interior)])
    edge = (interior[:, 0] <= lo) | (interior[:, 0] >= hi) | (interior[:, 1] <= 0) | (interior[:, 1] >= T)
    while edge.any():
        interior[edge] = np.column_stack([rng.uniform(lo, hi, edge.sum()), rng.uniform(0.0, T, edge.sum())])
        edge = (interior[:, 0] <= lo) | (interior[:, 0] >= hi) | (interior[:, 1] <= 0) | (interior[:, 1] >= T)
    initial = np.column_stack([rng.uniform(lo, hi, config.n_initial), np.zeros(config.n_initial)])
    terminal = np.column_stack([rng.uniform(lo, hi, config.n_terminal), np.full(config.n_terminal, T)])
    return CollocationSet(interior, initial, terminal)


def residual_magnitude(params: NetworkParams, points, problem: Problem):
    """|hjb| + |fpk| + |policy| at each (x, t) row of ``points``."""
    x, t = np.asarray(points, dtype=float).T
    jet = forward_jet(params, x, t)
    r = pde_residuals(jet, x, problem)
    return np.abs(r[0]) + np.abs(r[1]) + np.abs(r[2])


def adaptive_refine(params, config: TrainConfig, current: CollocationSet, problem: Problem | None = None,
                    k=None, pool=None, seed=None) -> CollocationSet:
    """Append the ``k`` pool candidates with the largest PDE residual to the interior."""
    problem = problem or Problem(T=config.T_final)
    k = config.rar_add if k is None else k
    pool = config.rar_pool if pool is None else pool
    if k <= 0:
        return CollocationSet(current.interior.copy(), current.initial.copy(), current.terminal.copy())
    rng = np.random.default_rng(seed)
    cand = np.column_stack([rng.uniform(config.x_lo, config.x_hi, pool), rng.uniform(0.0, config.T_final, pool)])
    mag = residual_magnitude(params, cand, problem)
    top = np.argsort(-mag, kind="stable")[:k]
    return CollocationSet(np.vstack([current.interior, cand[top]]), current.initial.copy(), current.terminal.copy())


def adam_step(state: AdamState, params, grad, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update. Returns (new_state, new_params)."""
    grad = np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(grad)):
        raise NonFiniteError("non-finite gradient passed to adam_step")
    if grad.shape != state.m.shape or np.shape(params) != grad.shape:
        raise ValueError("Adam state, parameters and gradient must have the same shape")
    step = state.step + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1 ** step)
    v_hat = v / (1.0 - beta2 ** step)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + eps)
    return AdamState(m, v, step), new_params


HISTORY_COLUMNS = ("epoch",) + TERMS + ("total", "wall_seconds")


class HistoryWriter:
    def __init__(self, path, comment=None):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", newline="")
        if comment:
            self._fh.write(f"# {comment}\n")
        self._w = csv.writer(self._fh)
        self._w.writerow(HISTORY_COLUMNS)

    def write(self, epoch, lb: LossBreakdown, wall):
        self._w.writerow([epoch] + [repr(v) for v in lb.as_dict().values()] + [f"{wall:.3f}"])

    def close(self):
        self._fh.close()


def train(config: TrainConfig, problem: Problem | None = None, *, init_params=None, colloc=None,
          checkpoint_path=None, history_path=None, history_comment=None, callback=None, log_every=500):
    """Full-batch Adam on the total loss.

    Returns ``(params, history, colloc)`` where ``history`` is a list of
    ``(epoch, LossBreakdown)`` recorded at every epoch (loss before that epoch's step).
    ``callback(epoch, params_before, grad, breakdown)`` is called before each update.
    Stops early once every loss term is below ``config.residual_target``.
    """
    problem = problem or Problem(T=config.T_final)
    params = init_params.copy() if init_params is not None else init_network(config.network)
    colloc = colloc or sample_collocation(config)
    state = AdamState.zeros(params.theta.size)
    history = []
    writer = HistoryWriter(history_path, history_comment) if history_path else None
    start = time.perf_counter()
    last_good = None

    def checkpoint(epoch, lb, p):
        if checkpoint_path is None:
            return
        meta = {"epoch": epoch, "seed": config.seed, "loss": lb.as_dict() if lb else None,
                "n_interior": len(colloc.interior)}
        save_checkpoint(checkpoint_path, p, meta)

    try:
        for epoch in range(1, config.epochs + 1):
            try:
                lb, grad = total_loss_and_grad(params, colloc, problem)
            except NonFiniteError as exc:
                checkpoint(epoch - 1, last_good, params)
                raise TrainingDiverged(f"loss diverged at epoch {epoch}: {exc}", epoch, checkpoint_path) from exc
            last_good = lb
            history.append((epoch, lb))
            if writer:
                writer.write(epoch, lb, time.perf_counter() - start)
            if log_every and epoch % log_every == 0:
                log.info("epoch %d total %.3e %s", epoch, lb.total,
                         " ".join(f"{k}={v:.2e}" for k, v in lb.terms().items()))
            if all(v < config.residual_target for v in lb.terms().values()):
                log.info("all residual terms below %g at epoch %d", config.residual_target, epoch)
                break
            if callback is not None:
                callback(epoch, params, grad, lb)
            state, theta = adam_step(state, params.theta, grad, config.lr, config.beta1, config.beta2, config.eps)
            params = NetworkParams(params.spec, theta)
            if config.rar_enabled and config.rar_period > 0 and epoch % config.rar_period == 0:
                colloc = adaptive_refine(params, config, colloc, problem, seed=(config.seed, epoch))
            if config.checkpoint_every and epoch % config.checkpoint_every == 0:
                checkpoint(epoch, lb, params)
    finally:
        if writer:
            writer.close()
    final = history[-1][1] if history else None
    checkpoint(history[-1][0] if history else 0, final, params)
    return params, history, colloc
