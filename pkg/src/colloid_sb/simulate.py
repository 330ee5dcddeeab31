"""Closed-loop Euler-Maruyama simulation of the controlled order-parameter SDE."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .diffnet import NetworkParams, policy as network_policy


class SimulationError(FloatingPointError):
    pass


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 1000
    dt: float = 0.1
    T: float = 200.0
    boundary_mode: str = "reflect"
    seed: int = 0
    noise: bool = True
    x_lo: float = 0.0
    x_hi: float = 6.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if self.boundary_mode not in ("reflect", "clamp"):
            raise ValueError(f"boundary_mode must be 'reflect' or 'clamp', got {self.boundary_mode!r}")
        n = self.T / self.dt
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValueError(f"T/dt = {n} is not an integer")

    @property
    def n_steps(self):
        return int(round(self.T / self.dt))


@dataclass
class PathEnsemble:
    times: np.ndarray     # (n_steps + 1,)
    states: np.ndarray    # (n_paths, n_steps + 1)
    controls: np.ndarray  # (n_paths, n_steps + 1), control applied from each stored time

    def write_csv(self, path, stride=1, comment=None):
        """Long format (path_id, t, state, control), every ``stride``-th time."""
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh)
            w.writerow(("path_id", "t", "state", "control"))
            cols = range(0, self.times.size, stride)
            for i in range(self.states.shape[0]):
                for k in cols:
                    w.writerow((i, repr(float(self.times[k])), repr(float(self.states[i, k])),
                                repr(float(self.controls[i, k]))))


def em_step(x, u, dt, noise_increment, landscape):
    """x + D1 dt + sqrt(2 D2) dw, before any boundary handling."""
    d1 = landscape.drift(x, u)
    d2 = landscape.diffusion(x, u)
    return x + d1 * dt + np.sqrt(2.0 * d2) * noise_increment


def apply_boundary(x, lo=0.0, hi=6.0, mode="reflect"):
    if mode == "clamp":
        return np.clip(x, lo, hi)
    # fold onto [lo, hi]; handles overshoots of any size
    span = hi - lo
    y = np.mod(np.asarray(x, dtype=float) - lo, 2.0 * span)
    return lo + span - np.abs(y - span)


def path_noise(seed, n_paths, n_steps, dt):
    """Brownian increments, one counter-based Philox stream per path.

    Path ``i`` uses key ``seed`` with its counter offset by ``i`` in the top word, so
    each path's increments are independent of how many paths are simulated.
    """
    out = np.empty((n_paths, n_steps))
    sq = np.sqrt(dt)
    for i in range(n_paths):
        gen = np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, i]))
        out[i] = gen.standard_normal(n_steps) * sq
    return out


def simulate_ensemble(model, init_samples, cfg: SimConfig, landscape) -> PathEnsemble:
    """Simulate ``cfg.n_paths`` paths from ``init_samples`` under the policy ``model``.

    ``model`` is a NetworkParams (its pi head is the policy) or any callable (x, t) -> u.
    """
    pi = network_policy(model) if isinstance(model, NetworkParams) else model
    x = np.asarray(init_samples, dtype=float).ravel()
    if x.size != cfg.n_paths:
        raise ValueError(f"got {x.size} initial samples for {cfg.n_paths} paths")
    if np.any(x < cfg.x_lo) or np.any(x > cfg.x_hi):
        raise ValueError(f"initial samples must lie in [{cfg.x_lo}, {cfg.x_hi}]")
    n = cfg.n_steps
    times = np.arange(n + 1) * cfg.dt
    states = np.empty((x.size, n + 1))
    controls = np.empty((x.size, n + 1))
    dw = path_noise(cfg.seed, x.size, n, cfg.dt) if cfg.noise else np.zeros((x.size, n))
    states[:, 0] = x
    for k in range(n):
        u = np.asarray(pi(x, times[k]), dtype=float).reshape(x.shape)
        controls[:, k] = u
        x = apply_boundary(em_step(x, u, cfg.dt, dw[:, k], landscape), cfg.x_lo, cfg.x_hi, cfg.boundary_mode)
        if not np.all(np.isfinite(x)):
            bad = int(np.argmax(~np.isfinite(x)))
            raise SimulationError(f"non-finite state on path {bad} at step {k + 1} (t={times[k + 1]:g})")
        states[:, k + 1] = x
    controls[:, n] = np.asarray(pi(x, times[n]), dtype=float).reshape(x.shape)
    return PathEnsemble(times, states, controls)


def snapshot(ensemble: PathEnsemble, t_query):
    """Samples at the stored time nearest to ``t_query`` (ties go to the earlier time).

    Returns ``(samples, t_used)``.
    """
    times = ensemble.times
    if not times[0] <= t_query <= times[-1]:
        raise ValueError(f"t_query={t_query} outside [{times[0]}, {times[-1]}]")
    k = int(np.searchsorted(times, t_query))
    if k > 0 and (k == times.size or t_query - times[k - 1] <= times[k] - t_query):
        k -= 1
    return ensemble.states[:, k].copy(), float(times[k])
