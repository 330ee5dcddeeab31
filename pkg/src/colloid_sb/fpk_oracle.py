"""Explicit finite-volume propagator for the controlled Fokker-Planck equation.

Solves  rho_t = -(D1 rho)_x + (D2 rho)_xx  on [x_lo, x_hi] with zero-flux walls for a
frozen policy field u = policy(x, t). Nodes are x_i = x_lo + i dx; node i owns a control
volume of width dx (dx/2 at the two walls), so the discrete mass is the trapezoid rule
and the flux-form update conserves it to round-off.

Face flux: J_{i+1/2} = (D1_i rho_i + D1_{i+1} rho_{i+1}) / 2 - (D2_{i+1} rho_{i+1} - D2_i rho_i) / dx.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

NEG_TOL = -1e-10


class StabilityError(ValueError):
    def __init__(self, message, suggested_dt):
        super().__init__(message)
        self.suggested_dt = suggested_dt


@dataclass(frozen=True)
class Grid1D:
    nx: int
    dt_pde: float
    n_steps: int
    x_lo: float = 0.0
    x_hi: float = 6.0
    safety: float = 0.9

    def __post_init__(self):
        if self.nx < 16:
            raise ValueError("nx must be >= 16")
        if not self.dt_pde > 0 or self.n_steps < 0:
            raise ValueError("need dt_pde > 0 and n_steps >= 0")

    @property
    def dx(self):
        return (self.x_hi - self.x_lo) / (self.nx - 1)

    @property
    def x(self):
        return np.linspace(self.x_lo, self.x_hi, self.nx)

    @property
    def T(self):
        return self.dt_pde * self.n_steps

    @property
    def weights(self):
        w = np.full(self.nx, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w

    def max_stable_dt(self, d2_max, d1_max=0.0):
        dt = self.safety * self.dx ** 2 / (2.0 * d2_max) if d2_max > 0 else math.inf
        if d1_max > 0:
            dt = min(dt, self.safety * self.dx / d1_max)
        return dt


def make_grid(nx, T, d2_max, safety=0.9, x_lo=0.0, x_hi=6.0) -> Grid1D:
    """Grid whose time step satisfies the diffusive stability bound and divides T."""
    dx = (x_hi - x_lo) / (nx - 1)
    dt_max = safety * dx ** 2 / (2.0 * d2_max) if d2_max > 0 else T
    n = max(1, math.ceil(T / dt_max - 1e-12))
    return Grid1D(nx, T / n, n, x_lo, x_hi, safety)


def trapz_mass(rho, grid: Grid1D):
    return float(np.dot(grid.weights, rho))


def _check_stability(grid, d1, d2, t):
    limit = grid.max_stable_dt(float(np.max(d2)), float(np.max(np.abs(d1))))
    if grid.dt_pde > limit:
        raise StabilityError(
            f"dt_pde={grid.dt_pde:.3e} violates the stability bound at t={t:g} "
            f"(max D2={np.max(d2):.3e}, max |D1|={np.max(np.abs(d1)):.3e}); use dt_pde <= {limit:.3e}",
            limit)


def propagate(policy_field, rho0_grid, grid: Grid1D, landscape, store_every=None, n_store=201):
    """March rho0 to t = grid.T under the frozen ``policy_field(x, t)``.

    Returns ``(times, history)`` with ``history[k]`` the density at ``times[k]``;
    by default about ``n_store`` evenly spaced snapshots (always including both ends).
    """
    x = grid.x
    rho = np.array(rho0_grid, dtype=float)
    if rho.shape != x.shape:
        raise ValueError("rho0_grid does not match the grid")
    if np.any(rho < 0):
        raise ValueError("rho0_grid must be nonnegative")
    mass0 = trapz_mass(rho, grid)
    if abs(mass0 - 1.0) > 1e-6:
        raise ValueError(f"rho0_grid must be trapezoid-normalised (mass {mass0:.8f})")
    if store_every is None:
        store_every = max(1, grid.n_steps // max(1, n_store - 1))
    dt, dx = grid.dt_pde, grid.dx
    inv_w = 1.0 / grid.weights
    flux = np.zeros(grid.nx + 1)
    times, history = [0.0], [rho.copy()]
    for k in range(grid.n_steps):
        t = k * dt
        u = np.asarray(policy_field(x, t), dtype=float) * np.ones_like(x)
        d1 = np.asarray(landscape.drift(x, u), dtype=float) * np.ones_like(x)
        d2 = np.asarray(landscape.diffusion(x, u), dtype=float) * np.ones_like(x)
        if k == 0 or k % 64 == 0:
            _check_stability(grid, d1, d2, t)
        a = d1 * rho
        q = d2 * rho
        flux[1:-1] = 0.5 * (a[:-1] + a[1:]) - (q[1:] - q[:-1]) / dx
        rho = rho - dt * inv_w * (flux[1:] - flux[:-1])
        low = rho.min()
        if low < NEG_TOL:
            # central advection only stays positive while the cell Peclet number is <= 2
            peclet = float(np.max(np.abs(d1) * dx / np.maximum(d2, 1e-300)))
            raise StabilityError(
                f"density went negative ({low:.3e}) at t={t + dt:g} (max cell Peclet number "
                f"{peclet:.2f}); reduce dt_pde or refine the grid", 0.5 * dt)
        if (k + 1) % store_every == 0 or k + 1 == grid.n_steps:
            times.append((k + 1) * dt)
            history.append(rho.copy())
    return np.array(times), np.array(history)


def compare(rho_a, rho_b, x, x_b=None):
    """Trapezoid L1, sup-norm and CDF-based W1 between two densities on the same grid."""
    x = np.asarray(x, dtype=float)
    if x_b is not None and (np.shape(x_b) != x.shape or not np.allclose(x_b, x, rtol=0, atol=1e-12)):
        raise ValueError("densities live on different grids")
    a = np.asarray(rho_a, dtype=float)
    b = np.asarray(rho_b, dtype=float)
    if a.shape != x.shape or b.shape != x.shape:
        raise ValueError("density/grid shape mismatch")
    diff = a - b
    cum = np.zeros_like(x)
    cum[1:] = np.cumsum(0.5 * (diff[1:] + diff[:-1]) * np.diff(x))
    return {
        "L1": float(np.trapezoid(np.abs(diff), x)),
        "Linf": float(np.max(np.abs(diff))),
        "W1": float(np.trapezoid(np.abs(cum), x)),
    }


def write_history_csv(path, times, x, history, comment=None, stride_t=1, stride_x=1):
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow(("t", "x", "rho"))
        for k in range(0, len(times), stride_t):
            for i in range(0, len(x), stride_x):
                w.writerow((repr(float(times[k])), repr(float(x[i])), repr(float(history[k][i]))))
