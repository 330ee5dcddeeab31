"""Free-energy, diffusion and drift landscapes of the colloidal self-assembly model.

The state ``x`` is the order parameter <C6> (dimensionless, in [0, 6]), ``u`` is the
control voltage, time is in seconds, ``F`` in Joules and ``D2`` in (order parameter)^2/s.

Both landscapes depend on ``(x, u)`` only through the shift ``s = x - b - c*u``::

    F(x, u)  = a * k_B * theta * s**2
    D2(x, u) = d * exp(-s**2) + f
    D1(x, u) = dD2/dx - D2 / (k_B * theta) * dF/dx = -2 s [(1 + a) d exp(-s**2) + a f]

so every partial derivative is a derivative in ``s`` times a power of ``-c``.
The control is unbounded here; clamping belongs to whoever produces ``u``.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

K_BOLTZMANN = 1.38066e-23


@dataclass(frozen=True)
class LandscapeParams:
    a: float = 10.0
    b: float = 2.1
    c: float = 0.75
    d: float = 4.5e-3
    f: float = 0.5e-3
    k_B: float = K_BOLTZMANN
    theta: float = 293.0

    def __post_init__(self):
        if not (self.d > 0 and self.f > 0):
            raise ValueError(f"diffusion constants must be positive, got d={self.d}, f={self.f}")
        if not (self.theta > 0 and self.k_B > 0):
            raise ValueError(f"k_B and theta must be positive, got k_B={self.k_B}, theta={self.theta}")

    # the duck-typed landscape interface used by residuals, simulate and fpk_oracle
    def drift(self, x, u):
        return eval_drift(x, u, self)

    def diffusion(self, x, u):
        return eval_diffusion(x, u, self)

    def partials(self, x, u):
        return eval_partials(x, u, self)

    def partials_du(self, x, u):
        return eval_partials_du(x, u, self)


@dataclass
class LandscapePartials:
    """Drift/diffusion values and partials at a batch of (x, u) points."""

    D1: np.ndarray
    D2: np.ndarray
    D1_x: np.ndarray
    D1_u: np.ndarray
    D2_x: np.ndarray
    D2_u: np.ndarray
    D2_xx: np.ndarray
    D2_xu: np.ndarray
    D2_uu: np.ndarray

    def as_dict(self):
        return {fl.name: getattr(self, fl.name) for fl in fields(self)}


def _shift(x, u, p):
    return np.asarray(x, dtype=float) - p.b - p.c * np.asarray(u, dtype=float)


def _g_derivs(s, p):
    """D2 as a function of s, and its first three s-derivatives."""
    e = p.d * np.exp(-s * s)
    g0 = e + p.f
    g1 = -2.0 * s * e
    g2 = (4.0 * s * s - 2.0) * e
    g3 = (12.0 * s - 8.0 * s ** 3) * e
    return g0, g1, g2, g3


def _h_derivs(s, p):
    """D1 as a function of s, and its first two s-derivatives.

    h = g' - 2 a s g, since dF/dx / (k_B theta) = 2 a s.
    """
    g0, g1, g2, g3 = _g_derivs(s, p)
    a = p.a
    h0 = g1 - 2.0 * a * s * g0
    h1 = g2 - 2.0 * a * g0 - 2.0 * a * s * g1
    h2 = g3 - 4.0 * a * g1 - 2.0 * a * s * g2
    return h0, h1, h2


def eval_free_energy(x, u, p: LandscapeParams):
    s = _shift(x, u, p)
    return p.a * p.k_B * p.theta * s * s


def eval_diffusion(x, u, p: LandscapeParams):
    s = _shift(x, u, p)
    return p.d * np.exp(-s * s) + p.f


def eval_drift(x, u, p: LandscapeParams):
    s = _shift(x, u, p)
    return -2.0 * s * ((1.0 + p.a) * p.d * np.exp(-s * s) + p.a * p.f)


def eval_partials(x, u, p: LandscapeParams) -> LandscapePartials:
    s = _shift(x, u, p)
    c = p.c
    g0, g1, g2, _ = _g_derivs(s, p)
    h0, h1, _ = _h_derivs(s, p)
    return LandscapePartials(
        D1=h0, D2=g0,
        D1_x=h1, D1_u=-c * h1,
        D2_x=g1, D2_u=-c * g1,
        D2_xx=g2, D2_xu=-c * g2, D2_uu=c * c * g2,
    )


def eval_partials_du(x, u, p: LandscapeParams) -> LandscapePartials:
    """The u-derivative of every field of :func:`eval_partials`.

    Needed when the control is itself a network output and gradients flow through it.
    """
    s = _shift(x, u, p)
    c = p.c
    _, g1, g2, g3 = _g_derivs(s, p)
    _, h1, h2 = _h_derivs(s, p)
    return LandscapePartials(
        D1=-c * h1, D2=-c * g1,
        D1_x=-c * h2, D1_u=c * c * h2,
        D2_x=-c * g2, D2_u=c * c * g2,
        D2_xx=-c * g3, D2_xu=c * c * g3, D2_uu=-(c ** 3) * g3,
    )


class ConstantLandscape:
    """Stub landscape with constant drift and diffusion and all partials zero.

    Used for null-dynamics checks (``ConstantLandscape(0, 0)`` freezes the state).
    """

    def __init__(self, drift=0.0, diffusion=0.0):
        self.drift_value = float(drift)
        self.diffusion_value = float(diffusion)

    def drift(self, x, u):
        return np.full(np.broadcast(np.asarray(x), np.asarray(u)).shape, self.drift_value)

    def diffusion(self, x, u):
        return np.full(np.broadcast(np.asarray(x), np.asarray(u)).shape, self.diffusion_value)

    def partials(self, x, u):
        shape = np.broadcast(np.asarray(x), np.asarray(u)).shape
        z = np.zeros(shape)
        return LandscapePartials(
            D1=np.full(shape, self.drift_value), D2=np.full(shape, self.diffusion_value),
            D1_x=z, D1_u=z, D2_x=z, D2_u=z, D2_xx=z, D2_xu=z, D2_uu=z,
        )

    def partials_du(self, x, u):
        shape = np.broadcast(np.asarray(x), np.asarray(u)).shape
        z = np.zeros(shape)
        return LandscapePartials(D1=z, D2=z, D1_x=z, D1_u=z, D2_x=z, D2_u=z, D2_xx=z, D2_xu=z, D2_uu=z)
