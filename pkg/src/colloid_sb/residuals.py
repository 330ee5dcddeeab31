"""Residuals of the coupled HJB / FPK / policy optimality system and the training loss.

All residuals are vectorised over a batch of points. The landscapes are evaluated at
``u = pi`` (the network's own control), so each residual also depends on ``pi``
through D1, D2 and their partials; ``*_residual_grad`` return the derivative of a
residual w.r.t. every jet entry it touches, used to back-propagate the loss.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diffnet import FieldJet, Jet, NetworkParams, forward_jet, loss_gradient
from .landscape import LandscapeParams, LandscapePartials
from .prob import RHO0, RHOT, TruncNormSpec

TERMS = ("L_psi", "L_rho", "L_pi", "L_rho0", "L_rhoT")


@dataclass(frozen=True)
class Problem:
    """Landscape plus the endpoint densities and the horizon.

    ``landscape`` only needs ``partials(x, u)`` / ``partials_du(x, u)`` (and
    ``drift``/``diffusion`` for simulation); ``rho0``/``rhoT`` only need ``pdf(x)``.
    """

    landscape: object = field(default_factory=LandscapeParams)
    rho0: object = RHO0
    rhoT: object = RHOT
    T: float = 200.0
    x_lo: float = 0.0
    x_hi: float = 6.0


@dataclass
class LossBreakdown:
    L_psi: float
    L_rho: float
    L_pi: float
    L_rho0: float
    L_rhoT: float

    @property
    def total(self):
        return self.L_psi + self.L_rho + self.L_pi + self.L_rho0 + self.L_rhoT

    def terms(self):
        return {k: getattr(self, k) for k in TERMS}

    def as_dict(self):
        d = self.terms()
        d["total"] = self.total
        return d


def hjb_residual(jet: FieldJet, lp: LandscapePartials):
    psi, pi = jet.psi, jet.pi.value
    return psi.dt - 0.5 * pi * pi + lp.D1 * psi.dx + lp.D2 * psi.dxx


def _total_x_derivatives(jet, lp):
    # x-derivatives of D1(x, pi(x,t)) and D2(x, pi(x,t)) along the policy
    pi_x, pi_xx = jet.pi.dx, jet.pi.dxx
    dD1 = lp.D1_x + lp.D1_u * pi_x
    dD2 = lp.D2_x + lp.D2_u * pi_x
    ddD2 = lp.D2_xx + 2.0 * lp.D2_xu * pi_x + lp.D2_uu * pi_x * pi_x + lp.D2_u * pi_xx
    return dD1, dD2, ddD2


def fpk_residual(jet: FieldJet, lp: LandscapePartials):
    rho = jet.rho
    dD1, dD2, ddD2 = _total_x_derivatives(jet, lp)
    return (rho.dt + dD1 * rho.value + lp.D1 * rho.dx
            - ddD2 * rho.value - 2.0 * dD2 * rho.dx - lp.D2 * rho.dxx)


def policy_residual(jet: FieldJet, lp: LandscapePartials):
    psi = jet.psi
    return jet.pi.value - psi.dx * lp.D1_u - psi.dxx * lp.D2_u


def boundary_residual(rho_value, target_density):
    return (np.asarray(rho_value) - np.asarray(target_density)) ** 2


def hjb_residual_grad(jet, lp, lpu):
    psi, pi = jet.psi, jet.pi.value
    z = np.zeros_like(pi)
    d_pi = -pi + lpu.D1 * psi.dx + lpu.D2 * psi.dxx
    return FieldJet(Jet(z, lp.D1, np.ones_like(pi), lp.D2), Jet(z, z, z, z), Jet(d_pi, z, z, z))


def policy_residual_grad(jet, lp, lpu):
    psi = jet.psi
    z = np.zeros_like(psi.dx)
    d_pi = 1.0 - psi.dx * lpu.D1_u - psi.dxx * lpu.D2_u
    return FieldJet(Jet(z, -lp.D1_u, z, -lp.D2_u), Jet(z, z, z, z), Jet(d_pi, z, z, z))


def fpk_residual_grad(jet, lp, lpu):
    rho, pi_x, pi_xx = jet.rho, jet.pi.dx, jet.pi.dxx
    z = np.zeros_like(pi_x)
    dD1, dD2, ddD2 = _total_x_derivatives(jet, lp)
    r, r_x, r_xx = rho.value, rho.dx, rho.dxx
    d_pix = r * lp.D1_u - r * (2.0 * lp.D2_xu + 2.0 * lp.D2_uu * pi_x) - 2.0 * r_x * lp.D2_u
    d_pixx = -r * lp.D2_u
    # dependence on the pi value through the landscape partials
    dD1_u = lpu.D1_x + lpu.D1_u * pi_x
    dD2_u = lpu.D2_x + lpu.D2_u * pi_x
    ddD2_u = lpu.D2_xx + 2.0 * lpu.D2_xu * pi_x + lpu.D2_uu * pi_x * pi_x + lpu.D2_u * pi_xx
    d_pi = dD1_u * r + lpu.D1 * r_x - ddD2_u * r - 2.0 * dD2_u * r_x - lpu.D2 * r_xx
    return FieldJet(Jet(z, z, z, z),
                    Jet(dD1 - ddD2, lp.D1 - 2.0 * dD2, np.ones_like(r), -lp.D2),
                    Jet(d_pi, d_pix, z, d_pixx))


def _scale(fj: FieldJet, w):
    return FieldJet(*(Jet(*(c * w for c in j)) for j in fj))


def _add(a: FieldJet, b: FieldJet):
    return FieldJet(*(Jet(*(p + q for p, q in zip(ja, jb))) for ja, jb in zip(a, b)))


def _groups(colloc):
    xi, ti = np.asarray(colloc.interior, dtype=float).reshape(-1, 2).T
    x0, t0 = np.asarray(colloc.initial, dtype=float).reshape(-1, 2).T
    xT, tT = np.asarray(colloc.terminal, dtype=float).reshape(-1, 2).T
    for name, g in (("interior", xi), ("initial", x0), ("terminal", xT)):
        if g.size == 0:
            raise ValueError(f"collocation group {name!r} is empty")
    return (xi, ti), (x0, t0), (xT, tT)


def pde_residuals(jet: FieldJet, x, problem: Problem):
    """(hjb, fpk, policy) residual arrays for a jet evaluated at states ``x``."""
    lp = problem.landscape.partials(x, jet.pi.value)
    return hjb_residual(jet, lp), fpk_residual(jet, lp), policy_residual(jet, lp)


def _loss_fn(x, n_int, n0, problem, targets0, targetsT):
    """Loss over the stacked batch [interior | initial | terminal] and its jet-gradient."""
    sl_i = slice(0, n_int)
    sl_0 = slice(n_int, n_int + n0)
    sl_T = slice(n_int + n0, None)
    xi = x[sl_i]

    def fn(jet: FieldJet):
        ji = FieldJet(*(Jet(*(c[sl_i] for c in j)) for j in jet))
        lp = problem.landscape.partials(xi, ji.pi.value)
        lpu = problem.landscape.partials_du(xi, ji.pi.value)
        r_psi = hjb_residual(ji, lp)
        r_rho = fpk_residual(ji, lp)
        r_pi = policy_residual(ji, lp)
        e0 = jet.rho.value[sl_0] - targets0
        eT = jet.rho.value[sl_T] - targetsT
        n_T = eT.size
        parts = LossBreakdown(
            float(np.mean(r_psi ** 2)), float(np.mean(r_rho ** 2)), float(np.mean(r_pi ** 2)),
            float(np.mean(e0 ** 2)), float(np.mean(eT ** 2)))
        g_int = _add(_add(_scale(hjb_residual_grad(ji, lp, lpu), 2.0 * r_psi / n_int),
                          _scale(fpk_residual_grad(ji, lp, lpu), 2.0 * r_rho / n_int)),
                     _scale(policy_residual_grad(ji, lp, lpu), 2.0 * r_pi / n_int))
        arr = np.zeros((4, x.size, 3))
        arr[:, sl_i, :] = g_int.to_array()
        arr[0, sl_0, 1] = 2.0 * e0 / n0
        arr[0, sl_T, 1] = 2.0 * eT / n_T
        fn.breakdown = parts
        return parts.total, FieldJet.from_array(arr)

    return fn


def _stack(colloc, problem):
    (xi, ti), (x0, t0), (xT, tT) = _groups(colloc)
    x = np.concatenate([xi, x0, xT])
    t = np.concatenate([ti, t0, tT])
    targets0 = np.asarray(problem.rho0.pdf(x0), dtype=float)
    targetsT = np.asarray(problem.rhoT.pdf(xT), dtype=float)
    return x, t, xi.size, x0.size, targets0, targetsT


def total_loss(params: NetworkParams, colloc, problem: Problem | None = None) -> LossBreakdown:
    """Mean-of-squares of each residual over its own point group, summed with unit weights."""
    problem = problem or Problem()
    x, t, n_int, n0, tg0, tgT = _stack(colloc, problem)
    fn = _loss_fn(x, n_int, n0, problem, tg0, tgT)
    fn(forward_jet(params, x, t))
    return fn.breakdown


def total_loss_and_grad(params: NetworkParams, colloc, problem: Problem | None = None):
    """(LossBreakdown, gradient of the total w.r.t. the flat parameter vector)."""
    problem = problem or Problem()
    x, t, n_int, n0, tg0, tgT = _stack(colloc, problem)
    fn = _loss_fn(x, n_int, n0, problem, tg0, tgT)
    # boundary terms only see the rho value, so those points skip the derivative jet
    _, grad = loss_gradient(params, x, t, fn, n_values=x.size - n_int)
    return fn.breakdown, grad
