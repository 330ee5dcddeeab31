"""Fused elementwise kernels for the tanh layer jet (numba when available, numpy otherwise).

A hidden layer maps the pre-activation jet Z = (z, z_x, z_t, z_xx) to
H = (h, d1 z_x, d1 z_t, d2 z_x^2 + d1 z_xx) with h = tanh z, d1 = 1 - h^2, d2 = -2 h d1.
The backward kernel is the adjoint of that map, including the dependence of d1, d2
on z (d1' = d2, d2' = d3 = -2 d1^2 - 2 h d2).
"""
from __future__ import annotations

import numpy as np

try:  # pragma: no cover - exercised implicitly depending on the environment
    import numba
except ImportError:  # pragma: no cover
    numba = None


def _tanh_jet_forward_np(Z):
    h = np.tanh(Z[0])
    d1 = 1.0 - h * h
    d2 = -2.0 * h * d1
    H = np.empty_like(Z)
    H[0] = h
    np.multiply(d1, Z[1], out=H[1])
    np.multiply(d1, Z[2], out=H[2])
    np.multiply(d2, Z[1] * Z[1], out=H[3])
    H[3] += d1 * Z[3]
    return H, h


def _tanh_jet_backward_np(GH, Z, h):
    d1 = 1.0 - h * h
    d2 = -2.0 * h * d1
    GZ = np.empty_like(Z)
    np.multiply(GH[2], d1, out=GZ[2])
    np.multiply(GH[3], d1, out=GZ[3])
    t1 = GH[3] * Z[1]
    np.multiply(GH[1], d1, out=GZ[1])
    GZ[1] += 2.0 * d2 * t1
    g_d1 = GH[1] * Z[1]
    g_d1 += GH[2] * Z[2]
    g_d1 += GH[3] * Z[3]
    g_d2 = t1 * Z[1]
    d3 = -2.0 * d1 * d1 - 2.0 * h * d2
    np.multiply(GH[0], d1, out=GZ[0])
    GZ[0] += g_d1 * d2
    GZ[0] += g_d2 * d3
    return GZ


if numba is not None:
    @numba.njit(cache=True, fastmath=False)
    def _fwd_loop(Z, H, h):
        # h = tanh(Z[0]) is precomputed by numpy's vectorised tanh
        n, w = h.shape
        for i in range(n):
            for j in range(w):
                hv = h[i, j]
                d1 = 1.0 - hv * hv
                d2 = -2.0 * hv * d1
                zx = Z[1, i, j]
                H[0, i, j] = hv
                H[1, i, j] = d1 * zx
                H[2, i, j] = d1 * Z[2, i, j]
                H[3, i, j] = d2 * (zx * zx) + d1 * Z[3, i, j]

    @numba.njit(cache=True, fastmath=False)
    def _bwd_loop(GH, Z, h, GZ):
        n, w = h.shape
        for i in range(n):
            for j in range(w):
                hv = h[i, j]
                d1 = 1.0 - hv * hv
                d2 = -2.0 * hv * d1
                zx = Z[1, i, j]
                g1 = GH[1, i, j]
                g2 = GH[2, i, j]
                g3 = GH[3, i, j]
                t1 = g3 * zx
                GZ[1, i, j] = g1 * d1 + 2.0 * d2 * t1
                GZ[2, i, j] = g2 * d1
                GZ[3, i, j] = g3 * d1
                g_d1 = g1 * zx + g2 * Z[2, i, j] + g3 * Z[3, i, j]
                d3 = -2.0 * d1 * d1 - 2.0 * hv * d2
                GZ[0, i, j] = GH[0, i, j] * d1 + g_d1 * d2 + t1 * zx * d3

    def tanh_jet_forward(Z):
        H = np.empty_like(Z)
        h = np.tanh(Z[0])
        _fwd_loop(Z, H, h)
        return H, h

    def tanh_jet_backward(GH, Z, h):
        GZ = np.empty_like(Z)
        _bwd_loop(np.ascontiguousarray(GH), Z, h, GZ)
        return GZ

    BACKEND = "numba"
else:  # pragma: no cover
    tanh_jet_forward = _tanh_jet_forward_np
    tanh_jet_backward = _tanh_jet_backward_np
    BACKEND = "numpy"
