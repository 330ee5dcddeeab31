"""Fully-connected tanh network mapping (x, t) to (psi, rho, pi) together with input jets.

Each layer propagates a jet ``[value, d/dx, d/dt, d2/dx2]`` stacked along the leading
axis, so one forward call gives every derivative the optimality residuals need. The
backward pass differentiates that whole jet computation with respect to the weights.

Parameter layout in the flat vector: for every layer (hidden layers first, output
layer last) the weight matrix of shape (out, in) in row-major order, then its bias.

Input scaling: ``xs = 2 (x - x_lo) / (x_hi - x_lo) - 1`` and ``ts = t / t_final``; the
returned derivatives are with respect to the unscaled ``x`` and ``t``.
Head transforms: ``psi = s0 * o0``, ``rho = s1 * softplus(o1)``, ``pi = s2 * o2`` with
fixed scales ``output_scale = (s0, s1, s2)``.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from ._kernels import tanh_jet_backward, tanh_jet_forward

N_INPUTS = 2
N_HEADS = 3
ACTIVATIONS = ("tanh", "identity")
RHO_TRANSFORMS = ("softplus", "identity")

CHECKPOINT_MAGIC = b"CSBNET\x00\x01"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    """Raised when parameters, jets or a loss stop being finite.

    ``point`` holds the offending (x, t) collocation point when one can be identified.
    """

    def __init__(self, message, point=None, index=None):
        if point is not None:
            message = f"{message} at collocation point #{index} (x={point[0]:.6g}, t={point[1]:.6g})"
        super().__init__(message)
        self.point = point
        self.index = index


@dataclass(frozen=True)
class NetworkSpec:
    hidden_layers: int = 3
    width: int = 70
    activation: str = "tanh"
    x_lo: float = 0.0
    x_hi: float = 6.0
    t_final: float = 200.0
    output_scale: tuple = (300.0, 1.0, 4.0)  # psi, rho, pi head multipliers
    seed: int = 0
    rho_transform: str = "softplus"

    def __post_init__(self):
        if self.hidden_layers < 0:
            raise ValueError("hidden_layers must be >= 0")
        if self.hidden_layers > 0 and self.width < 1:
            raise ValueError(f"zero-width layer rejected (width={self.width})")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}, expected one of {ACTIVATIONS}")
        if self.rho_transform not in RHO_TRANSFORMS:
            raise ValueError(f"unknown rho_transform {self.rho_transform!r}, expected one of {RHO_TRANSFORMS}")
        if not self.x_hi > self.x_lo:
            raise ValueError("x_hi must exceed x_lo")
        if not self.t_final > 0:
            raise ValueError("t_final must be positive")
        if len(self.output_scale) != N_HEADS:
            raise ValueError("output_scale needs one entry per head")
        object.__setattr__(self, "output_scale", tuple(float(v) for v in self.output_scale))

    @property
    def layer_shapes(self):
        sizes = [N_INPUTS] + [self.width] * self.hidden_layers + [N_HEADS]
        return [(sizes[i + 1], sizes[i]) for i in range(len(sizes) - 1)]

    @property
    def n_params(self):
        return sum(o * i + o for o, i in self.layer_shapes)

    @property
    def x_scale(self):
        return 2.0 / (self.x_hi - self.x_lo)

    @property
    def t_scale(self):
        return 1.0 / self.t_final


@dataclass
class NetworkParams:
    spec: NetworkSpec
    theta: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if self.theta.shape != (self.spec.n_params,):
            raise ValueError(f"expected {self.spec.n_params} parameters, got shape {self.theta.shape}")

    def layers(self, theta=None):
        """(W, b) views into ``theta`` (defaults to this object's vector)."""
        theta = self.theta if theta is None else theta
        out, k = [], 0
        for o, i in self.spec.layer_shapes:
            W = theta[k:k + o * i].reshape(o, i)
            k += o * i
            b = theta[k:k + o]
            k += o
            out.append((W, b))
        return out

    def copy(self):
        return NetworkParams(self.spec, self.theta.copy())


class Jet(NamedTuple):
    value: np.ndarray
    dx: np.ndarray
    dt: np.ndarray
    dxx: np.ndarray


class FieldJet(NamedTuple):
    psi: Jet
    rho: Jet
    pi: Jet

    @classmethod
    def from_array(cls, arr):
        # arr: (4, N, 3) -> one Jet per head
        return cls(*(Jet(*(arr[k, :, h] for k in range(4))) for h in range(N_HEADS)))

    def to_array(self):
        n = np.shape(self.psi.value)[0]
        arr = np.zeros((4, n, N_HEADS))
        for h, jet in enumerate(self):
            for k in range(4):
                arr[k, :, h] = jet[k]
        return arr

    @classmethod
    def zeros(cls, n):
        return cls.from_array(np.zeros((4, n, N_HEADS)))


def init_network(spec: NetworkSpec) -> NetworkParams:
    """LeCun-style uniform init: W ~ U(-sqrt(3/fan_in), sqrt(3/fan_in)), zero biases."""
    rng = np.random.default_rng(spec.seed)
    params = NetworkParams(spec, np.zeros(spec.n_params))
    for W, b in params.layers():
        limit = np.sqrt(3.0 / W.shape[1])
        W[...] = rng.uniform(-limit, limit, size=W.shape)
        b[...] = 0.0
    return params


def _softplus(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _check_params(params):
    if not np.all(np.isfinite(params.theta)):
        raise NonFiniteError("network parameters are not finite")


def _input_jet(spec, x, t, derivs=True):
    n = x.shape[0]
    A = np.zeros((4 if derivs else 1, n, N_INPUTS))
    A[0, :, 0] = (x - spec.x_lo) * spec.x_scale - 1.0
    A[0, :, 1] = t * spec.t_scale
    if derivs:
        A[1, :, 0] = spec.x_scale
        A[2, :, 1] = spec.t_scale
    return A


def _affine(A, W, b):
    k, n, m = A.shape
    Z = (A.reshape(k * n, m) @ W.T).reshape(k, n, W.shape[0])
    Z[0] += b
    return Z


def _forward(params, x, t, derivs=True):
    """Output jet of shape (K, N, 3) with K = 4 (value, dx, dt, dxx) or K = 1 (value only)."""
    spec = params.spec
    layers = params.layers()
    A = _input_jet(spec, x, t, derivs)
    cache = []
    for W, b in layers[:-1]:
        Z = _affine(A, W, b)
        if spec.activation == "tanh":
            if derivs:
                H, h = tanh_jet_forward(Z)
            else:
                h = np.tanh(Z[0])
                H = h[None]
        else:
            h = Z[0]
            H = Z.copy()
        cache.append((A, Z, h))
        A = H
    W, b = layers[-1]
    O = _affine(A, W, b)
    cache.append(A)

    s_psi, s_rho, s_pi = spec.output_scale
    Y = np.empty_like(O)
    Y[:, :, 0] = s_psi * O[:, :, 0]
    Y[:, :, 2] = s_pi * O[:, :, 2]
    o = O[:, :, 1]
    if spec.rho_transform == "softplus":
        sig = _sigmoid(o[0])
        dsig = sig * (1.0 - sig)
        Y[0, :, 1] = s_rho * _softplus(o[0])
    else:
        sig = np.ones_like(o[0])
        dsig = np.zeros_like(o[0])
        Y[0, :, 1] = s_rho * o[0]
    if derivs:
        Y[1, :, 1] = s_rho * sig * o[1]
        Y[2, :, 1] = s_rho * sig * o[2]
        Y[3, :, 1] = s_rho * (dsig * o[1] * o[1] + sig * o[3])
    return Y, (cache, O, sig, dsig)


def _backward(params, G, saved, grad=None):
    """Accumulate the gradient of sum(G * Y) w.r.t. theta, where Y is the output jet."""
    spec = params.spec
    cache, O, sig, dsig = saved
    derivs = G.shape[0] == 4
    if grad is None:
        grad = np.zeros_like(params.theta)
    glayers = params.layers(grad)
    layers = params.layers()
    s_psi, s_rho, s_pi = spec.output_scale

    GO = np.empty_like(O)
    GO[:, :, 0] = s_psi * G[:, :, 0]
    GO[:, :, 2] = s_pi * G[:, :, 2]
    g, o = G[:, :, 1], O[:, :, 1]
    if derivs:
        ddsig = dsig * (1.0 - 2.0 * sig)
        GO[0, :, 1] = s_rho * (g[0] * sig + (g[1] * o[1] + g[2] * o[2] + g[3] * o[3]) * dsig
                               + g[3] * o[1] * o[1] * ddsig)
        GO[1, :, 1] = s_rho * (g[1] * sig + 2.0 * g[3] * dsig * o[1])
        GO[2, :, 1] = s_rho * g[2] * sig
        GO[3, :, 1] = s_rho * g[3] * sig
    else:
        GO[0, :, 1] = s_rho * g[0] * sig

    def accumulate(li, GZ, A):
        gW, gb = glayers[li]
        k, n, m = A.shape
        gW += GZ.reshape(k * n, -1).T @ A.reshape(k * n, m)
        gb += GZ[0].sum(axis=0)

    accumulate(len(layers) - 1, GO, cache[-1])
    GH = _affine(GO, layers[-1][0].T, 0.0)

    for li in range(len(layers) - 2, -1, -1):
        A, Z, h = cache[li]
        if spec.activation == "tanh":
            if derivs:
                GZ = tanh_jet_backward(GH, Z, h)
            else:
                GZ = GH * (1.0 - h * h)
        else:
            GZ = GH
        accumulate(li, GZ, A)
        if li > 0:
            GH = _affine(GZ, layers[li][0].T, 0.0)
    return grad


def _as_points(x, t):
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    x, t = np.broadcast_arrays(x, t)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(t))):
        raise ValueError("collocation points must be finite")
    return x.ravel(), t.ravel()


def forward_jet(params: NetworkParams, x, t) -> FieldJet:
    """Values and (d/dx, d/dt, d2/dx2) of every head at a batch of points."""
    _check_params(params)
    x, t = _as_points(x, t)
    Y, _ = _forward(params, x, t)
    return FieldJet.from_array(Y)


def forward_values(params: NetworkParams, x, t):
    """Plain forward pass; returns an (N, 3) array of (psi, rho, pi)."""
    _check_params(params)
    x, t = _as_points(x, t)
    spec = params.spec
    layers = params.layers()
    a = np.stack([(x - spec.x_lo) * spec.x_scale - 1.0, t * spec.t_scale], axis=1)
    for W, b in layers[:-1]:
        z = a @ W.T + b
        a = np.tanh(z) if spec.activation == "tanh" else z
    W, b = layers[-1]
    o = a @ W.T + b
    s_psi, s_rho, s_pi = spec.output_scale
    rho = _softplus(o[:, 1]) if spec.rho_transform == "softplus" else o[:, 1]
    return np.stack([s_psi * o[:, 0], s_rho * rho, s_pi * o[:, 2]], axis=1)


def policy(params: NetworkParams) -> Callable:
    """The pi head as a function (x, t) -> u."""
    def pi(x, t):
        x = np.asarray(x, dtype=float)
        return forward_values(params, x, np.broadcast_to(t, x.shape))[:, 2].reshape(x.shape)
    return pi


def loss_gradient(params: NetworkParams, x, t, loss_fn, n_values=0):
    """Evaluate ``loss_fn`` on the jets at (x, t) and its exact parameter gradient.

    ``loss_fn(jet)`` must return ``(loss, dloss_djet)`` where the second item is a
    FieldJet of per-point partial derivatives of the loss. The trailing ``n_values``
    points only get a value pass: their derivative slots are zero in the jet and
    their derivative gradients are ignored (cheaper for boundary-only points).
    """
    _check_params(params)
    x, t = _as_points(x, t)
    n_full = x.size - int(n_values)
    if not 0 <= n_values <= x.size:
        raise ValueError("n_values out of range")
    Y = np.zeros((4, x.size, N_HEADS))
    Y[:, :n_full], saved = _forward(params, x[:n_full], t[:n_full])
    if n_values:
        Y[:1, n_full:], saved_v = _forward(params, x[n_full:], t[n_full:], derivs=False)
    jet = FieldJet.from_array(Y)
    loss, gjet = loss_fn(jet)
    G = gjet.to_array()
    if not np.isfinite(loss) or not np.all(np.isfinite(G)):
        bad = ~np.all(np.isfinite(Y), axis=(0, 2)) | ~np.all(np.isfinite(G), axis=(0, 2))
        idx = int(np.argmax(bad)) if bad.any() else None
        point = (x[idx], t[idx]) if idx is not None else None
        raise NonFiniteError(f"non-finite loss ({loss})", point=point, index=idx)
    grad = _backward(params, np.ascontiguousarray(G[:, :n_full]), saved)
    if n_values:
        _backward(params, np.ascontiguousarray(G[:1, n_full:]), saved_v, grad)
    return float(loss), grad


# -- checkpoints -------------------------------------------------------------------

def save_checkpoint(path, params: NetworkParams, meta: dict | None = None):
    """Binary checkpoint (little-endian) plus a JSON sidecar ``<path>.json``.

    Layout: 8-byte magic, u32 version, u32 hidden_layers, u32 width, u16 activation
    length + ASCII activation, u16 length + ASCII rho transform, f64 x_lo, f64 x_hi, f64 t_final, 3 x f64 output_scale,
    i64 seed, u32 heads, u64 D, then D f64 parameters.
    """
    path = Path(path)
    spec = params.spec
    act = spec.activation.encode("ascii")
    header = CHECKPOINT_MAGIC + struct.pack(
        "<III", CHECKPOINT_VERSION, spec.hidden_layers, spec.width)
    header += struct.pack("<H", len(act)) + act
    rt = spec.rho_transform.encode("ascii")
    header += struct.pack("<H", len(rt)) + rt
    header += struct.pack("<3d", spec.x_lo, spec.x_hi, spec.t_final)
    header += struct.pack("<3d", *spec.output_scale)
    header += struct.pack("<qIQ", spec.seed, N_HEADS, spec.n_params)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(params.theta.astype("<f8").tobytes())
    tmp.replace(path)
    sidecar = {"spec": asdict(spec), "n_params": spec.n_params}
    sidecar.update(meta or {})
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True, default=float))


def load_checkpoint(path) -> NetworkParams:
    path = Path(path)
    data = path.read_bytes()
    if data[:8] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a network checkpoint")
    try:
        version, hidden, width = struct.unpack_from("<III", data, 8)
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        k = 20
        (n_act,) = struct.unpack_from("<H", data, k)
        k += 2
        activation = data[k:k + n_act].decode("ascii")
        k += n_act
        (n_rt,) = struct.unpack_from("<H", data, k)
        k += 2
        rho_transform = data[k:k + n_rt].decode("ascii")
        k += n_rt
        x_lo, x_hi, t_final = struct.unpack_from("<3d", data, k)
        k += 24
        scale = struct.unpack_from("<3d", data, k)
        k += 24
        seed, heads, n = struct.unpack_from("<qIQ", data, k)
        k += 20
    except (struct.error, UnicodeDecodeError) as exc:
        raise CheckpointError(f"{path}: truncated or corrupt header") from exc
    if heads != N_HEADS:
        raise CheckpointError(f"{path}: expected {N_HEADS} heads, found {heads}")
    try:
        spec = NetworkSpec(hidden, width, activation, x_lo, x_hi, t_final, scale, seed, rho_transform)
    except ValueError as exc:
        raise CheckpointError(f"{path}: invalid network description: {exc}") from exc
    if n != spec.n_params or len(data) - k != 8 * n:
        raise CheckpointError(f"{path}: parameter count mismatch")
    theta = np.frombuffer(data, dtype="<f8", count=n, offset=k).astype(np.float64)
    return NetworkParams(spec, theta)
