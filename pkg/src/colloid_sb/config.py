"""Run configuration: an INI file (``key = value`` under ``[section]`` headers).

Every default reproduces the published experiment, so an empty file is a valid config.
Sections and keys::

    [run]        out, seed, deterministic
    [landscape]  kind (colloidal | zero), a, b, c, d, f, k_B, theta
    [endpoints]  mu0, sigma0, muT, sigmaT, lo, hi
    [network]    hidden_layers, width, activation, rho_transform (softplus | identity),
                 psi_scale, rho_scale, pi_scale
    [train]      n_interior, n_initial, n_terminal, epochs, lr, beta1, beta2, eps,
                 rar_enabled, rar_period, rar_pool, rar_add, T_final, residual_target,
                 checkpoint_every, log_every
    [simulate]   n_paths, dt, boundary_mode
    [mh]         proposal_sigma, burn_in, thin
    [kde]        bandwidth (silverman | positive number)
    [oracle]     nx, safety
    [export]     nx, nt
    [verify]     kde_w1_max, kde_ks_max, oracle_l1_max, mass_drift_max
"""
from __future__ import annotations

import configparser
import hashlib
import json
import re
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .diffnet import NetworkSpec
from .landscape import ConstantLandscape, LandscapeParams
from .prob import TruncNormSpec
from .residuals import Problem
from .simulate import SimConfig
from .trainer import TrainConfig


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _optional_float(s):
    return None if s.strip().lower() in ("", "none", "default") else float(s)


def _bandwidth(s):
    v = s.strip().lower()
    if v in ("", "silverman"):
        return None
    b = float(v)
    if not b > 0:
        raise ValueError("bandwidth must be positive")
    return b


SCHEMA = {
    "run": {"out": str, "seed": int, "deterministic": _bool},
    "landscape": {"kind": str, "a": float, "b": float, "c": float, "d": float, "f": float,
                  "k_B": float, "theta": float},
    "endpoints": {"mu0": float, "sigma0": float, "muT": float, "sigmaT": float, "lo": float, "hi": float},
    "network": {"hidden_layers": int, "width": int, "activation": str, "rho_transform": str,
                "psi_scale": float, "rho_scale": float, "pi_scale": float},
    "train": {"n_interior": int, "n_initial": int, "n_terminal": int, "epochs": int, "lr": float,
              "beta1": float, "beta2": float, "eps": float, "rar_enabled": _bool, "rar_period": int,
              "rar_pool": int, "rar_add": int, "T_final": float, "residual_target": float,
              "checkpoint_every": int, "log_every": int},
    "simulate": {"n_paths": int, "dt": float, "boundary_mode": str},
    "mh": {"proposal_sigma": _optional_float, "burn_in": int, "thin": int},
    "kde": {"bandwidth": _bandwidth},
    "oracle": {"nx": int, "safety": float},
    "export": {"nx": int, "nt": int},
    "verify": {"kde_w1_max": float, "kde_ks_max": float, "oracle_l1_max": float, "mass_drift_max": float},
}


@dataclass
class RunConfig:
    out: str = "runs/default"
    seed: int = 0
    deterministic: bool = True
    landscape_kind: str = "colloidal"
    landscape: LandscapeParams = field(default_factory=LandscapeParams)
    rho0: TruncNormSpec = TruncNormSpec(0.0, 0.2, 0.0, 6.0)
    rhoT: TruncNormSpec = TruncNormSpec(5.0, 0.1, 0.0, 6.0)
    train: TrainConfig = field(default_factory=TrainConfig)
    log_every: int = 500
    sim: SimConfig = field(default_factory=lambda: SimConfig(seed=2))  # run seed + 2
    mh_proposal_sigma: float | None = None
    mh_burn_in: int = 1000
    mh_thin: int = 10
    kde_bandwidth: float | None = None
    oracle_nx: int = 1201
    oracle_safety: float = 0.9
    export_nx: int = 61
    export_nt: int = 201
    kde_w1_max: float = 0.15
    kde_ks_max: float = 0.10
    oracle_l1_max: float = 0.25
    mass_drift_max: float = 1e-3

    @property
    def T(self):
        return self.train.T_final

    def problem(self) -> Problem:
        land = ConstantLandscape(0.0, 0.0) if self.landscape_kind == "zero" else self.landscape
        return Problem(land, self.rho0, self.rhoT, self.T, self.rho0.lo, self.rho0.hi)

    def with_seed(self, seed):
        net = replace(self.train.network, seed=seed)
        return replace(self, seed=seed, train=replace(self.train, seed=seed, network=net),
                       sim=replace(self.sim, seed=seed + 2))

    @property
    def mh_seed(self):
        return self.seed + 1

    def as_dict(self):
        d = asdict(self)
        d.pop("out")
        return d

    def hash(self):
        blob = json.dumps(self.as_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def _line_numbers(text):
    """Map (section, key) -> 1-based line number, for error messages."""
    where, section = {}, None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            where[(section, None)] = i
        elif section and s and s[0] not in "#;":
            key = re.split(r"[=:]", s, maxsplit=1)[0].strip()
            where[(section, key)] = i
    return where


def parse_config(text, source="<config>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError([f"{source}: {exc}"]) from exc
    lines = _line_numbers(text)
    errors, values = [], {}

    def loc(section, key=None):
        n = lines.get((section, key))
        return f"{source}:{n}" if n else source

    for section in parser.sections():
        if section not in SCHEMA:
            errors.append(f"{loc(section)}: unknown section [{section}]")
            continue
        for key, raw in parser.items(section):
            conv = SCHEMA[section].get(key)
            if conv is None:
                errors.append(f"{loc(section, key)}: [{section}] unknown key {key!r}")
                continue
            try:
                values[(section, key)] = conv(raw)
            except ValueError as exc:
                errors.append(f"{loc(section, key)}: [{section}] {key}: {exc}")
    if errors:
        raise ConfigError(errors)

    def get(section, key, default):
        return values.get((section, key), default)

    cfg = RunConfig()
    try_build = []

    def build(name, fn):
        try:
            return fn()
        except (ValueError, TypeError) as exc:
            keys = [k for (s, k) in values if s == name]
            where = loc(name, keys[0]) if keys else source
            try_build.append(f"{where}: [{name}] {exc}")
            return None

    kind = get("landscape", "kind", "colloidal")
    if kind not in ("colloidal", "zero"):
        errors.append(f"{loc('landscape', 'kind')}: [landscape] kind must be 'colloidal' or 'zero', got {kind!r}")
    d = LandscapeParams()
    land = build("landscape", lambda: LandscapeParams(**{k: get("landscape", k, getattr(d, k))
                                                          for k in ("a", "b", "c", "d", "f", "k_B", "theta")}))
    lo, hi = get("endpoints", "lo", 0.0), get("endpoints", "hi", 6.0)
    rho0 = build("endpoints", lambda: TruncNormSpec(get("endpoints", "mu0", 0.0), get("endpoints", "sigma0", 0.2), lo, hi))
    rhoT = build("endpoints", lambda: TruncNormSpec(get("endpoints", "muT", 5.0), get("endpoints", "sigmaT", 0.1), lo, hi))
    seed = get("run", "seed", 0)
    T = get("train", "T_final", 200.0)
    net = build("network", lambda: NetworkSpec(
        hidden_layers=get("network", "hidden_layers", 3), width=get("network", "width", 70),
        activation=get("network", "activation", "tanh"), x_lo=lo, x_hi=hi, t_final=T,
        output_scale=(get("network", "psi_scale", 300.0), get("network", "rho_scale", 1.0),
                      get("network", "pi_scale", 4.0)),
        seed=seed, rho_transform=get("network", "rho_transform", "softplus")))
    td = TrainConfig.__dataclass_fields__
    train = None
    if net is not None:
        train = build("train", lambda: TrainConfig(
            network=net, seed=seed, x_lo=lo, x_hi=hi, deterministic=get("run", "deterministic", True),
            **{k: get("train", k, td[k].default) for k in (
                "n_interior", "n_initial", "n_terminal", "epochs", "lr", "beta1", "beta2", "eps",
                "rar_enabled", "rar_period", "rar_pool", "rar_add", "T_final", "residual_target",
                "checkpoint_every")}))
    sim = build("simulate", lambda: SimConfig(
        n_paths=get("simulate", "n_paths", 1000), dt=get("simulate", "dt", 0.1), T=T,
        boundary_mode=get("simulate", "boundary_mode", "reflect"), seed=seed + 2, x_lo=lo, x_hi=hi))
    for sec, key, cond, msg in (
        ("mh", "burn_in", get("mh", "burn_in", 0) >= 0, "must be >= 0"),
        ("mh", "thin", get("mh", "thin", 1) >= 1, "must be >= 1"),
        ("mh", "proposal_sigma", (get("mh", "proposal_sigma", None) or 1.0) > 0, "must be positive"),
        ("oracle", "nx", get("oracle", "nx", 1201) >= 16, "must be >= 16"),
        ("oracle", "safety", 0 < get("oracle", "safety", 0.9) <= 1, "must lie in (0, 1]"),
        ("export", "nx", get("export", "nx", 61) >= 2, "must be >= 2"),
        ("export", "nt", get("export", "nt", 201) >= 2, "must be >= 2"),
        ("train", "log_every", get("train", "log_every", 500) >= 0, "must be >= 0"),
    ):
        if not cond:
            errors.append(f"{loc(sec, key)}: [{sec}] {key} {msg}")
    errors.extend(try_build)
    if errors:
        raise ConfigError(errors)

    return replace(
        cfg, out=get("run", "out", cfg.out), seed=seed, deterministic=get("run", "deterministic", True),
        landscape_kind=kind, landscape=land, rho0=rho0, rhoT=rhoT, train=train,
        log_every=get("train", "log_every", 500), sim=sim,
        mh_proposal_sigma=get("mh", "proposal_sigma", None), mh_burn_in=get("mh", "burn_in", 1000),
        mh_thin=get("mh", "thin", 10), kde_bandwidth=get("kde", "bandwidth", None),
        oracle_nx=get("oracle", "nx", 1201), oracle_safety=get("oracle", "safety", 0.9),
        export_nx=get("export", "nx", 61), export_nt=get("export", "nt", 201),
        kde_w1_max=get("verify", "kde_w1_max", 0.15), kde_ks_max=get("verify", "kde_ks_max", 0.10),
        oracle_l1_max=get("verify", "oracle_l1_max", 0.25),
        mass_drift_max=get("verify", "mass_drift_max", 1e-3),
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read config file {path}: {exc.strerror}"]) from exc
    return parse_config(text, source=str(path))
