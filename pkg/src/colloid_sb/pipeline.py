"""End-to-end steps behind the command line: train, export fields, simulate, verify."""
from __future__ import annotations

import csv
import json
import logging
import time
from pathlib import Path

import numpy as np

from . import plots
from .config import RunConfig
from .diffnet import NetworkParams, forward_values, policy, save_checkpoint
from .fpk_oracle import compare, make_grid, propagate, trapz_mass, write_history_csv
from .prob import distance, kde, mh_sample, write_density_csv, write_samples_csv
from .residuals import TERMS, total_loss
from .simulate import simulate_ensemble, snapshot
from .trainer import train

log = logging.getLogger(__name__)

SNAPSHOT_FRACTIONS = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)


def _comment(cfg: RunConfig):
    return f"config_hash={cfg.hash()} seed={cfg.seed}"


def max_diffusion(landscape):
    if hasattr(landscape, "d") and hasattr(landscape, "f"):
        return landscape.d + landscape.f
    return float(getattr(landscape, "diffusion_value", 0.0))


def run_train(cfg: RunConfig, out: Path):
    """Train, then write model.ckpt (+ .json sidecar), history.csv and residuals.svg."""
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / "model.ckpt"
    start = time.perf_counter()
    params, history, colloc = train(
        cfg.train, cfg.problem(), checkpoint_path=ckpt, history_path=out / "history.csv",
        history_comment=_comment(cfg), log_every=cfg.log_every)
    final = total_loss(params, colloc, cfg.problem())
    save_checkpoint(ckpt, params, {
        "epoch": history[-1][0], "seed": cfg.seed, "loss": final.as_dict(),
        "config_hash": cfg.hash(), "train_seconds": time.perf_counter() - start,
        "n_interior": len(colloc.interior)})
    epochs = [e for e, _ in history]
    terms = {k: [getattr(lb, k) for _, lb in history] for k in TERMS}
    plots.residual_curves(out / "residuals.svg", epochs, terms, cfg.train.residual_target)
    return params, history, final


def export_fields(params: NetworkParams, cfg: RunConfig, out: Path):
    """Dense (x, t) evaluation of psi, pi, rho as CSV plus heatmap / snapshot SVGs."""
    out.mkdir(parents=True, exist_ok=True)
    xs = np.linspace(cfg.rho0.lo, cfg.rho0.hi, cfg.export_nx)
    ts = np.linspace(0.0, cfg.T, cfg.export_nt)
    X, Tm = np.meshgrid(xs, ts, indexing="ij")
    vals = forward_values(params, X.ravel(), Tm.ravel())
    paths = {}
    for h, name in enumerate(("psi", "rho", "pi")):
        p = out / f"field_{name}.csv"
        with open(p, "w", newline="") as fh:
            fh.write(f"# {_comment(cfg)}\n")
            w = csv.writer(fh)
            w.writerow(("x", "t", name))
            for xv, tv, v in zip(X.ravel(), Tm.ravel(), vals[:, h]):
                w.writerow((repr(float(xv)), repr(float(tv)), repr(float(v))))
        paths[name] = p
        plots.field_heatmap(out / f"field_{name}.svg", xs, ts, vals[:, h].reshape(X.shape), name)
    xf = np.linspace(cfg.rho0.lo, cfg.rho0.hi, 601)
    snaps = [(f * cfg.T, forward_values(params, xf, np.full_like(xf, f * cfg.T))[:, 1])
             for f in SNAPSHOT_FRACTIONS]
    plots.density_snapshots(out / "rho_snapshots.svg", xf, snaps)
    return paths


def sample_initial(cfg: RunConfig, n=None):
    n = cfg.sim.n_paths if n is None else n
    return mh_sample(cfg.rho0, n, cfg.mh_proposal_sigma, cfg.mh_burn_in, cfg.mh_thin, seed=cfg.mh_seed)


def run_simulation(params: NetworkParams, cfg: RunConfig, out: Path | None = None, init=None):
    init = sample_initial(cfg) if init is None else init
    ens = simulate_ensemble(params, init, cfg.sim, cfg.problem().landscape)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_samples_csv(out / "initial_samples.csv", init, _comment(cfg))
        stride = max(1, int(round(1.0 / cfg.sim.dt)))
        ens.write_csv(out / "ensemble.csv", stride=stride, comment=_comment(cfg))
        plots.sample_paths(out / "sample_paths.svg", ens.times[::stride], ens.states[:, ::stride],
                           ens.controls[:, ::stride])
    return ens


def run_oracle(params: NetworkParams, cfg: RunConfig):
    land = cfg.problem().landscape
    grid = make_grid(cfg.oracle_nx, cfg.T, max_diffusion(land), cfg.oracle_safety, cfg.rho0.lo, cfg.rho0.hi)
    x = grid.x
    rho0 = cfg.rho0.pdf(x)
    rho0 = rho0 / trapz_mass(rho0, grid)
    times, hist = propagate(policy(params), rho0, grid, land)
    masses = np.array([trapz_mass(r, grid) for r in hist])
    return grid, times, hist, float(np.max(np.abs(masses - 1.0)))


def run_verification(params: NetworkParams, cfg: RunConfig, out: Path | None = None):
    """Closed-loop Monte-Carlo and finite-difference checks of a trained model.

    Returns the report dict; ``report["failures"]`` lists every check that missed its
    threshold with the measured value.
    """
    t0 = time.perf_counter()
    init = sample_initial(cfg)
    ens = run_simulation(params, cfg, out, init)
    xk = np.linspace(cfg.rho0.lo, cfg.rho0.hi, 601)
    final, t_used = snapshot(ens, cfg.T)
    dens_T = kde(final, xk, cfg.kde_bandwidth, (cfg.rho0.lo, cfg.rho0.hi))
    kd = distance(dens_T, cfg.rhoT, grid=xk)
    sd = distance(final, cfg.rhoT)
    t_sim = time.perf_counter() - t0

    grid, times, hist, drift = run_oracle(params, cfg)
    xg = grid.x
    rhoT_grid = cfg.rhoT.pdf(xg)
    net_T = forward_values(params, xg, np.full_like(xg, cfg.T))[:, 1]
    vs_target = compare(hist[-1], rhoT_grid, xg)
    vs_net = compare(hist[-1], net_T, xg)
    t_oracle = time.perf_counter() - t0 - t_sim

    snaps, kde_snaps, snap_l1 = [], [], {}
    for f in SNAPSHOT_FRACTIONS:
        s, tu = snapshot(ens, f * cfg.T)
        net = forward_values(params, xk, np.full_like(xk, tu))[:, 1]
        kd_s = kde(s, xk, cfg.kde_bandwidth, (cfg.rho0.lo, cfg.rho0.hi))
        snaps.append((tu, net))
        kde_snaps.append(kd_s)
        snap_l1[f"{tu:g}"] = compare(kd_s, net, xk)["L1"]

    report = {
        "kde_w1_T": kd["wasserstein1"], "kde_ks_T": kd["ks"],
        "sample_w1_T": sd["wasserstein1"], "sample_ks_T": sd["ks"],
        "oracle_l1_T": vs_target["L1"], "oracle_w1_T": vs_target["W1"], "oracle_linf_T": vs_target["Linf"],
        "oracle_l1_net_T": vs_net["L1"], "oracle_w1_net_T": vs_net["W1"],
        "mass_drift": drift,
        "snapshot_time_T": t_used, "kde_vs_network_l1": snap_l1,
        "oracle_nx": grid.nx, "oracle_dt": grid.dt_pde, "oracle_steps": grid.n_steps,
        "n_paths": cfg.sim.n_paths, "sim_dt": cfg.sim.dt,
        "seconds_closed_loop": t_sim, "seconds_oracle": t_oracle,
        "config_hash": cfg.hash(), "seed": cfg.seed,
        "thresholds": {"kde_w1_T": cfg.kde_w1_max, "kde_ks_T": cfg.kde_ks_max,
                       "oracle_l1_T": cfg.oracle_l1_max, "oracle_l1_net_T": cfg.oracle_l1_max,
                       "mass_drift": cfg.mass_drift_max},
    }
    report["failures"] = [
        {"check": k, "value": report[k], "threshold": thr}
        for k, thr in report["thresholds"].items() if not report[k] < thr]
    report["passed"] = not report["failures"]

    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
        with open(out / "snapshots_kde.csv", "w", newline="") as fh:
            fh.write(f"# {_comment(cfg)}\n")
            w = csv.writer(fh)
            w.writerow(("t", "x", "kde", "rho_network"))
            for (tu, net), kd_s in zip(snaps, kde_snaps):
                for xv, a, b in zip(xk, kd_s, net):
                    w.writerow((repr(tu), repr(float(xv)), repr(float(a)), repr(float(b))))
        write_density_csv(out / "oracle_rho_T.csv", xg, hist[-1], _comment(cfg), ("x", "rho_oracle"))
        write_history_csv(out / "oracle_history.csv", times, xg, hist, _comment(cfg), stride_t=10, stride_x=10)
        plots.density_snapshots(out / "snapshots.svg", xk, snaps, xk[::10], [k[::10] for k in kde_snaps])
    return report
