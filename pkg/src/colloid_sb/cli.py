"""Command-line entry point: ``colloid-sb {train,export-fields,verify,simulate}``.

Exit codes: 0 success, 1 usage / configuration / checkpoint error, 2 numerical failure
(divergence, unstable oracle, non-finite simulation, or a verification threshold missed).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, RunConfig, load_config
from .diffnet import CheckpointError, NonFiniteError, load_checkpoint
from .fpk_oracle import StabilityError
from .simulate import SimulationError
from .trainer import TrainingDiverged

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2

log = logging.getLogger("colloid_sb")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for numerical failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration (defaults reproduce the published setup)")
    common.add_argument("--seed", type=int, help="override [run] seed")
    common.add_argument("--out", help="output directory (overrides [run] out)")
    common.add_argument("--deterministic", action="store_true", help="force deterministic mode")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="colloid-sb", description="Schroedinger-bridge density steering of colloidal self-assembly")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("train", parents=[common], help="train the network; writes model.ckpt, history.csv")
    for name, text in (("export-fields", "evaluate psi, rho, pi on a dense grid"),
                       ("verify", "closed-loop and finite-difference verification report"),
                       ("simulate", "closed-loop Euler-Maruyama ensemble under the learned policy")):
        sp = sub.add_parser(name, parents=[common], help=text)
        sp.add_argument("--checkpoint", help="trained model (default: <out>/model.ckpt)")
    return p


def _resolve(args) -> tuple[RunConfig, Path]:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.deterministic:
        cfg = replace(cfg, deterministic=True, train=replace(cfg.train, deterministic=True))
    out = Path(args.out if args.out else cfg.out)
    return cfg, out


def _checkpoint(args, out):
    path = Path(args.checkpoint) if args.checkpoint else out / "model.ckpt"
    if not path.exists():
        raise UsageError(f"checkpoint not found: {path}")
    return load_checkpoint(path)


def run(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    from . import pipeline  # deferred: pulls in matplotlib

    try:
        cfg, out = _resolve(args)
        if args.command == "train":
            _, history, final = pipeline.run_train(cfg, out)
            print(json.dumps({"epochs": history[-1][0], **final.as_dict()}, sort_keys=True))
            return EXIT_OK
        params = _checkpoint(args, out)
        if args.command == "export-fields":
            paths = pipeline.export_fields(params, cfg, out)
            print("\n".join(str(p) for p in paths.values()))
        elif args.command == "simulate":
            ens = pipeline.run_simulation(params, cfg, out)
            print(f"{ens.states.shape[0]} paths x {ens.times.size} times -> {out / 'ensemble.csv'}")
        elif args.command == "verify":
            report = pipeline.run_verification(params, cfg, out)
            for f in report["failures"]:
                print(f"FAILED {f['check']}: {f['value']:.4g} (threshold {f['threshold']:g})", file=sys.stderr)
            print(json.dumps({k: report[k] for k in ("kde_w1_T", "kde_ks_T", "oracle_l1_T", "oracle_l1_net_T",
                                                     "mass_drift", "passed")}, sort_keys=True))
            return EXIT_OK if report["passed"] else EXIT_NUMERIC
        return EXIT_OK
    except (ConfigError, CheckpointError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingDiverged as exc:
        where = f"; last good state saved to {exc.checkpoint}" if exc.checkpoint else ""
        print(f"error: {exc}{where}", file=sys.stderr)
        return EXIT_NUMERIC
    except (StabilityError, SimulationError, NonFiniteError, FloatingPointError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
