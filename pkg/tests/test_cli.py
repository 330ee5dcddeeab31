import csv
import json
from pathlib import Path

import numpy as np
import pytest

from colloid_sb.cli import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, build_parser, run
from colloid_sb.config import load_config
from colloid_sb.diffnet import init_network, save_checkpoint
from colloid_sb.prob import RHO0

ROOT = Path(__file__).resolve().parents[1]
SMOKE = ROOT / "configs" / "smoke.ini"


def read_csv(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    assert lines[0].startswith("# config_hash=")
    rows = list(csv.reader(lines[1:]))
    return rows[0], rows[1:]


@pytest.fixture(scope="module")
def smoke_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("smoke")
    assert run(["train", "--config", str(SMOKE), "--out", str(out)]) == EXIT_OK
    return out


def test_parser_has_every_subcommand():
    p = build_parser()
    for cmd in ("train", "export-fields", "verify", "simulate"):
        args = p.parse_args([cmd, "--config", "c.ini", "--seed", "4", "--out", "o", "--deterministic"])
        assert args.command == cmd and args.seed == 4 and args.deterministic


def test_missing_config_names_path(tmp_path, capsys):
    missing = tmp_path / "absent.ini"
    assert run(["train", "--config", str(missing)]) == EXIT_USAGE
    assert str(missing) in capsys.readouterr().err


def test_invalid_config_lists_errors(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[train]\nepochs = -\nfoo = 1\n")
    assert run(["train", "--config", str(bad)]) == EXIT_USAGE
    err = capsys.readouterr().err
    assert "bad.ini:2" in err and "bad.ini:3" in err


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        run(["no-such-command"])
    assert exc.value.code == EXIT_USAGE


def test_smoke_train_artifacts(smoke_run):
    for name in ("model.ckpt", "model.ckpt.json", "history.csv", "residuals.svg"):
        assert (smoke_run / name).exists()
    header, rows = read_csv(smoke_run / "history.csv")
    assert header[0] == "epoch" and len(rows) == 200


def test_export_fields_shape_and_determinism(smoke_run, tmp_path):
    cfg = load_config(SMOKE)
    outs = [tmp_path / "a", tmp_path / "b"]
    for o in outs:
        assert run(["export-fields", "--config", str(SMOKE), "--out", str(o),
                    "--checkpoint", str(smoke_run / "model.ckpt")]) == EXIT_OK
    for name in ("psi", "rho", "pi"):
        header, rows = read_csv(outs[0] / f"field_{name}.csv")
        assert header == ["x", "t", name] and len(rows) == cfg.export_nx * cfg.export_nt
        assert (outs[0] / f"field_{name}.csv").read_bytes() == (outs[1] / f"field_{name}.csv").read_bytes()
        assert (outs[0] / f"field_{name}.svg").exists()
    assert (outs[0] / "rho_snapshots.svg").exists()


def test_exported_rho_at_t0_tracks_rho0_within_boundary_loss(smoke_run, tmp_path):
    # L_rho0 is a mean of squares over x uniform on [0, 6], so ||rho - rho_0||_2^2 ~ 6 L_rho0 and,
    # by Cauchy-Schwarz, ||rho - rho_0||_1 <~ 6 sqrt(L_rho0); factor 2 covers the 20-point sample mean
    cfg_path = tmp_path / "fine.ini"
    cfg_path.write_text(SMOKE.read_text().replace("nx = 11", "nx = 601").replace("nt = 21", "nt = 3"))
    run(["export-fields", "--config", str(cfg_path), "--out", str(tmp_path), "--checkpoint", str(smoke_run / "model.ckpt")])
    _, rows = read_csv(tmp_path / "field_rho.csv")
    a = np.array(rows, dtype=float)
    assert len(a) == 601 * 3
    x, rho = a[a[:, 1] == 0.0, 0], a[a[:, 1] == 0.0, 2]
    l_rho0 = json.loads((smoke_run / "model.ckpt.json").read_text())["loss"]["L_rho0"]
    l1 = np.trapezoid(np.abs(rho - RHO0.pdf(x)), x)
    assert l1 <= 2 * 6.0 * np.sqrt(l_rho0)


def test_simulate_writes_ensemble(smoke_run, tmp_path, capsys):
    assert run(["simulate", "--config", str(SMOKE), "--out", str(tmp_path),
                "--checkpoint", str(smoke_run / "model.ckpt")]) == EXIT_OK
    assert (tmp_path / "ensemble.csv").exists()
    assert "50 paths" in capsys.readouterr().out


def test_verify_report_schema(smoke_run, tmp_path):
    code = run(["verify", "--config", str(SMOKE), "--out", str(tmp_path), "--checkpoint", str(smoke_run / "model.ckpt")])
    report = json.loads((tmp_path / "report.json").read_text())
    assert {"kde_w1_T", "kde_ks_T", "oracle_l1_T", "mass_drift"} <= set(report)
    assert code == (EXIT_OK if report["passed"] else EXIT_NUMERIC)
    for f in report["failures"]:
        assert f["value"] >= f["threshold"]


def test_verify_identity_stub(tmp_path):
    # zero landscape, rho_T = rho_0 and pi = 0 (zero policy head): nothing moves, so the
    # terminal mismatch is sampling/KDE noise only
    cfg_path = tmp_path / "stub.ini"
    cfg_path.write_text("[landscape]\nkind = zero\n[endpoints]\nmuT = 0.0\nsigmaT = 0.2\n"
                        "[network]\nhidden_layers = 1\nwidth = 4\npi_scale = 0\n"
                        "[simulate]\ndt = 1.0\n[oracle]\nnx = 301\n")
    cfg = load_config(cfg_path)
    save_checkpoint(tmp_path / "stub.ckpt", init_network(cfg.train.network))
    code = run(["verify", "--config", str(cfg_path), "--out", str(tmp_path), "--checkpoint", str(tmp_path / "stub.ckpt")])
    r = json.loads((tmp_path / "report.json").read_text())
    assert r["kde_w1_T"] < 0.03 and r["kde_ks_T"] < 0.06
    assert r["oracle_l1_T"] < 1e-9 and r["mass_drift"] < 1e-12
    # the untrained network's rho(., T) is not rho_T, so only that check fails
    assert code == EXIT_NUMERIC and [f["check"] for f in r["failures"]] == ["oracle_l1_net_T"]


def test_corrupt_checkpoint_rejected(tmp_path, capsys):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"not a checkpoint")
    assert run(["export-fields", "--config", str(SMOKE), "--out", str(tmp_path), "--checkpoint", str(bad)]) == EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_missing_checkpoint(tmp_path, capsys):
    assert run(["simulate", "--config", str(SMOKE), "--out", str(tmp_path)]) == EXIT_USAGE
    assert "model.ckpt" in capsys.readouterr().err
