"""End-to-end pipeline on the tiny smoke configuration (about a minute on one core).

Trains a 1x8 network for 200 epochs, exports the fields, runs the closed-loop ensemble and
the finite-difference oracle, and prints the verification report. The smoke network is far
too small to solve the steering problem; the point is to see every artifact being produced.
For the real run use ``colloid-sb train --config configs/full.ini``.

    python demos/03_train_verify_smoke.py [out_dir]
"""
# %%
import json
import sys
from pathlib import Path

from colloid_sb import pipeline
from colloid_sb.config import load_config

root = Path(__file__).resolve().parents[1]
cfg = load_config(root / "configs" / "smoke.ini")
out = Path(sys.argv[1]) if len(sys.argv) > 1 else root / "runs" / "demo_smoke"

# %% train: writes model.ckpt (+ .json sidecar), history.csv, residuals.svg
params, history, final = pipeline.run_train(cfg, out)
print(f"{len(history)} epochs; final loss terms:", {k: f"{v:.2e}" for k, v in final.as_dict().items()})

# %% dense field export (CSV + heatmaps)
for name, path in pipeline.export_fields(params, cfg, out).items():
    print(name, "->", path)

# %% closed-loop Monte-Carlo and oracle checks
report = pipeline.run_verification(params, cfg, out / "verify")
print(json.dumps({k: report[k] for k in ("kde_w1_T", "kde_ks_T", "oracle_l1_T", "oracle_l1_net_T",
                                         "mass_drift", "passed")}, indent=1))
for f in report["failures"]:
    print(f"missed {f['check']}: {f['value']:.3g} >= {f['threshold']}")
