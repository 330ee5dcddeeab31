"""Endpoint densities, the Metropolis-Hastings sampler and the KDE / distance estimators.

    python demos/02_sampling_and_estimators.py
"""
# %%
import numpy as np
from scipy import stats

from colloid_sb.prob import RHO0, RHOT, distance, kde, mh_sample, silverman_bandwidth

# %% the endpoint densities: rho_0 is cut in half by the wall at 0
xs = np.linspace(0, 6, 6001)
for name, spec in (("rho_0", RHO0), ("rho_T", RHOT)):
    print(f"{name}: mass {np.trapezoid(spec.pdf(xs), xs):.8f}, cdf(mu) {spec.cdf(spec.mu):.3f}")

# %% MH samples pass a one-sample KS test at alpha = 0.01
crit = stats.kstwo.ppf(0.99, 1000)
for name, spec in (("rho_0", RHO0), ("rho_T", RHOT)):
    s = mh_sample(spec, 1000, seed=0)
    print(f"{name}: KS {distance(s, spec)['ks']:.4f} (critical {crit:.4f}), all in [0, 6]: {np.all((s >= 0) & (s <= 6))}")

# %% KDE near a wall: without reflection ~half a kernel leaks past x = 0
s0 = mh_sample(RHO0, 1000, seed=1)
grid = np.linspace(-1, 6, 7001)
print("bandwidth", round(silverman_bandwidth(s0), 4))
print("plain KDE mass on [0,6]:    ", round(np.trapezoid(kde(s0, grid)[grid >= 0], grid[grid >= 0]), 4))
print("reflected KDE mass on [0,6]:", round(np.trapezoid(kde(s0, xs, bounds=(0, 6)), xs), 4))

# %% distances shrink with sample size like n^-1/2
for n in (100, 1000, 10000):
    d = distance(mh_sample(RHOT, n, seed=2), RHOT)
    print(f"n={n:5d}  W1={d['wasserstein1']:.4f}  KS={d['ks']:.4f}")
