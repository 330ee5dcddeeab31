"""Tour of the drift/diffusion landscapes and a hand-made steering policy.

Shows that 0 -> 5 steering in 200 s is physically feasible: a feedback law that keeps
the particle just left of the moving well drives the ensemble to the target, and the
finite-difference Fokker-Planck oracle tells the same story as Monte-Carlo.

    python demos/01_landscape_and_hand_policy.py
"""
# %%
import numpy as np

from colloid_sb.fpk_oracle import compare, make_grid, propagate, trapz_mass
from colloid_sb.landscape import LandscapeParams, eval_diffusion, eval_drift, eval_partials
from colloid_sb.prob import RHO0, RHOT, distance, kde, mh_sample
from colloid_sb.simulate import SimConfig, simulate_ensemble, snapshot

p = LandscapeParams()
x = np.linspace(0, 6, 7)

# %% the well sits at x = b + c u; D2 peaks there, D1 pulls towards it
for u in (0.0, 2.0, 3.87):
    print(f"u={u:5.2f}  well at {p.b + p.c * u:4.2f}  D1={np.round(eval_drift(x, u, p), 4)}")
print("D2 at the well:", eval_diffusion(p.b, 0.0, p), " far away:", eval_diffusion(0.0, 0.0, p))

# %% control sensitivity: far from the well D1 barely responds to u
lp = eval_partials(np.array([0.0, 2.1, 4.0]), np.zeros(3), p)
print("dD1/du at x = 0, 2.1, 4:", lp.D1_u)

# %% hand policy: put the well 0.5 to the right of the particle (strongest pull),
# but never beyond the target mean, where it then parks
def hand_policy(x, t):
    return (np.minimum(np.asarray(x) + 0.5, RHOT.mu) - p.b) / p.c


init = mh_sample(RHO0, 1000, seed=1)
ens = simulate_ensemble(hand_policy, init, SimConfig(n_paths=1000, dt=0.1, seed=2), p)
for t in (0, 50, 100, 150, 200):
    s, _ = snapshot(ens, t)
    print(f"t={t:3d}s  mean={s.mean():.3f}  std={s.std():.3f}")
# the parked well holds the ensemble at std ~ 1/sqrt(2a) = 0.22, twice rho_T's width,
# so a static feedback law reaches the right place but not the right shape
final, _ = snapshot(ens, 200.0)
xk = np.linspace(0, 6, 601)
print("KDE vs rho_T:", distance(kde(final, xk, bounds=(0, 6)), RHOT, grid=xk))

# %% the same policy through the finite-difference oracle
grid = make_grid(1201, 200.0, float(eval_diffusion(p.b, 0.0, p)), 0.9)
r0 = RHO0.pdf(grid.x)
times, hist = propagate(hand_policy, r0 / trapz_mass(r0, grid), grid, p)
print("oracle mass drift:", max(abs(trapz_mass(h, grid) - 1) for h in hist))
print("oracle vs rho_T:", compare(hist[-1], RHOT.pdf(grid.x), grid.x))
print("oracle vs Monte-Carlo KDE:", compare(np.interp(xk, grid.x, hist[-1]), kde(final, xk, bounds=(0, 6)), xk))
