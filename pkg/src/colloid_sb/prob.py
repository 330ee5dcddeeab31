"""Endpoint densities, Metropolis-Hastings sampling, KDE and distribution distances."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class TruncNormSpec:
    mu: float
    sigma: float
    lo: float = 0.0
    hi: float = 6.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def _alpha(self):
        return (self.lo - self.mu) / self.sigma

    @property
    def _beta(self):
        return (self.hi - self.mu) / self.sigma

    @property
    def mass(self):
        """Untruncated normal mass inside [lo, hi]."""
        return ndtr(self._beta) - ndtr(self._alpha)

    def pdf(self, x):
        return truncnorm_pdf(x, self)

    def cdf(self, x):
        return truncnorm_cdf(x, self)

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        z = ndtri(ndtr(self._alpha) + q * self.mass)
        return np.clip(self.mu + self.sigma * z, self.lo, self.hi)

    def mean(self):
        a, b = self._alpha, self._beta
        phi = lambda z: np.exp(-0.5 * z * z) / SQRT_2PI  # noqa: E731
        return self.mu + self.sigma * (phi(a) - phi(b)) / self.mass


RHO0 = TruncNormSpec(mu=0.0, sigma=0.2)
RHOT = TruncNormSpec(mu=5.0, sigma=0.1)


def _check(spec):
    if not spec.sigma > 0:
        raise ValueError(f"sigma must be positive, got {spec.sigma}")


def truncnorm_pdf(x, spec: TruncNormSpec):
    _check(spec)
    x = np.asarray(x, dtype=float)
    z = (x - spec.mu) / spec.sigma
    dens = np.exp(-0.5 * z * z) / (SQRT_2PI * spec.sigma * spec.mass)
    return np.where((x >= spec.lo) & (x <= spec.hi), dens, 0.0)


def truncnorm_cdf(x, spec: TruncNormSpec):
    _check(spec)
    x = np.asarray(x, dtype=float)
    z = (np.clip(x, spec.lo, spec.hi) - spec.mu) / spec.sigma
    return np.clip((ndtr(z) - ndtr(spec._alpha)) / spec.mass, 0.0, 1.0)


def mh_sample(target, n, proposal_sigma=None, burn_in=1000, thin=10, seed=0, x_init=None,
              lo=None, hi=None, return_acceptance=False):
    """Random-walk Metropolis-Hastings draws from a 1-D density.

    ``target`` is either a TruncNormSpec or any callable density (unnormalised is fine,
    then ``lo``/``hi`` must be given). Proposals outside [lo, hi] have zero target
    density and are therefore rejected, not redrawn.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(target, TruncNormSpec):
        density = target.pdf
        lo = target.lo if lo is None else lo
        hi = target.hi if hi is None else hi
        start = target.mean() if x_init is None else x_init
    else:
        density = target
        if lo is None or hi is None:
            raise ValueError("lo and hi are required for a callable target")
        start = 0.5 * (lo + hi) if x_init is None else x_init
    if proposal_sigma is None:
        proposal_sigma = 0.1 * (hi - lo) / 6.0
    rng = np.random.default_rng(seed)

    total = burn_in + n * thin
    steps = rng.normal(0.0, proposal_sigma, size=total)
    logu = np.log(rng.uniform(size=total))
    x = float(start)
    px = float(density(x))
    out = np.empty(n)
    accepted = 0
    k = 0
    for i in range(total):
        y = x + steps[i]
        py = float(density(y)) if lo <= y <= hi else 0.0
        if py > 0.0 and (px <= 0.0 or logu[i] < np.log(py) - np.log(px)):
            x, px = y, py
            accepted += 1
        if i >= burn_in and (i - burn_in) % thin == thin - 1:
            out[k] = x
            k += 1
    if return_acceptance:
        return out, accepted / total
    return out


def silverman_bandwidth(samples):
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    std = samples.std(ddof=1) if n > 1 else 0.0
    iqr = np.subtract(*np.percentile(samples, [75, 25])) if n > 1 else 0.0
    spread = min(std, iqr / 1.349) if iqr > 0 else std
    if spread <= 0:
        spread = 1.0
    return 0.9 * spread * n ** (-0.2)


def kde(samples, grid, bandwidth=None, bounds=None):
    """Gaussian KDE (mean of kernels) evaluated on ``grid``; Silverman bandwidth by default.

    With ``bounds=(lo, hi)`` every kernel is reflected at both walls so the estimate keeps
    unit mass on [lo, hi] (no leakage past a boundary the samples cannot cross).
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size < 1:
        raise ValueError("kde needs at least one sample")
    h = silverman_bandwidth(samples) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    grid = np.asarray(grid, dtype=float)
    centres = [samples]
    if bounds is not None:
        lo, hi = bounds
        centres += [2 * lo - samples, 2 * hi - samples]
    out = np.zeros(grid.shape)
    for c in centres:
        # chunk over samples to bound memory
        for chunk in np.array_split(np.sort(c), max(1, c.size // 512)):
            z = (grid[..., None] - chunk) / h
            out += np.exp(-0.5 * z * z).sum(axis=-1)
    out /= samples.size * h * SQRT_2PI
    if bounds is not None:
        out = np.where((grid >= bounds[0]) & (grid <= bounds[1]), out, 0.0)
    return out


def _trapz_cumulative(y, x):
    out = np.zeros_like(y, dtype=float)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x))
    return out


def distance(data, spec: TruncNormSpec, grid=None, n_quad=20001):
    """Wasserstein-1 and Kolmogorov-Smirnov distances to a truncated normal.

    ``data`` is either a 1-D sample array, or a density on ``grid`` (pass ``grid``).
    For samples, W1 is the integral of |F_n - F| (equal to the quantile-coupling
    integral in 1-D) by trapezoid quadrature on a dense grid merged with the samples;
    KS is the exact sup-gap of the empirical CDF.
    """
    data = np.asarray(data, dtype=float).ravel()
    if data.size == 0:
        raise ValueError("distance needs a nonempty input")
    if grid is not None:
        grid = np.asarray(grid, dtype=float)
        if grid.shape != data.shape:
            raise ValueError("density and grid shapes differ")
        cdf = _trapz_cumulative(data, grid)
        cdf = cdf / cdf[-1] if cdf[-1] > 0 else cdf
        ref = truncnorm_cdf(grid, spec)
        gap = np.abs(cdf - ref)
        return {"wasserstein1": float(np.trapezoid(gap, grid)), "ks": float(gap.max())}

    xs = np.sort(data)
    n = xs.size
    lo = min(spec.lo, xs[0])
    hi = max(spec.hi, xs[-1])
    pts = np.union1d(np.linspace(lo, hi, n_quad), xs)
    # right-continuous ECDF evaluated just left of each knot gives the piecewise-constant
    # integrand on each interval [pts[i], pts[i+1])
    ecdf = np.searchsorted(xs, pts, side="right") / n
    ref = truncnorm_cdf(pts, spec)
    gap_left = np.abs(ecdf[:-1] - ref[:-1])
    gap_right = np.abs(ecdf[:-1] - ref[1:])
    w1 = float(np.sum(0.5 * (gap_left + gap_right) * np.diff(pts)))

    F = truncnorm_cdf(xs, spec)
    k = np.arange(1, n + 1)
    ks = float(max(np.max(k / n - F), np.max(F - (k - 1) / n)))
    return {"wasserstein1": w1, "ks": ks}


def write_density_csv(path, x, values, comment=None, header=("x", "value")):
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for a, b in zip(np.asarray(x), np.asarray(values)):
            w.writerow([repr(float(a)), repr(float(b))])


def write_samples_csv(path, samples, comment=None):
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow(("index", "sample"))
        for i, s in enumerate(np.asarray(samples)):
            w.writerow([i, repr(float(s))])
