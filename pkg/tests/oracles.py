"""Independent finite-difference oracles shared by the unit and acceptance tests."""
import numpy as np

from colloid_sb.landscape import eval_diffusion, eval_drift, eval_free_energy

# fourth-order central stencils on offsets -2..2
C1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
C2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
OFFSETS = np.arange(-2, 3)


def d1(f, x, h):
    return sum(c * f(x + k * h) for c, k in zip(C1, OFFSETS) if c) / h


def d2(f, x, h):
    return sum(c * f(x + k * h) for c, k in zip(C2, OFFSETS)) / h ** 2


def d11(f, x, u, h):
    """Mixed second derivative d2 f / dx du from the tensor product of first-derivative stencils."""
    out = 0.0
    for ci, i in zip(C1, OFFSETS):
        for cj, j in zip(C1, OFFSETS):
            if ci and cj:
                out = out + ci * cj * f(x + i * h, u + j * h)
    return out / h ** 2


def drift_from_definition(x, u, p, h=1e-6):
    """D1 = dD2/dx - D2/(k_B theta) dF/dx with both x-derivatives by central differences."""
    dD2 = (eval_diffusion(x + h, u, p) - eval_diffusion(x - h, u, p)) / (2 * h)
    dF = (eval_free_energy(x + h, u, p) - eval_free_energy(x - h, u, p)) / (2 * h)
    return dD2 - eval_diffusion(x, u, p) / (p.k_B * p.theta) * dF


def fd_partials(x, u, p, h=1e-3):
    """Every LandscapePartials field by fourth-order differences of drift/diffusion values."""
    D1 = lambda a, b: eval_drift(a, b, p)  # noqa: E731
    D2 = lambda a, b: eval_diffusion(a, b, p)  # noqa: E731
    return {
        "D1": D1(x, u), "D2": D2(x, u),
        "D1_x": d1(lambda a: D1(a, u), x, h),
        "D1_u": d1(lambda b: D1(x, b), u, h),
        "D2_x": d1(lambda a: D2(a, u), x, h),
        "D2_u": d1(lambda b: D2(x, b), u, h),
        "D2_xx": d2(lambda a: D2(a, u), x, h),
        "D2_uu": d2(lambda b: D2(x, b), u, h),
        "D2_xu": d11(D2, x, u, h),
    }


def rel_err_field(got, ref):
    """Relative error, floored at 1e-3 of the field's largest magnitude so isolated zeros do not blow up."""
    ref = np.asarray(ref, dtype=float)
    scale = np.max(np.abs(ref))
    return np.abs(np.asarray(got) - ref) / np.maximum(np.abs(ref), 1e-3 * scale)
