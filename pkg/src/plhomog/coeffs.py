"""Coefficient model a = a_per + a_tilde and validation of the structural
assumptions: two-sided coercivity, periodicity of the background and
integrable decay of the defect.

Evaluators are plain vectorized callables; in dimension 1 they map arrays of
shape (...,) to values, in dimension d >= 2 arrays of shape (..., d).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .numutil import composite_rule, uniform_edges


class AssumptionViolated(Exception):
    """A structural assumption fails on the validation grid."""

    def __init__(self, details: str, report: "ValidationReport | None" = None):
        super().__init__(details)
        self.details = details
        self.report = report


@dataclass(frozen=True)
class PeriodicCoefficient:
    """1-periodic background coefficient with declared coercivity bound."""

    evaluator: Callable[[np.ndarray], np.ndarray]
    lam: float
    lipschitz: float = 0.0
    dim: int = 1
    name: str = "periodic"

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("coercivity bound lam must be positive")
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")

    def __call__(self, y):
        return self.evaluator(np.asarray(y, dtype=float))


@dataclass(frozen=True)
class DefectCoefficient:
    """Localized perturbation, integrable at infinity."""

    evaluator: Callable[[np.ndarray], np.ndarray]
    decay_radius: float
    lp_prime_norm_estimate: float = 0.0
    name: str = "defect"

    def __post_init__(self):
        if self.decay_radius <= 0:
            raise ValueError("decay_radius must be positive")

    def __call__(self, y):
        return self.evaluator(np.asarray(y, dtype=float))


@dataclass(frozen=True)
class Coefficient:
    """Full coefficient a = a_per + a_tilde with growth exponent p >= 2."""

    periodic: PeriodicCoefficient
    defect: DefectCoefficient | None
    p: float

    def __post_init__(self):
        if self.p < 2:
            raise ValueError(f"p = {self.p}: the solver requires p >= 2")

    @property
    def dim(self) -> int:
        return self.periodic.dim

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1.0)

    def without_defect(self) -> "Coefficient":
        return Coefficient(self.periodic, None, self.p)


def evaluate(c: Coefficient, y) -> np.ndarray:
    """a_per(y) + a_tilde(y); exactly a_per(y) when the defect is absent."""
    val = c.periodic(y)
    if c.defect is not None:
        val = val + c.defect(y)
    return val


@dataclass
class ValidationReport:
    a_min: float
    a_max: float
    per_min: float
    per_max: float
    periodicity_residual: float
    defect_tail: list[tuple[float, float]] = field(default_factory=list)
    lp_tail_increments: list[float] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def _grid(dim: int, resolution: int, lo: float = -0.5, hi: float = 0.5) -> np.ndarray:
    axes = [np.linspace(lo, hi, resolution) for _ in range(dim)]
    if dim == 1:
        return axes[0]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1)


def _shift(points: np.ndarray, axis: int, dim: int) -> np.ndarray:
    if dim == 1:
        return points + 1.0
    out = points.copy()
    out[..., axis] += 1.0
    return out


def validate(c: Coefficient, grid_resolution: int | None = None,
             periodicity_tol: float = 1e-12, tail_tol: float = 1e-6) -> ValidationReport:
    """Scan the coefficient on a uniform grid and check the assumptions.

    Raises AssumptionViolated as soon as a sampled value of a or a_per leaves
    the open interval (1/lam, lam).  Softer diagnostics (periodicity residual,
    defect tail monotonicity, convergence of the defect L^{p'} integral) are
    collected in the report's violation list.
    """
    dim = c.dim
    if grid_resolution is None:
        grid_resolution = 2 ** 10 if dim == 1 else 2 ** 7
    if grid_resolution < 2:
        raise ValueError("grid_resolution must be at least 2")
    lam = c.periodic.lam
    pts = _grid(dim, grid_resolution)
    per_vals = c.periodic(pts)
    residual = max(
        float(np.max(np.abs(c.periodic(_shift(pts, ax, dim)) - per_vals)))
        for ax in range(dim)
    )

    if c.defect is not None:
        half = max(1.0, c.defect.decay_radius) + 0.5
        full_pts = _grid(dim, grid_resolution, -half, half)
        a_vals = evaluate(c, full_pts)
    else:
        a_vals = per_vals

    report = ValidationReport(
        a_min=float(np.min(a_vals)), a_max=float(np.max(a_vals)),
        per_min=float(np.min(per_vals)), per_max=float(np.max(per_vals)),
        periodicity_residual=residual,
    )

    for label, lo, hi in (("a_per", report.per_min, report.per_max),
                          ("a", report.a_min, report.a_max)):
        if not (1.0 / lam < lo and hi < lam):
            msg = (f"{label} range [{lo:.6g}, {hi:.6g}] leaves the coercivity "
                   f"interval ({1.0 / lam:.6g}, {lam:.6g})")
            report.violations.append(msg)
            raise AssumptionViolated(msg, report)

    if residual > periodicity_tol:
        report.violations.append(
            f"periodicity residual {residual:.3g} exceeds {periodicity_tol:.3g}")

    if c.defect is not None:
        radii = c.defect.decay_radius * np.array([1.0, 1.5, 2.0, 3.0])
        tail = []
        for r in radii:
            box = _grid(dim, grid_resolution, -2.0 * r, 2.0 * r)
            dist = np.abs(box) if dim == 1 else np.linalg.norm(box, axis=-1)
            outside = np.abs(c.defect(box))[dist >= r]
            tail.append((float(r), float(np.max(outside)) if outside.size else 0.0))
        report.defect_tail = tail
        sup_values = [t[1] for t in tail]
        if any(b > a_ + 1e-14 for a_, b in zip(sup_values, sup_values[1:])):
            report.violations.append("defect tail is not nonincreasing in the radius")

        report.lp_tail_increments = _lp_tail_increments(c, grid_resolution)
        incs = report.lp_tail_increments
        if len(incs) >= 2 and not incs[-1] <= max(tail_tol, incs[0] * 1e-3):
            report.violations.append(
                "L^{p'} integral of the defect over expanding boxes does not converge")
    return report


def _lp_tail_increments(c: Coefficient, resolution: int) -> list[float]:
    """Cauchy increments of int |a_tilde|^{p'} over boxes of doubling size."""
    q = c.p_conj
    r0 = c.defect.decay_radius
    totals = []
    for k in range(4):
        half = r0 * 2.0 ** k
        if c.dim == 1:
            nodes, w = composite_rule(uniform_edges(-half, half, 2 * resolution), order=8)
            totals.append(float(w @ np.abs(c.defect(nodes)) ** q))
        else:
            n = 2 * resolution
            x, wx = composite_rule(uniform_edges(-half, half, n), order=4)
            pts = np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1)
            w2 = np.outer(wx, wx)
            totals.append(float(np.sum(w2 * np.abs(c.defect(pts)) ** q)))
    return [b - a for a, b in zip(totals, totals[1:])]


# ---------------------------------------------------------------------------
# catalog


def constant_coefficient(value: float, lam: float, dim: int = 1) -> PeriodicCoefficient:
    def ev(y):
        y = np.asarray(y, dtype=float)
        base = y if dim == 1 else y[..., 0]
        return np.full_like(base, value)
    return PeriodicCoefficient(ev, lam=lam, lipschitz=0.0, dim=dim,
                               name=f"constant({value})")


def cosine_coefficient(base: float, amplitude: float, lam: float,
                       dim: int = 1) -> PeriodicCoefficient:
    """base + amplitude * cos(2 pi y) in 1D, product of cosines per axis in 2D."""
    if dim == 1:
        def ev(y):
            return base + amplitude * np.cos(2 * np.pi * np.asarray(y, dtype=float))
    else:
        def ev(y):
            y = np.asarray(y, dtype=float)
            prod = np.ones(y.shape[:-1])
            for ax in range(dim):
                prod = prod * np.cos(2 * np.pi * y[..., ax])
            return base + amplitude * prod
    return PeriodicCoefficient(ev, lam=lam, lipschitz=2 * np.pi * abs(amplitude),
                               dim=dim, name=f"cosine({base},{amplitude})")


def laminate_coefficient(base: float, amplitude: float, lam: float,
                         dim: int = 2) -> PeriodicCoefficient:
    """a(x) = base + amplitude * cos(2 pi x_1): varies along the first axis only."""
    def ev(y):
        y = np.asarray(y, dtype=float)
        first = y if dim == 1 else y[..., 0]
        return base + amplitude * np.cos(2 * np.pi * first)
    return PeriodicCoefficient(ev, lam=lam, lipschitz=2 * np.pi * abs(amplitude),
                               dim=dim, name=f"laminate({base},{amplitude})")


def exponential_defect(amplitude: float, rate: float = 1.0, dim: int = 1,
                       tail_bound: float = 1e-7) -> DefectCoefficient:
    """amplitude * exp(-rate |y|)."""
    def ev(y):
        y = np.asarray(y, dtype=float)
        dist = np.abs(y) if dim == 1 else np.linalg.norm(y, axis=-1)
        return amplitude * np.exp(-rate * dist)
    radius = max(1.0, np.log(max(abs(amplitude), 1.0) / tail_bound) / rate)
    return DefectCoefficient(ev, decay_radius=radius,
                             name=f"exponential({amplitude},{rate})")


def gaussian_defect(amplitude: float, rate: float = 1.0, dim: int = 1,
                    tail_bound: float = 1e-7) -> DefectCoefficient:
    """amplitude * exp(-rate |y|^2)."""
    def ev(y):
        y = np.asarray(y, dtype=float)
        d2 = y * y if dim == 1 else np.sum(y * y, axis=-1)
        return amplitude * np.exp(-rate * d2)
    radius = max(1.0, np.sqrt(np.log(max(abs(amplitude), 1.0) / tail_bound) / rate))
    return DefectCoefficient(ev, decay_radius=radius,
                             name=f"gaussian({amplitude},{rate})")


def tabulated_coefficient(values: np.ndarray, lam: float) -> PeriodicCoefficient:
    """Periodic multilinear interpolation of nodal values on the unit cell.

    `values` has shape (n,) in 1D or (n, n) in 2D, sampled at the lattice
    y_i = -1/2 + i/n.
    """
    values = np.asarray(values, dtype=float)
    dim = values.ndim
    n = values.shape[0]
    if dim not in (1, 2) or any(s != n for s in values.shape):
        raise ValueError("tabulated values must be (n,) or (n, n)")

    if dim == 1:
        def ev(y):
            t = (np.asarray(y, dtype=float) + 0.5) * n
            i0 = np.floor(t).astype(int)
            frac = t - i0
            i0 = np.mod(i0, n)
            return (1 - frac) * values[i0] + frac * values[(i0 + 1) % n]
    else:
        def ev(y):
            y = np.asarray(y, dtype=float)
            t = (y + 0.5) * n
            i0 = np.floor(t).astype(int)
            frac = t - i0
            i0 = np.mod(i0, n)
            i1 = (i0 + 1) % n
            fx, fy = frac[..., 0], frac[..., 1]
            v00 = values[i0[..., 0], i0[..., 1]]
            v10 = values[i1[..., 0], i0[..., 1]]
            v01 = values[i0[..., 0], i1[..., 1]]
            v11 = values[i1[..., 0], i1[..., 1]]
            return ((1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10
                    + (1 - fx) * fy * v01 + fx * fy * v11)

    grad = float(np.max(np.abs(np.diff(values, axis=0)))) * n
    return PeriodicCoefficient(ev, lam=lam, lipschitz=grad, dim=dim,
                               name=f"tabulated(n={n},d={dim})")


def read_tabulated(path, lam: float) -> PeriodicCoefficient:
    """Load a tabulated grid file: header `d n`, then n^d row-major values."""
    with open(path) as fh:
        tokens = fh.read().split()
    d, n = int(tokens[0]), int(tokens[1])
    vals = np.array([float(t) for t in tokens[2:2 + n ** d]])
    if vals.size != n ** d:
        raise ValueError(f"expected {n ** d} values in {path}, found {vals.size}")
    return tabulated_coefficient(vals.reshape((n,) * d), lam=lam)


def write_tabulated(path, values: np.ndarray) -> None:
    values = np.asarray(values, dtype=float)
    with open(path, "w") as fh:
        fh.write(f"{values.ndim} {values.shape[0]}\n")
        for row in np.atleast_2d(values.reshape(values.shape[0], -1)):
            fh.write(" ".join(repr(v) for v in row) + "\n")
