"""Exact one-dimensional pipeline: oscillating solution through the flux
constant, closed-form correctors, homogenized coefficient and two-scale
remainder norms.

The oscillating gradient is u' = ((-F + C)/a(./eps))^{1/(p-1)} with the
signed fractional power; the constant C is the unique root of the zero-mean
condition on (-1/2, 1/2), located by bisection (the integrand is monotone in
C but not differentiable where -F + C crosses zero, so derivative-based root
finders are avoided).
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .coeffs import Coefficient, PeriodicCoefficient
from .numutil import (composite_rule, cumulative_from_zero, gauss_legendre,
                      signed_power, uniform_edges)

DOMAIN = (-0.5, 0.5)


class BracketFailure(RuntimeError):
    """Quadrature of the zero-mean function has wrong signs at the bracket."""


class RegularityWarning(UserWarning):
    """Numerically estimated second derivative shows step dependence."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite Gauss-Legendre rule resolving the oscillation scale."""

    order: int = 8
    cells_per_period: int = 64
    min_cells: int = 64

    def n_cells(self, epsilon: float) -> int:
        # even count so that 0 is always a cell edge (defect kink)
        n = 2 * int(np.ceil(self.cells_per_period / (2.0 * epsilon)))
        return max(self.min_cells, n)


@dataclass(frozen=True)
class Rhs1D:
    """Right-hand side with optional closed-form antiderivative.

    `antiderivative` is F(x) = int_{-1/2}^x f when available in closed form;
    otherwise it is built numerically.  `f` may be None for purely tabulated
    data, in which case second derivatives fall back to centered differences.
    """

    f: Callable[[np.ndarray], np.ndarray] | None
    antiderivative: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = "rhs"


def rhs_zero() -> Rhs1D:
    return Rhs1D(lambda x: np.zeros_like(np.asarray(x, dtype=float)),
                 lambda x: np.zeros_like(np.asarray(x, dtype=float)), "zero")


def rhs_constant(value: float) -> Rhs1D:
    return Rhs1D(lambda x: np.full_like(np.asarray(x, dtype=float), value),
                 lambda x: value * (np.asarray(x, dtype=float) + 0.5),
                 f"constant({value})")


def rhs_linear(slope: float = 2.0) -> Rhs1D:
    """f(x) = slope * x, the workhorse right-hand side of the experiments."""
    return Rhs1D(lambda x: slope * np.asarray(x, dtype=float),
                 lambda x: 0.5 * slope * (np.asarray(x, dtype=float) ** 2 - 0.25),
                 f"linear({slope})")


def rhs_sine(amplitude: float = 1.0, frequency: float = 1.0) -> Rhs1D:
    w = np.pi * frequency

    def f(x):
        return amplitude * np.sin(w * np.asarray(x, dtype=float))

    def F(x):
        x = np.asarray(x, dtype=float)
        return amplitude / w * (np.cos(-0.5 * w) - np.cos(w * x))

    return Rhs1D(f, F, f"sine({amplitude},{frequency})")


RHS_CATALOG = {
    "zero": lambda params: rhs_zero(),
    "constant": lambda params: rhs_constant(*params),
    "linear": lambda params: rhs_linear(*params),
    "sine": lambda params: rhs_sine(*params),
}


@dataclass(frozen=True)
class Problem1D:
    coefficient: Coefficient
    rhs: Rhs1D
    epsilon: float
    p: float
    quadrature: QuadratureSpec = QuadratureSpec()

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in (0, 1]")
        if self.coefficient.dim != 1:
            raise ValueError("Problem1D requires a one-dimensional coefficient")
        if self.p != self.coefficient.p:
            raise ValueError("problem exponent and coefficient exponent disagree")

    def with_epsilon(self, epsilon: float) -> "Problem1D":
        return Problem1D(self.coefficient, self.rhs, epsilon, self.p, self.quadrature)


def antiderivative(rhs: Rhs1D | Callable, quadrature: QuadratureSpec = QuadratureSpec(),
                   n_cells: int = 4096) -> Callable[[np.ndarray], np.ndarray]:
    """F(x) = int_{-1/2}^x f with F(-1/2) = 0, exact for catalog data.

    For a bare callable the primitive is assembled from per-cell Gauss
    integrals plus a partial-cell correction, accurate to quadrature order.
    """
    if isinstance(rhs, Rhs1D) and rhs.antiderivative is not None:
        return rhs.antiderivative
    f = rhs.f if isinstance(rhs, Rhs1D) else rhs
    edges = uniform_edges(*DOMAIN, n_cells)
    gx, gw = gauss_legendre(quadrature.order)
    h = np.diff(edges)
    mids = edges[:-1] + 0.5 * h
    nodes = mids[:, None] + np.outer(0.5 * h, gx)
    cell_ints = (np.asarray(f(nodes)) * gw).sum(axis=1) * (0.5 * h)
    prefix = np.concatenate([[0.0], np.cumsum(cell_ints)])

    def F(x):
        x = np.asarray(x, dtype=float)
        xi = np.clip(x, *DOMAIN)
        idx = np.clip(np.searchsorted(edges, xi, side="right") - 1, 0, n_cells - 1)
        lo = edges[idx]
        half = 0.5 * (xi - lo)
        pnodes = (lo + half)[..., None] + half[..., None] * gx
        partial = (np.asarray(f(pnodes)) * gw).sum(axis=-1) * half
        return prefix[idx] + partial

    return F


@dataclass
class FluxSolution1D:
    """Oscillating gradient determined by the flux constant."""

    c_eps: float
    antiderivative: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    p: float
    epsilon: float
    zero_mean_residual: float
    bisection_width: float

    def primitive(self, xs: np.ndarray) -> np.ndarray:
        """u(x) = int_{-1/2}^x u' at sorted points, so u(-1/2) = 0."""
        vals = cumulative_from_zero(self.grad, np.asarray(xs, dtype=float))
        anchor = cumulative_from_zero(self.grad, np.array([DOMAIN[0]]))[0]
        return vals - anchor


def _problem_grid(prob: Problem1D, extra_edges=()):
    n = prob.quadrature.n_cells(prob.epsilon)
    edges = uniform_edges(*DOMAIN, n)
    if len(extra_edges):
        edges = np.unique(np.concatenate([edges, np.asarray(extra_edges, dtype=float)]))
    nodes, wts = composite_rule(edges, prob.quadrature.order)
    return edges, nodes, wts


def _solve_constant(f_vals: np.ndarray, a_vals: np.ndarray, weights: np.ndarray,
                    p: float, bracket=None, tol: float = 1e-13):
    """Root of C -> sum w * ((C - F)/a)^{1/(p-1)} by bisection plus one secant."""
    alpha = 1.0 / (p - 1.0)

    def G(c):
        return float(weights @ signed_power((c - f_vals) / a_vals, alpha))

    if bracket is None:
        lo = float(np.min(f_vals))
        hi = float(np.max(f_vals))
    else:
        lo, hi = bracket
    if lo == hi:
        return lo, 0.0, abs(G(lo))
    pad = 1e-12 * max(1.0, abs(lo), abs(hi))
    lo, hi = lo - pad, hi + pad
    g_lo, g_hi = G(lo), G(hi)
    if g_lo > 0 or g_hi < 0:
        raise BracketFailure(
            f"G({lo}) = {g_lo}, G({hi}) = {g_hi}: wrong signs, quadrature too coarse")
    width_target = tol * max(1.0, abs(lo), abs(hi))
    while hi - lo > width_target:
        mid = 0.5 * (lo + hi)
        if G(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    g_lo, g_hi = G(lo), G(hi)
    c = lo if abs(g_lo) <= abs(g_hi) else hi
    if g_hi != g_lo:
        secant = lo - g_lo * (hi - lo) / (g_hi - g_lo)
        if lo <= secant <= hi and abs(G(secant)) < abs(G(c)):
            c = secant
    return c, hi - lo, abs(G(c))


def solve_flux_constant(prob: Problem1D) -> FluxSolution1D:
    """Solve for the flux constant of the oscillating problem."""
    from .coeffs import evaluate

    F = antiderivative(prob.rhs, prob.quadrature)
    _, nodes, wts = _problem_grid(prob)
    f_vals = np.asarray(F(nodes), dtype=float)
    a_vals = evaluate(prob.coefficient, nodes / prob.epsilon)
    c_eps, width, residual = _solve_constant(f_vals, a_vals, wts, prob.p)
    alpha = 1.0 / (prob.p - 1.0)

    def grad(x):
        x = np.asarray(x, dtype=float)
        return signed_power((c_eps - F(x)) / evaluate(prob.coefficient, x / prob.epsilon),
                            alpha)

    return FluxSolution1D(c_eps, F, grad, prob.p, prob.epsilon, residual, width)


def homogenized_coefficient_1d(a_per: PeriodicCoefficient, p: float,
                               quadrature: QuadratureSpec = QuadratureSpec(),
                               n_cells: int = 2048) -> float:
    """a* = (int_Q a_per^{-1/(p-1)})^{-(p-1)}, the p-harmonic cell mean."""
    alpha = 1.0 / (p - 1.0)
    nodes, wts = composite_rule(uniform_edges(*DOMAIN, n_cells), quadrature.order)
    return float((wts @ a_per(nodes) ** (-alpha)) ** (-(p - 1.0)))


@dataclass
class Corrector1D:
    """Closed-form unit-cell corrector gradient, periodic or with defect."""

    xi: float
    kind: str                  # "periodic" | "full"
    a_star: float
    coefficient: Coefficient
    grad: Callable[[np.ndarray], np.ndarray] = field(repr=False, default=None)

    def primitive(self, ys: np.ndarray) -> np.ndarray:
        """Corrector values at sorted points, normalized to vanish at 0."""
        return cumulative_from_zero(self.grad, np.asarray(ys, dtype=float))


def corrector_1d(xi: float, c: Coefficient, kind: str = "periodic",
                 a_star: float | None = None,
                 quadrature: QuadratureSpec = QuadratureSpec()) -> Corrector1D:
    """Gradient of the corrector in direction xi: xi (a*/a_kind)^{1/(p-1)} - xi."""
    from .coeffs import evaluate

    if kind not in ("periodic", "full"):
        raise ValueError("kind must be 'periodic' or 'full'")
    if a_star is None:
        a_star = homogenized_coefficient_1d(c.periodic, c.p, quadrature)
    alpha = 1.0 / (c.p - 1.0)
    if kind == "periodic" or c.defect is None:
        a_field = c.periodic
    else:
        a_field = lambda y: evaluate(c, y)  # noqa: E731

    def grad(y):
        return xi * ((a_star / a_field(np.asarray(y, dtype=float))) ** alpha - 1.0)

    return Corrector1D(xi, kind, a_star, c, grad)


def solve_homogenized_1d(rhs: Rhs1D, a_star: float, p: float,
                         quadrature: QuadratureSpec = QuadratureSpec(),
                         n_cells: int = 4096) -> FluxSolution1D:
    """Flux-constant solve for the constant-coefficient effective problem."""
    if a_star <= 0:
        raise ValueError("a_star must be positive")
    F = antiderivative(rhs, quadrature)
    nodes, wts = composite_rule(uniform_edges(*DOMAIN, n_cells), quadrature.order)
    f_vals = np.asarray(F(nodes), dtype=float)
    # a positive constant scales out of the sign condition; solve with a = 1
    c_star, width, residual = _solve_constant(f_vals, np.ones_like(f_vals), wts, p)
    alpha = 1.0 / (p - 1.0)

    def grad(x):
        return signed_power((c_star - F(np.asarray(x, dtype=float))) / a_star, alpha)

    return FluxSolution1D(c_star, F, grad, p, 0.0, residual, width)


def find_sign_changes(fun, edges: np.ndarray, refine: int = 80) -> np.ndarray:
    """Roots of a continuous function located by scanning edges + bisection."""
    vals = np.asarray(fun(edges), dtype=float)
    roots = list(edges[vals == 0.0])
    idx = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    for i in idx:
        lo, hi = edges[i], edges[i + 1]
        flo = vals[i]
        for _ in range(refine):
            mid = 0.5 * (lo + hi)
            fmid = float(fun(np.array([mid]))[0])
            if fmid == 0.0:
                lo = hi = mid
                break
            if np.sign(fmid) == np.sign(flo):
                lo = mid
                flo = fmid
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))
    return np.array(sorted(roots))


@dataclass
class RemainderReport:
    """Norms of the gradient-level two-scale remainder for one epsilon."""

    eps: float
    kind: str
    linf: float
    l2: float
    c_eps: float
    c_star: float
    a_star: float
    n_cells: int
    excluded_measure: float = 0.0
    include_corrector_curvature: bool = False
    warnings: list[str] = field(default_factory=list)
    profile: dict | None = None


class _RemainderWork:
    """Shared per-problem state for remainder evaluation across kinds."""

    #: cells whose distance to a degenerate point of (u*)'' is below this
    #: multiple of the cell width are excluded when the curvature term is on
    EXCLUSION_MULTIPLE = 1.0

    def __init__(self, prob: Problem1D):
        from .coeffs import evaluate

        self.prob = prob
        self.alpha = 1.0 / (prob.p - 1.0)
        self.a_star = homogenized_coefficient_1d(prob.coefficient.periodic, prob.p,
                                                 prob.quadrature)
        self.F = antiderivative(prob.rhs, prob.quadrature)
        star = solve_homogenized_1d(prob.rhs, self.a_star, prob.p, prob.quadrature)
        self.c_star = star.c_eps
        base_edges = uniform_edges(*DOMAIN, prob.quadrature.n_cells(prob.epsilon))
        self.h = base_edges[1] - base_edges[0]
        self.roots = find_sign_changes(lambda x: self.c_star - np.asarray(self.F(x)),
                                       base_edges)
        edges = np.unique(np.concatenate([base_edges, self.roots])) \
            if self.roots.size else base_edges
        self.edges = edges
        self.nodes, self.wts = composite_rule(edges, prob.quadrature.order)
        self.f_vals = np.asarray(self.F(self.nodes), dtype=float)
        self.a_full = evaluate(prob.coefficient, self.nodes / prob.epsilon)
        self.a_per = prob.coefficient.periodic(self.nodes / prob.epsilon)
        self.c_eps, _, self.zero_mean_residual = _solve_constant(
            self.f_vals, self.a_full, self.wts, prob.p)
        self.grad_u_eps = signed_power((self.c_eps - self.f_vals) / self.a_full,
                                       self.alpha)

    def _keep_mask(self):
        if not self.roots.size:
            return np.ones_like(self.nodes, dtype=bool), 0.0
        radius = self.EXCLUSION_MULTIPLE * self.h
        lo, hi = self.edges[:-1], self.edges[1:]
        cell_dist = np.min(
            np.maximum(self.roots[None, :] - hi[:, None],
                       lo[:, None] - self.roots[None, :]), axis=1)
        cell_keep = cell_dist > radius
        keep = np.repeat(cell_keep, self.prob.quadrature.order)
        excluded = float(np.sum((hi - lo)[~cell_keep]))
        return keep, excluded

    def _u_star_curvature(self):
        """(u*)'' by the chain rule when f is available, else centered differences."""
        z = (self.c_star - self.f_vals) / self.a_star
        if self.prob.rhs.f is not None:
            fv = np.asarray(self.prob.rhs.f(self.nodes), dtype=float)
            with np.errstate(divide="ignore", over="ignore"):
                return self.alpha * np.abs(z) ** (self.alpha - 1.0) * (-fv / self.a_star)
        step = self.h
        estimates = []
        for s in (step, 0.5 * step):
            up = signed_power((self.c_star - np.asarray(self.F(self.nodes + s))) / self.a_star,
                              self.alpha)
            dn = signed_power((self.c_star - np.asarray(self.F(self.nodes - s))) / self.a_star,
                              self.alpha)
            estimates.append((up - dn) / (2.0 * s))
        scale = np.max(np.abs(estimates[1])) + 1e-300
        if np.max(np.abs(estimates[1] - estimates[0])) > 1e-3 * scale:
            warnings.warn("centered-difference (u*)'' is step dependent",
                          RegularityWarning)
        return estimates[1]

    def norms(self, kind: str, include_corrector_curvature: bool = False,
              keep_profile: bool = False) -> RemainderReport:
        prob = self.prob
        a_kind = self.a_full if kind == "full" else self.a_per
        two_scale = signed_power((self.c_star - self.f_vals) / a_kind, self.alpha)
        remainder = self.grad_u_eps - two_scale
        excluded = 0.0
        keep = np.ones_like(self.nodes, dtype=bool)
        if include_corrector_curvature:
            corr = corrector_1d(1.0, prob.coefficient, kind, a_star=self.a_star,
                                quadrature=prob.quadrature)
            w_vals = corr.primitive(self.nodes / prob.epsilon)
            remainder = remainder - prob.epsilon * w_vals * self._u_star_curvature()
            keep, excluded = self._keep_mask()
        linf = float(np.max(np.abs(remainder[keep])))
        l2 = float(np.sqrt(np.sum(self.wts[keep] * remainder[keep] ** 2)))
        report = RemainderReport(
            eps=prob.epsilon, kind=kind, linf=linf, l2=l2,
            c_eps=self.c_eps, c_star=self.c_star, a_star=self.a_star,
            n_cells=self.edges.size - 1, excluded_measure=excluded,
            include_corrector_curvature=include_corrector_curvature)
        if keep_profile:
            stride = max(1, self.nodes.size // 4000)
            report.profile = {
                "x": self.nodes[::stride].copy(),
                "grad_u_eps": self.grad_u_eps[::stride].copy(),
                "two_scale": two_scale[::stride].copy(),
                "remainder": remainder[::stride].copy(),
            }
        return report


def remainder_norms(prob: Problem1D, kind: str = "full",
                    include_corrector_curvature: bool = False,
                    keep_profile: bool = False) -> RemainderReport:
    """L^2 and L^infty norms of the gradient-level two-scale remainder.

    The default remainder is u_eps' - (u*)'(1 + w'(./eps)) with the unit
    corrector w of the requested kind, the quantity the reference tables
    tabulate.  With `include_corrector_curvature` the second-order term
    eps w(./eps)(u*)'' is subtracted as well; the quadrature cells adjacent
    to the degenerate points of (u*)'' (where -F + C* vanishes and the
    chain-rule expression blows up) are then excluded from both norms and
    their measure is reported.
    """
    if kind not in ("periodic", "full"):
        raise ValueError("kind must be 'periodic' or 'full'")
    return _RemainderWork(prob).norms(kind, include_corrector_curvature, keep_profile)


@dataclass
class SweepRow:
    eps: float
    r_per_linf: float
    r_linf: float
    r_per_l2: float
    r_l2: float
    c_eps: float
    c_star: float


SWEEP_COLUMNS = ("eps", "R_per_Linf", "R_Linf", "R_per_L2", "R_L2", "C_eps", "C_star")


def _sweep_one(prob: Problem1D, include_corrector_curvature: bool) -> SweepRow:
    work = _RemainderWork(prob)
    per = work.norms("periodic", include_corrector_curvature)
    full = work.norms("full", include_corrector_curvature)
    return SweepRow(prob.epsilon, per.linf, full.linf, per.l2, full.l2,
                    work.c_eps, work.c_star)


def table_sweep(prob_template: Problem1D, eps_list,
                include_corrector_curvature: bool = False) -> list[SweepRow]:
    """One remainder row per epsilon, both corrector kinds side by side."""
    eps_list = list(eps_list)
    if not eps_list:
        raise ValueError("eps_list must be nonempty")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    problems = [prob_template.with_epsilon(e) for e in eps_list]
    n_threads = int(os.environ.get("PLHOMOG_THREADS", "1"))
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            rows = list(pool.map(
                lambda pr: _sweep_one(pr, include_corrector_curvature), problems))
    else:
        rows = [_sweep_one(pr, include_corrector_curvature) for pr in problems]
    return rows
