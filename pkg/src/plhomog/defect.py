"""Non-periodic corrector on a truncated domain.

The additional corrector driven by the defect minimizes the convex
functional built from the convexity gap of the corrected field plus the
defect flux term.  The computational domain is the box [-R, R]^d; the
minimization is unconstrained up to grounding a single node, which leaves
the discrete flux free at the boundary (the decaying gradient is the
quantity of interest and a Dirichlet clamp would inject an O(1/R) uniform
bias into it).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.fft
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .coeffs import Coefficient, evaluate
from .numutil import signed_power_vec
from .optim import minimize_convex

DEFAULT_TOL = 1e-9


class TruncationWarning(UserWarning):
    """Boundary-layer share of the solution energy is suspiciously large."""


@dataclass(frozen=True)
class TruncatedDomain:
    """Box [-R, R]^d with a uniform lattice; boundary left natural."""

    dim: int
    half_width: float
    cells_per_unit: int = 64

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("defect solves support dim 1 and 2")
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")
        if self.cells_per_unit < 16:
            raise ValueError("need at least 16 cells per unit period")

    @property
    def n_cells(self) -> int:
        return 2 * int(np.ceil(self.half_width * self.cells_per_unit))

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n_cells

    @property
    def n_nodes(self) -> int:
        return (self.n_cells + 1) ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    def node_shape(self) -> tuple:
        return (self.n_cells + 1,) * self.dim

    def midpoints(self) -> np.ndarray:
        axis = -self.half_width + (np.arange(self.n_cells) + 0.5) * self.spacing
        if self.dim == 1:
            return axis
        gx, gy = np.meshgrid(axis, axis, indexing="ij")
        return np.stack([gx, gy], axis=-1)


def box_gradient(values: np.ndarray, domain: TruncatedDomain) -> np.ndarray:
    d = domain.spacing
    if domain.dim == 1:
        return ((values[1:] - values[:-1]) / d)[:, None]
    g1 = (values[1:, :-1] - values[:-1, :-1]) / d
    g2 = (values[:-1, 1:] - values[:-1, :-1]) / d
    return np.stack([g1, g2], axis=-1)


def box_gradient_adjoint(flux: np.ndarray, domain: TruncatedDomain) -> np.ndarray:
    d = domain.spacing
    out = np.zeros(domain.node_shape())
    if domain.dim == 1:
        q = flux[:, 0] / d
        np.add.at(out, np.s_[1:], q)
        np.add.at(out, np.s_[:-1], -q)
        return out
    q1 = flux[..., 0] / d
    q2 = flux[..., 1] / d
    out[1:, :-1] += q1
    out[:-1, :-1] -= q1
    out[:-1, 1:] += q2
    out[:-1, :-1] -= q2
    return out


def as_periodic_gradient(source, dim: int):
    """Normalize a periodic-gradient provider to a callable y -> (..., dim).

    Accepts a CellSolve (piecewise-constant periodic extension of the
    discrete gradient), a 1D closed-form corrector, or a bare callable.
    """
    from .cell import CellSolve
    from .oned import Corrector1D

    if isinstance(source, CellSolve):
        n = source.grid.n
        grad = source.grad_field

        def lookup(y):
            y = np.asarray(y, dtype=float)
            pts = y[..., None] if dim == 1 else y
            idx = np.mod(np.floor((pts + 0.5) * n).astype(int), n)
            if dim == 1:
                return grad[idx[..., 0]]
            return grad[idx[..., 0], idx[..., 1]]

        return lookup
    if isinstance(source, Corrector1D):
        if dim != 1:
            raise ValueError("closed-form correctors are one-dimensional")

        def closed(y):
            y = np.asarray(y, dtype=float)
            return (source.xi + source.grad(y))[..., None]

        return closed
    if callable(source):
        return source
    raise TypeError(f"cannot interpret {type(source)!r} as a periodic gradient")


def default_periodic_gradient(xi, c: Coefficient):
    """Closed-form corrected field for 1D coefficients."""
    from .oned import corrector_1d

    xi_val = float(np.atleast_1d(np.asarray(xi, dtype=float))[0])
    return as_periodic_gradient(corrector_1d(xi_val, c, "periodic"), 1)


def assemble_rhs(xi, c: Coefficient, cell, domain: TruncatedDomain) -> np.ndarray:
    """Defect flux h = a_tilde (xi + grad w_per)|xi + grad w_per|^{p-2} per cell."""
    mids = domain.midpoints()
    u = _corrected_field(xi, c, cell, domain)
    if c.defect is None:
        return np.zeros_like(u)
    return np.asarray(c.defect(mids), dtype=float)[..., None] * \
        signed_power_vec(u, c.p - 2.0)


def _corrected_field(xi, c: Coefficient, cell, domain: TruncatedDomain) -> np.ndarray:
    if cell is None:
        if c.dim != 1:
            raise ValueError("a periodic-gradient provider is required in 2D")
        cell = default_periodic_gradient(xi, c)
    pg = as_periodic_gradient(cell, c.dim)
    return np.asarray(pg(domain.midpoints()), dtype=float)


def _gap_terms(u, g, a_mid, p):
    """a * (|u+g|^p - |u|^p - p u|u|^{p-2}.g) per cell and its g-derivative."""
    z = u + g
    mag_z = np.linalg.norm(z, axis=-1)
    mag_u = np.linalg.norm(u, axis=-1)
    slope = signed_power_vec(u, p - 2.0)
    gap = mag_z ** p - mag_u ** p - p * np.sum(slope * g, axis=-1)
    dgap = p * (signed_power_vec(z, p - 2.0) - slope)
    return a_mid * gap, a_mid[..., None] * dgap


@dataclass
class DefectField:
    """Nodal defect corrector with the per-cell weight of its energy space."""

    domain: TruncatedDomain
    values: np.ndarray
    weight: np.ndarray           # |xi + grad w_per|^{p-2} per cell


@dataclass
class AnnulusRow:
    index: int
    inner: float
    outer: float
    lp_integral: float
    lp_prime_integral: float
    weighted_l2_integral: float
    partial: bool


@dataclass
class DefectNorms:
    lp_grad: float
    weighted_l2: float
    lp_prime: float
    annuli: list[AnnulusRow]
    truncation_share: float

    @property
    def wu_total(self) -> float:
        return self.lp_grad + self.weighted_l2


@dataclass
class DefectSolve:
    xi: np.ndarray
    field: DefectField
    rhs: np.ndarray
    energy: float
    residual: float
    iterations: int
    norms: DefectNorms
    p: float
    energy_trace: list[float] = field(default_factory=list, repr=False)
    warnings: list[str] = field(default_factory=list)

    @property
    def grad(self) -> np.ndarray:
        return box_gradient(self.field.values, self.field.domain)


def _annulus_index(mids_inf: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        k = np.ceil(np.log2(np.maximum(mids_inf, 1e-300))) + 1
    return np.maximum(k, 0).astype(int)


def compute_norms(grad: np.ndarray, weight: np.ndarray, domain: TruncatedDomain,
                  p: float) -> DefectNorms:
    vol = domain.cell_volume
    q = p / (p - 1.0)
    mag = np.linalg.norm(grad, axis=-1)
    mids = domain.midpoints()
    mids_inf = np.abs(mids) if domain.dim == 1 else np.max(np.abs(mids), axis=-1)
    idx = _annulus_index(mids_inf)
    rows = []
    for k in range(int(idx.max()) + 1):
        mask = idx == k
        inner = 0.0 if k == 0 else 2.0 ** (k - 2)
        outer = 2.0 ** (k - 1)
        rows.append(AnnulusRow(
            k, inner, outer,
            float(vol * np.sum(mag[mask] ** p)),
            float(vol * np.sum(mag[mask] ** q)),
            float(vol * np.sum(weight[mask] * mag[mask] ** 2)),
            partial=outer > domain.half_width))
    total_p = sum(r.lp_integral for r in rows)
    share = rows[-1].lp_integral / total_p if rows and total_p > 0 else 0.0
    return DefectNorms(
        lp_grad=float(total_p ** (1.0 / p)),
        weighted_l2=float(np.sqrt(vol * np.sum(weight * mag ** 2))),
        lp_prime=float((vol * np.sum(mag ** q)) ** (1.0 / q)),
        annuli=rows, truncation_share=float(share))


def defect_energy(xi, v: np.ndarray | DefectField, c: Coefficient, cell,
                  domain: TruncatedDomain | None = None,
                  rhs: np.ndarray | None = None) -> float:
    """Discrete defect functional; zero at v = 0 and strictly convex in grad v."""
    if isinstance(v, DefectField):
        domain, values = v.domain, v.values
    else:
        values = np.asarray(v, dtype=float)
    u = _corrected_field(xi, c, cell, domain)
    if rhs is None:
        rhs = assemble_rhs(xi, c, cell, domain)
    a_mid = np.asarray(evaluate(c, domain.midpoints()), dtype=float)
    g = box_gradient(values, domain)
    gap, _ = _gap_terms(u, g, a_mid, c.p)
    return float(domain.cell_volume *
                 (np.sum(gap) / c.p + np.sum(rhs * g)))


def _make_box_precond(domain: TruncatedDomain, magnitude: float):
    m = domain.n_cells + 1
    k = np.arange(m)
    lam = 4.0 * np.sin(np.pi * k / (2.0 * m)) ** 2 / domain.spacing ** 2
    if domain.dim == 1:
        symbol = lam
    else:
        symbol = lam[:, None] + lam[None, :]
    symbol = symbol * (domain.cell_volume * magnitude)
    inv = np.zeros_like(symbol)
    inv[symbol > 0] = 1.0 / symbol[symbol > 0]
    axes = tuple(range(domain.dim))

    def precond(g):
        spec = scipy.fft.dctn(g, type=2, norm="ortho", axes=axes)
        return scipy.fft.idctn(spec * inv, type=2, norm="ortho", axes=axes)

    return precond


def _box_newton_factory(domain: TruncatedDomain, u, a_mid, p, xi_mag):
    from .cell import _hessian_weights

    d = domain.spacing
    vol = domain.cell_volume
    n = domain.n_cells

    def newton_solve(v, g_nodal):
        z = u + box_gradient(v, domain)
        weights = _hessian_weights(z, a_mid, p, max(xi_mag, 1.0))
        if weights is None:
            return None
        if domain.dim == 1:
            m = vol * weights[:, 0, 0] / d ** 2
            main = np.zeros(n + 1)
            main[:-1] += m
            main[1:] += m
            H = sp.diags([main, -m, -m], [0, 1, -1], format="csr")
        else:
            gmap = np.array([[-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]]) / d
            local = vol * np.einsum("ai,...ab,bj->...ij", gmap, weights, gmap)
            nn = n + 1
            ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
            node = (ii * nn + jj).ravel()
            right = ((ii + 1) * nn + jj).ravel()
            up = (ii * nn + jj + 1).ravel()
            stencil = np.stack([node, right, up], axis=1)
            rows = np.repeat(stencil, 3, axis=1).ravel()
            cols = np.tile(stencil, (1, 3)).ravel()
            H = sp.coo_matrix((local.reshape(-1, 9).ravel(), (rows, cols)),
                              shape=(nn * nn, nn * nn)).tocsr()
        keep = np.arange(1, domain.n_nodes)
        try:
            delta = spla.spsolve(H[keep][:, keep].tocsc(), -g_nodal.ravel()[keep])
        except RuntimeError:
            return None
        if not np.all(np.isfinite(delta)):
            return None
        full = np.zeros(domain.n_nodes)
        full[keep] = delta
        return full.reshape(domain.node_shape())

    return newton_solve


def solve_defect(xi, c: Coefficient, cell=None,
                 domain: TruncatedDomain | None = None,
                 tol: float = DEFAULT_TOL, max_iter: int = 500) -> DefectSolve:
    """Minimize the truncated defect functional in direction xi.

    `cell` supplies the corrected periodic field (CellSolve, closed-form
    corrector or callable); when omitted in 1D the closed form is used.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if domain is None:
        half = c.defect.decay_radius + 16.0 if c.defect is not None else 16.0
        domain = TruncatedDomain(c.dim, half)
    if c.defect is not None and domain.half_width < c.defect.decay_radius:
        warnings.warn(
            f"half_width {domain.half_width} is below the defect decay radius "
            f"{c.defect.decay_radius}", TruncationWarning)
    xi_mag = float(np.linalg.norm(xi))
    u = _corrected_field(xi, c, cell, domain)
    weight = np.linalg.norm(u, axis=-1) ** (c.p - 2.0)
    rhs = assemble_rhs(xi, c, cell, domain)
    zero = np.zeros(domain.node_shape())
    if xi_mag == 0.0 or c.defect is None:
        fld = DefectField(domain, zero, weight)
        grad0 = box_gradient(zero, domain)
        return DefectSolve(xi, fld, rhs, 0.0, 0.0, 0, compute_norms(
            grad0, weight, domain, c.p), c.p, [0.0])

    a_mid = np.asarray(evaluate(c, domain.midpoints()), dtype=float)
    vol = domain.cell_volume
    p = c.p

    def value_and_grad(v):
        g = box_gradient(v, domain)
        gap, dgap = _gap_terms(u, g, a_mid, p)
        energy = vol * (float(np.sum(gap)) / p + float(np.sum(rhs * g)))
        nodal = vol * box_gradient_adjoint(dgap / p + rhs, domain)
        return energy, nodal

    def project(v):
        return v - v.flat[0]

    magnitude = float(np.mean(a_mid)) * (p - 1.0) * max(xi_mag, 1e-30) ** (p - 2.0)
    precond = _make_box_precond(domain, magnitude)
    residual_scale = xi_mag * np.sqrt(domain.n_nodes) * domain.spacing
    result = minimize_convex(
        value_and_grad, zero, precond=precond, tol=tol,
        residual_scale=residual_scale, max_iter=max_iter, project=project,
        newton_solve=_box_newton_factory(domain, u, a_mid, p, xi_mag))

    fld = DefectField(domain, result.x, weight)
    grad = box_gradient(result.x, domain)
    norms = compute_norms(grad, weight, domain, p)
    notes = []
    if norms.truncation_share > 0.05:
        msg = (f"outermost annulus carries {norms.truncation_share:.1%} of the "
               f"gradient energy; enlarge the domain")
        notes.append(msg)
        warnings.warn(msg, TruncationWarning)
    return DefectSolve(xi, fld, rhs, result.value, result.residual,
                       result.iterations, norms, p, result.energy_trace, notes)


@dataclass
class TailReport:
    """Dyadic-annulus decay of the defect-corrector gradient in L^{p'}."""

    lp_prime: float
    lp_prime_over_xi: float
    annuli: list[AnnulusRow]
    cumulative: list[float]
    tail_ratios: list[tuple[int, float]]


def integrability_report(solve: DefectSolve, p: float | None = None) -> TailReport:
    p = solve.p if p is None else p
    xi_mag = float(np.linalg.norm(solve.xi))
    rows = solve.norms.annuli
    cumulative = list(np.cumsum([r.lp_prime_integral for r in rows]))
    ratios = []
    for prev, cur in zip(rows, rows[1:]):
        if prev.lp_prime_integral > 0:
            ratios.append((cur.index, cur.lp_prime_integral / prev.lp_prime_integral))
    return TailReport(solve.norms.lp_prime,
                      solve.norms.lp_prime / xi_mag if xi_mag else 0.0,
                      rows, cumulative, ratios)


@dataclass
class ContinuityReport:
    beta_tilde: float
    gamma_est: float
    pairs: list[tuple[float, float]]     # (|xi - eta|, ratio)
    max_ratio: float


def continuity_scan(xi_eta_pairs, c: Coefficient, p: float | None = None,
                    domain: TruncatedDomain | None = None, seed: int = 0,
                    gamma_est: float | None = None, cell_factory=None,
                    tol: float = DEFAULT_TOL) -> ContinuityReport:
    """Hoelder-type continuity quotients of the defect-corrector gradient.

    The exponent is beta_tilde = (gamma_est/(p-1)) min(1, p-2); the scan only
    certifies that the quotient stays bounded, never a specific constant.
    `xi_eta_pairs` is a list of (xi, eta); pairs closer than 1e-9 are skipped.
    """
    p = c.p if p is None else p
    if gamma_est is None:
        gamma_est = 1.0 / (p - 1.0)
    beta_tilde = gamma_est / (p - 1.0) * min(1.0, p - 2.0)
    cache: dict = {}

    def solve_for(direction):
        key = tuple(np.atleast_1d(direction))
        if key not in cache:
            provider = cell_factory(direction) if cell_factory is not None else None
            cache[key] = solve_defect(direction, c, cell=provider, domain=domain,
                                      tol=tol)
        return cache[key]

    pairs = []
    max_ratio = 0.0
    for xi, eta in xi_eta_pairs:
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        eta = np.atleast_1d(np.asarray(eta, dtype=float))
        gap = float(np.linalg.norm(xi - eta))
        if gap <= 1e-9:
            continue
        sx, se = solve_for(xi), solve_for(eta)
        diff = sx.grad - se.grad
        vol = sx.field.domain.cell_volume
        num = float((vol * np.sum(np.linalg.norm(diff, axis=-1) ** p)) ** (1 / p))
        den = ((np.linalg.norm(xi) ** (1 - beta_tilde)
                + np.linalg.norm(eta) ** (1 - beta_tilde)) * gap ** beta_tilde)
        ratio = num / den
        pairs.append((gap, ratio))
        max_ratio = max(max_ratio, ratio)
    return ContinuityReport(beta_tilde, gamma_est, pairs, max_ratio)
