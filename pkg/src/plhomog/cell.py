"""Periodic corrector cell problem in dimension 1 and 2.

Nodal unknowns on a uniform periodic lattice over the unit cell, forward
differences per axis, coefficient sampled at staggered cell midpoints; the
resulting discrete energy is convex in the nodal values and is minimized by
the shared preconditioned optimizer.  The homogenized operator is the
midpoint quadrature of the corrected flux.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .coeffs import PeriodicCoefficient
from .numutil import signed_power, signed_power_vec
from .optim import MinimizeResult, NoConvergence, minimize_convex  # noqa: F401

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform lattice on the unit cell with periodic identification."""

    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("cell solves support dim 1 and 2")
        if self.n < 4:
            raise ValueError("need at least 4 nodes per axis")

    @property
    def cell_volume(self) -> float:
        return self.n ** -self.dim

    @property
    def n_nodes(self) -> int:
        return self.n ** self.dim

    def midpoints(self) -> np.ndarray:
        """Staggered cell centers where the coefficient is sampled."""
        axis = -0.5 + (np.arange(self.n) + 0.5) / self.n
        if self.dim == 1:
            return axis
        gx, gy = np.meshgrid(axis, axis, indexing="ij")
        return np.stack([gx, gy], axis=-1)


def forward_gradient(values: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    """Periodic forward differences, shape grid.shape + (dim,)."""
    n = grid.n
    if grid.dim == 1:
        return (n * (np.roll(values, -1) - values))[:, None]
    g1 = n * (np.roll(values, -1, axis=0) - values)
    g2 = n * (np.roll(values, -1, axis=1) - values)
    return np.stack([g1, g2], axis=-1)


def gradient_adjoint(flux: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    """Adjoint of forward_gradient (a negative discrete divergence)."""
    n = grid.n
    if grid.dim == 1:
        q = flux[..., 0]
        return n * (np.roll(q, 1) - q)
    out = n * (np.roll(flux[..., 0], 1, axis=0) - flux[..., 0])
    out += n * (np.roll(flux[..., 1], 1, axis=1) - flux[..., 1])
    return out


@dataclass
class PeriodicField:
    """Mean-zero nodal function on the periodic grid."""

    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.values = self.values - self.values.mean()

    @property
    def mean(self) -> float:
        return float(self.values.mean())


@dataclass
class CellSolve:
    xi: np.ndarray
    field: PeriodicField
    grad_field: np.ndarray          # xi + discrete gradient, per cell
    energy: float
    iterations: int
    residual: float
    energy_trace: list[float] = field(default_factory=list, repr=False)

    @property
    def grid(self) -> PeriodicGrid:
        return self.field.grid


def _as_direction(xi, dim: int) -> np.ndarray:
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.size != dim:
        raise ValueError(f"xi has size {xi.size}, expected {dim}")
    return xi


def discrete_energy(xi, v, a_per: PeriodicCoefficient, p: float,
                    grid: PeriodicGrid | None = None) -> float:
    """Midpoint discretization of the cell energy (1/p) int a|xi + grad v|^p."""
    if isinstance(v, PeriodicField):
        grid, values = v.grid, v.values
    else:
        values = np.asarray(v, dtype=float)
    xi = _as_direction(xi, grid.dim)
    a_mid = a_per(grid.midpoints())
    u = xi + forward_gradient(values, grid)
    mag = np.linalg.norm(u, axis=-1)
    return float(grid.cell_volume / p * np.sum(a_mid * mag ** p))


def _laplace_symbol(grid: PeriodicGrid) -> np.ndarray:
    n = grid.n
    k = np.arange(n)
    lam = (2.0 * n * np.sin(np.pi * k / n)) ** 2
    if grid.dim == 1:
        return lam
    return lam[:, None] + lam[None, :]


def _make_precond(grid: PeriodicGrid, a_mid: np.ndarray, p: float, xi_mag: float):
    symbol = _laplace_symbol(grid) * grid.cell_volume
    symbol *= float(np.mean(a_mid)) * (p - 1.0) * max(xi_mag, 1e-30) ** (p - 2.0)
    inv = np.zeros_like(symbol)
    nonzero = symbol > 0
    inv[nonzero] = 1.0 / symbol[nonzero]

    def precond(g):
        return np.fft.ifftn(np.fft.fftn(g) * inv).real

    return precond


def _hessian_weights(u: np.ndarray, a_mid: np.ndarray, p: float, xi_mag: float):
    """Per-cell Hessian of the flux integrand, or None where degenerate."""
    mag = np.linalg.norm(u, axis=-1)
    if p > 2.0 and np.min(mag) <= 1e-12 * max(xi_mag, 1e-30):
        return None
    if u.shape[-1] == 1:
        return (a_mid * (p - 1.0) * mag ** (p - 2.0))[..., None, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        outer = u[..., :, None] * u[..., None, :]
        mm = np.where(mag > 0, mag, 1.0)
        block = (mag ** (p - 2.0))[..., None, None] * np.eye(2)
        block = block + (p - 2.0) * (mm ** (p - 4.0))[..., None, None] * outer
    return a_mid[..., None, None] * block


def _assemble_hessian(weights: np.ndarray, grid: PeriodicGrid) -> sp.csr_matrix:
    n = grid.n
    vol = grid.cell_volume
    if grid.dim == 1:
        # node i couples cells i-1 and i on the diagonal, cell i off-diagonal
        m = vol * n * n * weights[:, 0, 0]
        idx = np.arange(n)
        nxt = (idx + 1) % n
        rows = np.concatenate([idx, idx, nxt])
        cols = np.concatenate([idx, nxt, idx])
        vals = np.concatenate([m + np.roll(m, 1), -m, -m])
        return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    # dim 2: cell (i, j) couples nodes (i, j), (i+1, j), (i, j+1) through
    # the local gradient map G = n * [[-1, 1, 0], [-1, 0, 1]]
    gmap = n * np.array([[-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])
    local = vol * np.einsum("ai,...ab,bj->...ij", gmap, weights, gmap)
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    node = (ii * n + jj).ravel()
    right = (((ii + 1) % n) * n + jj).ravel()
    up = (ii * n + (jj + 1) % n).ravel()
    stencil = np.stack([node, right, up], axis=1)        # (cells, 3)
    rows = np.repeat(stencil, 3, axis=1).ravel()
    cols = np.tile(stencil, (1, 3)).ravel()
    vals = local.reshape(-1, 9).ravel()
    size = grid.n_nodes
    return sp.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()


def _newton_factory(grid: PeriodicGrid, a_mid, p, xi):
    xi_mag = float(np.linalg.norm(xi))

    def newton_solve(v_flat, g_flat):
        u = xi + forward_gradient(v_flat.reshape(grid_shape(grid)), grid)
        weights = _hessian_weights(u, a_mid, p, xi_mag)
        if weights is None:
            return None
        H = _assemble_hessian(weights, grid)
        # remove the constant null space by pinning node 0
        keep = np.arange(1, grid.n_nodes)
        Hr = H[keep][:, keep].tocsc()
        try:
            delta = spla.spsolve(Hr, -g_flat.ravel()[keep])
        except RuntimeError:
            return None
        if not np.all(np.isfinite(delta)):
            return None
        full = np.zeros(grid.n_nodes)
        full[keep] = delta
        return full.reshape(grid_shape(grid))

    return newton_solve


def grid_shape(grid: PeriodicGrid) -> tuple:
    return (grid.n,) * grid.dim


def solve_cell(xi, a_per: PeriodicCoefficient, p: float, grid: PeriodicGrid,
               tol: float = DEFAULT_TOL, max_iter: int = 500) -> CellSolve:
    """Mean-zero minimizer of the discrete cell energy in direction xi."""
    xi = _as_direction(xi, grid.dim)
    xi_mag = float(np.linalg.norm(xi))
    a_mid = np.asarray(a_per(grid.midpoints()), dtype=float)
    vol = grid.cell_volume
    zero = np.zeros(grid_shape(grid))
    if xi_mag == 0.0:
        fld = PeriodicField(grid, zero)
        return CellSolve(xi, fld, np.broadcast_to(xi, zero.shape + (grid.dim,)).copy(),
                         0.0, 0, 0.0, [0.0])

    def value_and_grad(v):
        u = xi + forward_gradient(v, grid)
        mag = np.linalg.norm(u, axis=-1)
        energy = vol / p * float(np.sum(a_mid * mag ** p))
        flux = a_mid[..., None] * signed_power_vec(u, p - 2.0)
        return energy, vol * gradient_adjoint(flux, grid)

    def project(v):
        return v - v.mean()

    precond = _make_precond(grid, a_mid, p, xi_mag)
    residual_scale = xi_mag * grid.n ** (grid.dim / 2.0) / grid.n
    result = minimize_convex(
        value_and_grad, zero, precond=precond, tol=tol,
        residual_scale=residual_scale, max_iter=max_iter, project=project,
        newton_solve=_newton_factory(grid, a_mid, p, xi))
    fld = PeriodicField(grid, result.x)
    grad_field = xi + forward_gradient(fld.values, grid)
    return CellSolve(xi, fld, grad_field, result.value, result.iterations,
                     result.residual, result.energy_trace)


def field_lp_norm(values: np.ndarray, grid: PeriodicGrid, p: float) -> float:
    """L^p(Q) norm of a per-cell (vector) field under midpoint quadrature."""
    mag = np.linalg.norm(values, axis=-1) if values.shape[-1:] == (grid.dim,) \
        else np.abs(values)
    return float((grid.cell_volume * np.sum(mag ** p)) ** (1.0 / p))


@dataclass
class HomogenizedOperator:
    """Table of corrected-flux averages xi -> a*(xi)."""

    entries: list[tuple[np.ndarray, np.ndarray]]
    p: float
    scalar_1d: float | None = None
    scalar_1d_quadrature: float | None = None

    def lookup(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        for key, val in self.entries:
            if np.allclose(key, xi):
                return val
        raise KeyError(f"no entry for xi = {xi}")


def flux_average(solve: CellSolve, a_per: PeriodicCoefficient, p: float) -> np.ndarray:
    grid = solve.grid
    a_mid = np.asarray(a_per(grid.midpoints()), dtype=float)
    flux = a_mid[..., None] * signed_power_vec(solve.grad_field, p - 2.0)
    return grid.cell_volume * flux.reshape(-1, grid.dim).sum(axis=0)


def homogenized_operator(xi_list, a_per: PeriodicCoefficient, p: float,
                         grid: PeriodicGrid, tol: float = DEFAULT_TOL,
                         solves: dict | None = None) -> HomogenizedOperator:
    """Homogenized flux table; in 1D also the scalar coefficient cross-check."""
    entries = []
    for xi in xi_list:
        xi = _as_direction(xi, grid.dim)
        key = tuple(xi)
        if solves is not None and key in solves:
            solve = solves[key]
        else:
            solve = solve_cell(xi, a_per, p, grid, tol=tol)
            if solves is not None:
                solves[key] = solve
        entries.append((xi, flux_average(solve, a_per, p)))
    op = HomogenizedOperator(entries, p)
    if grid.dim == 1:
        unit = solve_cell(np.array([1.0]), a_per, p, grid, tol=tol)
        op.scalar_1d = float(flux_average(unit, a_per, p)[0])
        from .oned import homogenized_coefficient_1d
        op.scalar_1d_quadrature = homogenized_coefficient_1d(a_per, p)
    return op


@dataclass
class Prop21Report:
    """Diagnostics for homogeneity, growth and continuity of the corrector map."""

    p: float
    seed: int
    max_homogeneity_dev: float
    max_growth_ratio: float
    max_continuity_ratio: float
    n_pairs: int


def corrector_map_diagnostics(a_per: PeriodicCoefficient, p: float,
                              grid: PeriodicGrid, xi_samples, seed: int = 0,
                              scalings=(-2.0, 0.5, 3.0),
                              tol: float = DEFAULT_TOL) -> Prop21Report:
    """Sample-based bounds on the corrector map: relative homogeneity defect,
    growth |grad w|/|xi| and the Hoelder-type continuity quotient with
    exponent 1/(p-1)."""
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    beta = 1.0 / (p - 1.0)
    xi_samples = [np.atleast_1d(np.asarray(x, dtype=float)) for x in xi_samples]
    solves = {tuple(xi): solve_cell(xi, a_per, p, grid, tol=tol) for xi in xi_samples}

    homog_dev = 0.0
    for xi in xi_samples:
        base = solves[tuple(xi)]
        gw = base.grad_field - xi
        for t in scalings:
            scaled = solve_cell(t * xi, a_per, p, grid, tol=tol)
            gw_t = scaled.grad_field - t * xi
            num = field_lp_norm(gw_t - t * gw, grid, p)
            den = max(field_lp_norm(t * gw, grid, p),
                      abs(t) * float(np.linalg.norm(xi)))
            if den > 0:
                homog_dev = max(homog_dev, num / den)

    growth = 0.0
    for xi in xi_samples:
        mag = float(np.linalg.norm(xi))
        if mag > 0:
            gw = solves[tuple(xi)].grad_field - xi
            growth = max(growth, field_lp_norm(gw, grid, p) / mag)

    cont = 0.0
    pairs = 0
    keys = list(solves)
    for _ in range(max(1, len(keys) - 1)):
        i, j = rng.integers(0, len(keys), size=2)
        if i == j:
            continue
        xi, eta = np.array(keys[i]), np.array(keys[j])
        gap = float(np.linalg.norm(xi - eta))
        if gap <= 1e-9:
            continue
        diff = solves[keys[i]].grad_field - solves[keys[j]].grad_field
        num = field_lp_norm(diff, grid, p)
        den = (np.linalg.norm(xi) ** (1 - beta) + np.linalg.norm(eta) ** (1 - beta)) \
            * gap ** beta
        cont = max(cont, num / den)
        pairs += 1
    return Prop21Report(p, seed, homog_dev, growth, cont, pairs)


@dataclass
class A4Report:
    """Non-degeneracy of the corrected field: c_est = min |xi + grad w|/|xi|."""

    c_est: float
    per_sample: list[tuple[tuple, float]]
    threshold: float

    @property
    def passed(self) -> bool:
        return self.c_est > self.threshold


def nondegeneracy_report(a_per: PeriodicCoefficient, p: float, grid: PeriodicGrid,
                         xi_samples, threshold: float = 1e-3,
                         tol: float = DEFAULT_TOL,
                         solves: dict | None = None) -> A4Report:
    per_sample = []
    overall = np.inf
    for xi in xi_samples:
        xi = _as_direction(xi, grid.dim)
        key = tuple(xi)
        if solves is not None and key in solves:
            solve = solves[key]
        else:
            solve = solve_cell(xi, a_per, p, grid, tol=tol)
        mag = float(np.linalg.norm(xi))
        if mag == 0.0:
            continue
        c_est = float(np.min(np.linalg.norm(solve.grad_field, axis=-1))) / mag
        per_sample.append((key, c_est))
        overall = min(overall, c_est)
    return A4Report(float(overall), per_sample, threshold)
