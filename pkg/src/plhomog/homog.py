"""Cell-averaging discretization operator, two-scale reconstruction and the
one-dimensional epsilon-convergence studies."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numutil import gauss_legendre, signed_power
from .oned import Problem1D, _RemainderWork, corrector_1d

_EDGE_TOL = 1e-12


class MissingCorrector(KeyError):
    """A cell value has no bank entry and no solve budget remains."""


def _normalize_domain(omega) -> np.ndarray:
    """Domain bounds as an array of shape (dim, 2)."""
    omega = np.asarray(omega, dtype=float)
    if omega.ndim == 1:
        omega = omega[None, :]
    if omega.shape[-1] != 2 or np.any(omega[:, 0] >= omega[:, 1]):
        raise ValueError("domain must be ((lo, hi), ...) with lo < hi")
    return omega


@dataclass
class StepFunction:
    """Piecewise-constant cell averages over the delta-lattice inside Omega.

    Only lattice cells delta(Q + k) fully contained in Omega are represented;
    boundary slivers are uncovered.
    """

    domain: np.ndarray
    delta: float
    indices: np.ndarray          # (n_cells, dim) integer lattice indices
    values: np.ndarray           # (n_cells, m)
    covered_measure: float

    @property
    def dim(self) -> int:
        return self.domain.shape[0]

    def cell_bounds(self, k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.delta * (k - 0.5), self.delta * (k + 0.5)

    def locate(self, points: np.ndarray) -> np.ndarray:
        """Row index of the covered cell containing each point, -1 outside."""
        pts = np.asarray(points, dtype=float)
        if self.dim == 1 and pts.ndim >= 1 and (pts.ndim == 1 or pts.shape[-1] != 1):
            pts = pts[..., None]
        k = np.floor(pts / self.delta + 0.5).astype(int)
        flat = k.reshape(-1, self.dim)
        out = np.full(flat.shape[0], -1, dtype=int)
        for row, idx in self._row_map.items():
            mask = np.all(flat == np.array(row), axis=1)
            out[mask] = idx
        return out.reshape(pts.shape[:-1])

    def __post_init__(self):
        self._row_map = {tuple(row): i for i, row in enumerate(self.indices)}

    def __call__(self, points: np.ndarray) -> np.ndarray:
        rows = self.locate(points)
        vals = np.where((rows >= 0)[..., None],
                        self.values[np.maximum(rows, 0)], np.nan)
        return vals


def discretize(phi, omega, delta: float, order: int = 8) -> StepFunction:
    """Cell-averaging discretization over lattice cells contained in Omega."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    domain = _normalize_domain(omega)
    dim = domain.shape[0]
    k_ranges = []
    for ax in range(dim):
        lo, hi = domain[ax]
        k_min = int(np.ceil(lo / delta + 0.5 - _EDGE_TOL))
        k_max = int(np.floor(hi / delta - 0.5 + _EDGE_TOL))
        k_ranges.append(np.arange(k_min, k_max + 1))
    if any(r.size == 0 for r in k_ranges):
        indices = np.empty((0, dim), dtype=int)
    else:
        mesh = np.meshgrid(*k_ranges, indexing="ij")
        indices = np.stack([m.ravel() for m in mesh], axis=1)

    gx, gw = gauss_legendre(order)
    means = []
    for k in indices:
        axes_nodes = [delta * (k[ax] + 0.5 * gx) for ax in range(dim)]
        if dim == 1:
            vals = np.asarray(phi(axes_nodes[0]), dtype=float)
            w = gw / 2.0
            mean = np.tensordot(w, vals.reshape(order, -1), axes=1)
        else:
            xx, yy = np.meshgrid(*axes_nodes, indexing="ij")
            pts = np.stack([xx, yy], axis=-1)
            vals = np.asarray(phi(pts), dtype=float)
            w2 = np.outer(gw, gw) / 4.0
            mean = np.tensordot(w2.ravel(), vals.reshape(order * order, -1), axes=1)
        means.append(np.atleast_1d(mean))
    values = np.array(means) if means else np.empty((0, 1))
    covered = indices.shape[0] * delta ** dim
    return StepFunction(domain, delta, indices, values, covered)


@dataclass
class JensenRow:
    delta: float
    lattice_sum: float
    integral: float

    @property
    def holds(self) -> bool:
        return self.lattice_sum <= self.integral + 1e-10 * max(1.0, self.integral)


def jensen_check(phi, omega, delta_list, p: float, order: int = 8,
                 integral_cells: int = 4096) -> list[JensenRow]:
    """Cell-average contraction: sum delta^d |mean|^p <= int |phi|^p."""
    domain = _normalize_domain(omega)
    if domain.shape[0] != 1:
        raise NotImplementedError("jensen_check is exercised on intervals")
    from .numutil import composite_rule, uniform_edges
    nodes, wts = composite_rule(uniform_edges(*domain[0], integral_cells), order)
    integral = float(wts @ np.abs(np.asarray(phi(nodes), dtype=float)) ** p)
    rows = []
    for delta in delta_list:
        step = discretize(phi, omega, delta, order)
        mags = np.linalg.norm(step.values, axis=1)
        rows.append(JensenRow(delta, float(delta * np.sum(mags ** p)), integral))
    return rows


class CorrectorBank:
    """Cache of unit-direction corrector gradients with homogeneity reuse.

    Corrector gradients scale linearly in the direction, so one solve per
    direction (up to quantization) serves every proportional cell value.
    """

    def __init__(self, factory, budget: int | None = None, quantum: float = 1e-9):
        self._factory = factory
        self._cache: dict = {}
        self.budget = budget
        self.quantum = quantum

    def _key(self, direction: np.ndarray) -> tuple:
        return tuple(np.round(direction / self.quantum).astype(np.int64))

    def gradient(self, eta):
        """Evaluator y -> corrector gradient for cell value eta."""
        eta = np.atleast_1d(np.asarray(eta, dtype=float))
        mag = float(np.linalg.norm(eta))
        if mag == 0.0:
            return lambda y: np.zeros(np.shape(y))
        direction = eta / mag
        key = self._key(direction)
        signed = 1.0
        if key not in self._cache:
            neg = self._key(-direction)
            if neg in self._cache:
                key, signed = neg, -1.0
        if key not in self._cache:
            if self.budget is not None and len(self._cache) >= self.budget:
                raise MissingCorrector(f"no bank entry for direction {direction}")
            self._cache[key] = self._factory(direction)
        unit = self._cache[key]
        scale = signed * mag
        return lambda y: scale * unit(y)

    def __len__(self) -> int:
        return len(self._cache)


def bank_from_problem(prob: Problem1D, kind: str) -> CorrectorBank:
    """1D bank backed by the closed-form unit corrector."""
    def factory(direction):
        corr = corrector_1d(float(direction[0]), prob.coefficient, kind)
        return lambda y: corr.grad(y)
    return CorrectorBank(factory)


def two_scale_field(u_star_grad: StepFunction, corrector_bank: CorrectorBank,
                    eps: float, kind: str = "full", fallback=None):
    """x -> grad u*(x) + grad w_{M grad u*}(x/eps), grad u* on uncovered slivers.

    `fallback` evaluates grad u* pointwise; it defaults to the step function's
    own values, which leaves nan on the uncovered slivers.
    """
    del kind  # the bank already encodes the corrector family

    def evaluate_field(x):
        x = np.asarray(x, dtype=float)
        rows = u_star_grad.locate(x)
        base = np.asarray(fallback(x), dtype=float) if fallback is not None \
            else u_star_grad(x)[..., 0]
        out = np.array(base, dtype=float)
        flat_rows = rows.ravel()
        flat_out = out.ravel()
        flat_x = x.ravel()
        for row in np.unique(flat_rows):
            if row < 0:
                continue
            eta = u_star_grad.values[row]
            grad_w = corrector_bank.gradient(eta)
            mask = flat_rows == row
            flat_out[mask] = flat_out[mask] + np.asarray(
                grad_w(flat_x[mask] / eps), dtype=float).ravel()
        return flat_out.reshape(out.shape)

    return evaluate_field


@dataclass
class StudyRecord:
    eps: float
    u_err_lp: float
    flux_res: tuple[float, float, float]
    r_linf: float
    r_l2: float
    two_scale_err: float | None = None


@dataclass
class ConvergenceSeries:
    eps_values: list[float]
    kind: str
    records: list[StudyRecord] = field(default_factory=list)


STUDY_COLUMNS = ("eps", "L2_u_err", "flux_res_1", "flux_res_x", "flux_res_sin",
                 "R_Linf", "R_L2")

_TEST_BANK = (
    ("1", lambda x: np.ones_like(x)),
    ("x", lambda x: x),
    ("sin", lambda x: np.sin(np.pi * x)),
)


def convergence_study(prob_template: Problem1D, eps_list, kind: str = "full",
                      include_two_scale_error: bool = False,
                      m_delta_exponent: float = 1.0) -> ConvergenceSeries:
    """Per-epsilon strong/weak convergence metrics for the 1D problem.

    Records the L^p distance between the oscillating and homogenized
    solutions, weak flux residuals against a fixed smooth test bank and the
    two-scale remainder norms of the requested corrector kind.  Optionally
    also the L^p error of the reconstructed two-scale gradient built from
    M_delta with delta = eps^m_delta_exponent.
    """
    eps_list = list(eps_list)
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    series = ConvergenceSeries(eps_list, kind)
    p = prob_template.p
    alpha = 1.0 / (p - 1.0)
    for eps in eps_list:
        prob = prob_template.with_epsilon(eps)
        work = _RemainderWork(prob)
        rep = work.norms(kind)
        nodes, wts = work.nodes, work.wts
        grad_eps = work.grad_u_eps
        grad_star = signed_power((work.c_star - work.f_vals) / work.a_star, alpha)

        def grad_eps_fn(x, _w=work, _pr=prob):
            from .coeffs import evaluate
            return signed_power(
                (_w.c_eps - np.asarray(_w.F(x)))
                / evaluate(_pr.coefficient, np.asarray(x) / _pr.epsilon), alpha)

        def grad_star_fn(x, _w=work):
            return signed_power((_w.c_star - np.asarray(_w.F(x))) / _w.a_star, alpha)

        u_eps = _primitive_from(grad_eps_fn, nodes)
        u_star = _primitive_from(grad_star_fn, nodes)
        u_err = float((wts @ np.abs(u_eps - u_star) ** p) ** (1.0 / p))
        flux_eps = work.a_full * signed_power(grad_eps, p - 1.0)
        flux_star = work.a_star * signed_power(grad_star, p - 1.0)
        residuals = tuple(
            float(abs(wts @ ((flux_eps - flux_star) * test(nodes))))
            for _, test in _TEST_BANK)
        record = StudyRecord(eps, u_err, residuals, rep.linf, rep.l2)
        if include_two_scale_error:
            record.two_scale_err = _two_scale_error(prob, work, kind,
                                                    eps ** m_delta_exponent)
        series.records.append(record)
    return series


def _primitive_from(grad_fn, nodes):
    """Primitive of a gradient callable at the nodes, vanishing at x = -1/2."""
    from .numutil import cumulative_from_zero
    pts = np.concatenate([[-0.5], nodes])
    vals = cumulative_from_zero(grad_fn, pts)
    return vals[1:] - vals[0]


def _two_scale_error(prob: Problem1D, work, kind: str, delta: float) -> float:
    step = discretize(lambda x: signed_power(
        (work.c_star - np.asarray(work.F(x))) / work.a_star,
        1.0 / (prob.p - 1.0)), (-0.5, 0.5), delta)
    bank = bank_from_problem(prob, kind)
    grad_star_fn = lambda x: signed_power(  # noqa: E731
        (work.c_star - np.asarray(work.F(x))) / work.a_star, 1.0 / (prob.p - 1.0))
    field_fn = two_scale_field(step, bank, prob.epsilon, kind, fallback=grad_star_fn)
    reconstructed = field_fn(work.nodes)
    return float((work.wts @ np.abs(work.grad_u_eps - reconstructed) ** prob.p)
                 ** (1.0 / prob.p))
