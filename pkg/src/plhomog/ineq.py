"""Algebraic inequalities behind the monotone p-Laplace structure.

Every routine is vectorized over a leading batch axis; vectors live in the
trailing axis. Randomized scans use a counter-based Philox generator so that
reports are reproducible for a given seed regardless of chunking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numutil import signed_power, signed_power_vec

#: probe exponents used by the randomized scans
P_SAMPLES = (2.0, 2.5, 3.0, 3.5, 4.0, 5.0)
GAMMA_GRID = tuple(2.0 ** -k for k in range(13))
C_GRID = (0.0,) + tuple(2.0 ** j for j in range(-4, 13))
PAIR_GUARD = 1e-9   # |x - y| below this is excluded from ratio denominators
ROUNDOFF = 1e-10


class DegenerateInput(ValueError):
    pass


def _norm(v):
    return np.linalg.norm(np.atleast_1d(np.asarray(v, dtype=float)), axis=-1)


def monotone_pairing(x, y, p: float):
    """Pairing (x|x|^{p-2} - y|y|^{p-2}).(x - y) and its three comparators.

    Returns (lhs, p_lower, weighted_lower, upper) where p_lower = |x-y|^p,
    weighted_lower = (|x|^{p-2} + |y|^{p-2})|x-y|^2 and upper is the magnitude
    |x|x|^{p-2} - y|y|^{p-2}| used by the Lipschitz-type upper bound.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    fx = signed_power_vec(x, p - 2.0)
    fy = signed_power_vec(y, p - 2.0)
    diff = x - y
    lhs = np.sum((fx - fy) * diff, axis=-1)
    dist = _norm(diff)
    weighted = (_norm(x) ** (p - 2) + _norm(y) ** (p - 2)) * dist ** 2
    return lhs, dist ** p, weighted, _norm(fx - fy)


def bregman_gap(xi, x, p: float):
    """|xi + x|^p - |xi|^p - p xi|xi|^{p-2}.x, the convexity gap of z -> |z|^p.

    Nonnegative for p >= 2; equals |x|^p at xi = 0 and |x|^2 at p = 2.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xi, x = np.broadcast_arrays(xi, x)
    slope = signed_power_vec(xi, p - 2.0)
    return _norm(xi + x) ** p - _norm(xi) ** p - p * np.sum(slope * x, axis=-1)


def _gap_comparator(xi_mag, x_mag, p: float):
    # at p = 2 the quadratic expansion is exact and the weighted term merges
    # with |x|^p; at xi = 0 the weight vanishes for p > 2
    if p == 2.0:
        return x_mag ** p
    return x_mag ** 2 * xi_mag ** (p - 2.0) + x_mag ** p


def bregman_gap_ratio(xi, x, p: float):
    """gap / (|x|^2 |xi|^{p-2} + |x|^p), reported twice for min/max aggregation."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mag = _norm(x)
    if np.any(mag <= PAIR_GUARD):
        raise DegenerateInput("bregman_gap_ratio requires x != 0")
    ratio = bregman_gap(xi, x, p) / _gap_comparator(_norm(xi), mag, p)
    return ratio, ratio


def midpoint_gap(xi, eta, x, y, p: float):
    """Two-point coupling gap controlling the continuity of the corrector map.

    |xi+x|^p + |eta+y|^p - |xi+m|^p - |eta+m|^p
    - (p/2)(xi|xi|^{p-2} - eta|eta|^{p-2}).(x - y),   m = (x+y)/2.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    xi, eta, x, y = np.broadcast_arrays(xi, eta, x, y)
    mid = 0.5 * (x + y)
    cross = signed_power_vec(xi, p - 2.0) - signed_power_vec(eta, p - 2.0)
    return (_norm(xi + x) ** p + _norm(eta + y) ** p
            - _norm(xi + mid) ** p - _norm(eta + mid) ** p
            - 0.5 * p * np.sum(cross * (x - y), axis=-1))


def fractional_power_increment_ratio(x, h, p: float):
    """|(x+h)^{1/(p-1)} - x^{1/(p-1)}| / |h|^{1/(p-1)} for signed scalar powers."""
    alpha = 1.0 / (p - 1.0)
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    if np.any(np.abs(h) <= PAIR_GUARD):
        raise DegenerateInput("increment ratio requires h != 0")
    return np.abs(signed_power(x + h, alpha) - signed_power(x, alpha)) / np.abs(h) ** alpha


# ---------------------------------------------------------------------------
# randomized scans


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed)))


def _mixed_sample(rng, n, d, heavy_fraction=0.25, clip=1e3):
    """Uniform [-10, 10]^d samples with a clipped Cauchy-scaled heavy tail."""
    out = rng.uniform(-10.0, 10.0, size=(n, d))
    n_heavy = int(n * heavy_fraction)
    if n_heavy:
        scale = np.clip(np.abs(rng.standard_cauchy(size=(n_heavy, 1))), 0.0, clip / 10.0)
        out[:n_heavy] *= scale
    return out


@dataclass
class PairingScan:
    """Empirical constants for the three monotone-pairing inequalities."""

    p: float
    n_samples: int
    seed: int
    lower_p: float            # min pairing / |x-y|^p
    lower_weighted: float     # min pairing / ((|x|^{p-2}+|y|^{p-2})|x-y|^2)
    upper: float              # max |f(x)-f(y)| / ((|x|^{p-2}+|y|^{p-2})|x-y|)
    violations: int


def pairing_scan(p: float, n_samples: int, seed: int, dims=(1, 2, 3)) -> PairingScan:
    """Scan the pairing ratios over seeded random vector pairs."""
    rng = make_rng(seed)
    lows, lows_w, ups = [], [], []
    violations = 0
    per_dim = max(1, n_samples // len(dims))
    for d in dims:
        x = _mixed_sample(rng, per_dim, d)
        y = _mixed_sample(rng, per_dim, d)
        lhs, p_lower, weighted, upper_mag = monotone_pairing(x, y, p)
        scale = p_lower + weighted + 1e-300
        violations += int(np.sum(lhs < -ROUNDOFF * scale))
        keep = np.linalg.norm(x - y, axis=-1) > PAIR_GUARD
        lows.append(np.min(lhs[keep] / p_lower[keep]))
        lows_w.append(np.min(lhs[keep] / weighted[keep]))
        dist = np.linalg.norm((x - y)[keep], axis=-1)
        wk = weighted[keep] / dist   # (|x|^{p-2}+|y|^{p-2})|x-y|
        ok = wk > 1e-300
        ups.append(np.max(upper_mag[keep][ok] / wk[ok]))
    return PairingScan(p, per_dim * len(dims), seed,
                       float(min(lows)), float(min(lows_w)), float(max(ups)),
                       violations)


@dataclass
class GapScan:
    """Empirical two-sided bounds for the convexity gap comparator."""

    p: float
    n_samples: int
    seed: int
    ratio_min: float
    ratio_max: float
    gap_min_scaled: float     # min gap / scale, should exceed -1e-12
    violations: int


def gap_scan(p: float, n_samples: int, seed: int, dims=(1, 2, 3)) -> GapScan:
    rng = make_rng(seed)
    rmin, rmax, gmin = np.inf, -np.inf, np.inf
    violations = 0
    per_dim = max(1, n_samples // len(dims))
    for d in dims:
        xi = _mixed_sample(rng, per_dim, d)
        x = _mixed_sample(rng, per_dim, d)
        gap = bregman_gap(xi, x, p)
        mag = np.linalg.norm(x, axis=-1)
        scale = np.linalg.norm(xi, axis=-1) ** p + mag ** p + 1e-300
        violations += int(np.sum(gap < -1e-12 * scale))
        gmin = min(gmin, float(np.min(gap / scale)))
        keep = mag > PAIR_GUARD
        comparator = _gap_comparator(np.linalg.norm(xi, axis=-1), mag, p)[keep]
        ratio = gap[keep] / comparator
        rmin = min(rmin, float(np.min(ratio)))
        rmax = max(rmax, float(np.max(ratio)))
    return GapScan(p, per_dim * len(dims), seed, rmin, rmax, gmin, violations)


@dataclass
class IncrementScan:
    p: float
    n_samples: int
    seed: int
    ratio_max: float
    c_theory: float
    violations: int


def increment_scan(p: float, n_samples: int, seed: int) -> IncrementScan:
    """Empirical constant in the fractional-power increment bound.

    The sharp constant is 2^{1-1/(p-1)} (attained at x = -h/2); violations
    count samples exceeding it beyond a round-off guard scaled by |x|^alpha,
    which absorbs the cancellation in evaluating the left-hand side.
    """
    alpha = 1.0 / (p - 1.0)
    c_theory = 2.0 ** (1.0 - alpha)
    rng = make_rng(seed)
    x = _mixed_sample(rng, n_samples, 1)[:, 0]
    h = _mixed_sample(rng, n_samples, 1)[:, 0]
    keep = np.abs(h) > PAIR_GUARD
    x, h = x[keep], h[keep]
    lhs = np.abs(signed_power(x + h, alpha) - signed_power(x, alpha))
    rhs = c_theory * np.abs(h) ** alpha
    guard = ROUNDOFF * (np.abs(x) ** alpha + np.abs(h) ** alpha)
    violations = int(np.sum(lhs > rhs + guard))
    ratio = lhs / np.abs(h) ** alpha
    return IncrementScan(p, int(keep.sum()), seed, float(np.max(ratio)),
                         c_theory, violations)


@dataclass
class LowerBoundReport:
    """Feasibility certificate for the coupling-gap lower bound."""

    p: float
    delta: float
    n_samples: int
    seed: int
    feasible: bool
    gamma: float | None = None
    c: float | None = None
    min_margin: float | None = None
    branch: str = ""
    gamma_grid: tuple = field(default=GAMMA_GRID, repr=False)

    def as_dict(self) -> dict:
        return {
            "p": self.p, "delta": self.delta, "n_samples": self.n_samples,
            "seed": self.seed, "feasible": self.feasible, "gamma": self.gamma,
            "c": self.c, "min_margin": self.min_margin, "branch": self.branch,
        }


def _coupling_samples(p: float, delta: float, n: int, rng, dims=(1, 2, 3)):
    """Sampled (gap, |X-Y|^p, correction, scale) tuples for the feasibility scan."""
    gaps, dists, corrs, scales = [], [], [], []
    restricted = p < 3.0
    per_dim = max(1, n // len(dims))
    for d in dims:
        x_big = _mixed_sample(rng, per_dim, d)
        y_big = _mixed_sample(rng, per_dim, d)
        if restricted:
            direction = rng.normal(size=(per_dim, d))
            direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
            mag = delta * (1.0 + np.abs(rng.standard_cauchy(size=(per_dim, 1))).clip(0, 100))
            xi = direction * mag
            step = rng.normal(size=(per_dim, d))
            step /= np.linalg.norm(step, axis=-1, keepdims=True)
            eta = xi + 0.5 * delta * rng.uniform(0.0, 1.0, size=(per_dim, 1)) * step
        else:
            xi = _mixed_sample(rng, per_dim, d)
            eta = _mixed_sample(rng, per_dim, d)
        gap = midpoint_gap(xi, eta, x_big, y_big, p)
        dxy = np.linalg.norm(x_big - y_big, axis=-1)
        sxy = np.linalg.norm(x_big + y_big, axis=-1)
        dxe = np.linalg.norm(xi - eta, axis=-1)
        if restricted:
            corr = (dxe ** (p - 2) * dxy + delta ** (p - 3) * dxe * sxy) * dxy
        else:
            nxe = np.linalg.norm(xi, axis=-1) + np.linalg.norm(eta, axis=-1)
            corr = (dxe ** (p - 2) * dxy + dxe * sxy ** (p - 2)
                    + nxe ** (p - 3) * dxe * sxy) * dxy
        scale = (np.linalg.norm(xi, axis=-1) ** p + np.linalg.norm(eta, axis=-1) ** p
                 + np.linalg.norm(x_big, axis=-1) ** p + np.linalg.norm(y_big, axis=-1) ** p
                 + 1.0)
        gaps.append(gap)
        dists.append(dxy ** p)
        corrs.append(corr)
        scales.append(scale)
    return (np.concatenate(gaps), np.concatenate(dists),
            np.concatenate(corrs), np.concatenate(scales))


def feasibility_from_samples(gap, dist_p, corr, scale, p: float, delta: float,
                             seed: int, n_samples: int) -> LowerBoundReport:
    """Largest grid gamma admitting a grid c with gap >= gamma|X-Y|^p - c*corr."""
    guard = ROUNDOFF * scale
    zero_corr = corr <= 1e-300
    branch = "restricted" if p < 3.0 else "global"
    for gamma in sorted(GAMMA_GRID, reverse=True):
        slack = gap - gamma * dist_p
        if np.any(slack[zero_corr] < -guard[zero_corr]):
            continue
        active = ~zero_corr
        if np.any(active):
            c_needed = np.max((-slack[active] - guard[active]) / corr[active])
            c_needed = max(0.0, float(c_needed))
        else:
            c_needed = 0.0
        grid_c = [c for c in C_GRID if c >= c_needed]
        if not grid_c:
            continue
        c = min(grid_c)
        margin = float(np.min(slack + c * corr))
        return LowerBoundReport(p, delta, n_samples, seed, True,
                                gamma=gamma, c=c, min_margin=margin, branch=branch)
    return LowerBoundReport(p, delta, n_samples, seed, False, branch=branch)


def lower_bound_feasibility(p: float, delta: float, n_samples: int,
                            seed: int, dims=(1, 2, 3)) -> LowerBoundReport:
    """Randomized feasibility check of the coupling-gap lower bound.

    For 2 <= p < 3 the sampling is restricted to |xi| >= delta and
    eta in B(xi, delta/2); for p >= 3 it is unrestricted and the correction
    uses the global form.
    """
    if p < 3.0 and delta <= 0:
        raise ValueError("the restricted branch (2 <= p < 3) requires delta > 0")
    rng = make_rng(seed)
    gap, dist_p, corr, scale = _coupling_samples(p, delta, n_samples, rng, dims)
    return feasibility_from_samples(gap, dist_p, corr, scale, p, delta,
                                    seed, gap.size)
