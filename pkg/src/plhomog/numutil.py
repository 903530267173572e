"""Shared numerical kit: signed powers, composite Gauss-Legendre quadrature,
cumulative primitives and discrete norms."""

from __future__ import annotations

import numpy as np

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def signed_power(z, alpha):
    """sgn(z)|z|^alpha with the z=0 branch returning 0."""
    z = np.asarray(z, dtype=float)
    return np.sign(z) * np.abs(z) ** alpha


def signed_power_vec(u, q):
    """u|u|^q for vector fields u of shape (..., d)."""
    u = np.asarray(u, dtype=float)
    mag = np.linalg.norm(u, axis=-1, keepdims=True)
    return u * mag ** q


def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1], cached."""
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


def composite_rule(edges: np.ndarray, order: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes/weights on the partition given by `edges`.

    Returns flat, increasing node array of length (len(edges)-1)*order and
    matching weights. Nodes never coincide with cell edges (open rule).
    """
    edges = np.asarray(edges, dtype=float)
    gx, gw = gauss_legendre(order)
    h = np.diff(edges)
    mid = edges[:-1] + 0.5 * h
    nodes = (mid[:, None] + np.outer(0.5 * h, gx)).ravel()
    weights = np.outer(0.5 * h, gw).ravel()
    return nodes, weights


def uniform_edges(a: float, b: float, n_cells: int) -> np.ndarray:
    return np.linspace(a, b, n_cells + 1)


def integrate(f, edges, order: int = 8) -> float:
    nodes, w = composite_rule(edges, order)
    return float(w @ np.asarray(f(nodes), dtype=float))


def cumulative_from_zero(g, ys: np.ndarray, order: int = 8,
                         chunk: int = 200_000) -> np.ndarray:
    """Primitive W(y) = int_0^y g at the sorted points `ys`, anchored at W(0)=0.

    Consecutive gaps are integrated with an `order`-point Gauss rule, in
    chunks to bound peak memory; `ys` need not contain 0.
    """
    ys = np.asarray(ys, dtype=float)
    if ys.size == 0:
        return ys.copy()
    if np.any(np.diff(ys) < 0):
        raise ValueError("ys must be sorted")
    pts = np.concatenate([ys, [0.0]])       # ensure the anchor is a grid point
    order_idx = np.argsort(pts, kind="stable")
    sp = pts[order_idx]
    gx, gw = gauss_legendre(order)
    gaps = np.diff(sp)
    vals = np.empty_like(gaps)
    for start in range(0, gaps.size, chunk):
        sl = slice(start, min(start + chunk, gaps.size))
        h = gaps[sl]
        mid = sp[sl.start:sl.stop] + 0.5 * h
        nodes = mid[:, None] + np.outer(0.5 * h, gx)
        vals[sl] = (np.asarray(g(nodes)) * gw).sum(axis=1) * (0.5 * h)
    cum = np.concatenate([[0.0], np.cumsum(vals)])
    anchor = cum[np.nonzero(sp == 0.0)[0][0]]
    out = np.empty_like(pts)
    out[order_idx] = cum - anchor
    return out[:ys.size]


def lp_norm(values: np.ndarray, weights: np.ndarray, p: float) -> float:
    return float((weights @ np.abs(values) ** p) ** (1.0 / p))


def linf_norm(values: np.ndarray) -> float:
    return float(np.max(np.abs(values))) if np.asarray(values).size else 0.0
