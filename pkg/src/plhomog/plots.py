"""Figure rendering for the report paths: oscillating-gradient profiles,
remainder tables and corrector fields, written as PNG next to the delimited
output."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, figdir, name: str) -> str:
    os.makedirs(figdir, exist_ok=True)
    path = os.path.join(figdir, name)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_two_scale_profiles(reports, figdir) -> list[str]:
    """One figure per epsilon: exact oscillating gradient vs its two-scale
    approximation (requires reports computed with keep_profile=True)."""
    paths = []
    for rep in reports:
        if rep.profile is None:
            continue
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.plot(rep.profile["x"], rep.profile["grad_u_eps"], lw=0.8,
                label="exact solution")
        ax.plot(rep.profile["x"], rep.profile["two_scale"], lw=0.8, ls="--",
                label=f"{rep.kind} two-scale approx.")
        ax.set_xlabel("x")
        ax.set_ylabel("gradient")
        ax.set_title(f"eps = {rep.eps:g}, {rep.kind} corrector")
        ax.legend(loc="best", fontsize=8)
        paths.append(_save(fig, figdir, f"profile_{rep.kind}_eps{rep.eps:g}.png"))
    return paths


def plot_remainder_table(rows, figdir, name: str = "remainders.png") -> str:
    """Log-log remainder norms against epsilon for both corrector kinds."""
    eps = [r.eps for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.loglog(eps, [r.r_per_linf for r in rows], "o-", label="periodic")
    ax1.loglog(eps, [r.r_linf for r in rows], "s-", label="with defect")
    ax1.set_xlabel("eps")
    ax1.set_ylabel("Linf remainder")
    ax1.legend()
    ax2.loglog(eps, [r.r_per_l2 for r in rows], "o-", label="periodic")
    ax2.loglog(eps, [r.r_l2 for r in rows], "s-", label="with defect")
    ax2.set_xlabel("eps")
    ax2.set_ylabel("L2 remainder")
    ax2.legend()
    fig.tight_layout()
    return _save(fig, figdir, name)


def plot_convergence_series(series, figdir, name: str = "convergence.png") -> str:
    eps = [r.eps for r in series.records]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.loglog(eps, [r.u_err_lp for r in series.records], "o-")
    ax1.set_xlabel("eps")
    ax1.set_ylabel("Lp error of u")
    ax2.loglog(eps, [max(r.flux_res[0], 1e-300) for r in series.records], "o-",
               label="test 1")
    ax2.loglog(eps, [max(r.r_l2, 1e-300) for r in series.records], "s-",
               label="remainder L2")
    ax2.set_xlabel("eps")
    ax2.legend()
    fig.tight_layout()
    return _save(fig, figdir, name)


def plot_cell_solution(solve, figdir, name: str = "cell.png") -> str:
    grid = solve.grid
    fig, ax = plt.subplots(figsize=(6, 4))
    if grid.dim == 1:
        mids = grid.midpoints()
        ax.step(mids, solve.grad_field[:, 0], where="mid")
        ax.set_xlabel("y")
        ax.set_ylabel("xi + corrector gradient")
    else:
        mag = np.linalg.norm(solve.grad_field, axis=-1)
        im = ax.imshow(mag.T, origin="lower", extent=(-0.5, 0.5, -0.5, 0.5))
        fig.colorbar(im, ax=ax, label="|xi + grad w|")
    ax.set_title(f"cell solve, xi = {np.round(solve.xi, 6).tolist()}")
    return _save(fig, figdir, name)


def plot_defect_solution(solve, figdir, name: str = "defect.png") -> str:
    domain = solve.field.domain
    fig, ax = plt.subplots(figsize=(7, 4))
    if domain.dim == 1:
        mids = domain.midpoints()
        ax.plot(mids, solve.grad[:, 0], lw=0.8)
        ax.set_xlabel("y")
        ax.set_ylabel("defect corrector gradient")
    else:
        mag = np.linalg.norm(solve.grad, axis=-1)
        r = domain.half_width
        im = ax.imshow(mag.T, origin="lower", extent=(-r, r, -r, r))
        fig.colorbar(im, ax=ax, label="|grad defect corrector|")
    ax.set_title(f"defect solve, xi = {np.round(solve.xi, 6).tolist()}")
    return _save(fig, figdir, name)
