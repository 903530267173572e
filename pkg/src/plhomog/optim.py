"""Line-searched convex minimizer shared by the cell and defect solvers.

Barzilai-Borwein steps on the preconditioned gradient with Armijo
backtracking; the energies are C^1 but lose C^2 smoothness where the
corrected field vanishes, so first-order steps drive the bulk of the
minimization and an optional Newton polish takes over near the minimizer
(where the field is bounded away from zero under non-degeneracy).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NoConvergence(RuntimeError):
    def __init__(self, max_iter: int, residual: float):
        super().__init__(f"no convergence after {max_iter} iterations, "
                         f"residual {residual:.3e}")
        self.max_iter = max_iter
        self.residual = residual


@dataclass
class MinimizeResult:
    x: np.ndarray
    value: float
    residual: float
    iterations: int
    converged: bool
    energy_trace: list[float] = field(default_factory=list)
    newton_steps: int = 0


def minimize_convex(value_and_grad, x0: np.ndarray, *, precond, tol: float,
                    residual_scale: float, max_iter: int = 500,
                    project=None, newton_solve=None, newton_trigger: float = 1e-3,
                    armijo: float = 1e-4) -> MinimizeResult:
    """Minimize a smooth convex energy to preconditioned-residual tolerance.

    `value_and_grad(x)` returns (E, g); `precond(g)` applies the approximate
    inverse Hessian; `newton_solve(x, g)`, when given, returns a descent step
    or None if the exact Hessian is unavailable (degenerate weight).
    Convergence means ||precond(g)||_2 <= tol * residual_scale.
    """
    x = np.array(x0, dtype=float)
    if project is not None:
        x = project(x)
    scale = max(residual_scale, 1e-300)
    value, grad = value_and_grad(x)
    trace = [value]
    step = 1.0
    newton_steps = 0

    for it in range(1, max_iter + 1):
        pg = precond(grad)
        residual = float(np.linalg.norm(pg)) / scale
        if residual <= tol:
            return MinimizeResult(x, value, residual, it - 1, True, trace,
                                  newton_steps)

        direction = None
        if newton_solve is not None and residual <= newton_trigger:
            direction = newton_solve(x, grad)
            if direction is not None:
                newton_steps += 1
        used_newton = direction is not None
        if direction is None:
            direction = -pg
        slope = float(np.dot(grad.ravel(), direction.ravel()))
        if slope >= 0.0:       # safeguard: fall back to steepest descent
            direction = -pg
            slope = float(np.dot(grad.ravel(), direction.ravel()))
            used_newton = False

        t = 1.0 if used_newton else min(max(step, 1e-8), 1e8)
        new_x = new_value = new_grad = None
        for _ in range(60):
            cand = x + t * direction
            if project is not None:
                cand = project(cand)
            cand_value, cand_grad = value_and_grad(cand)
            if cand_value <= value + armijo * t * slope or cand_value <= value:
                new_x, new_value, new_grad = cand, cand_value, cand_grad
                break
            t *= 0.5
        if new_x is None:      # line search hit the floating-point floor
            break

        s = (new_x - x).ravel()
        y = (new_grad - grad).ravel()
        sy = float(np.dot(s, y))
        if sy > 0.0:
            py = precond(new_grad - grad).ravel()
            ypy = float(np.dot(y, py))
            step = sy / ypy if ypy > 0 else 1.0
        else:
            step = 1.0
        x, value, grad = new_x, new_value, new_grad
        trace.append(value)

    pg = precond(grad)
    residual = float(np.linalg.norm(pg)) / scale
    if residual <= tol:
        return MinimizeResult(x, value, residual, max_iter, True, trace,
                              newton_steps)
    raise NoConvergence(max_iter, residual)
