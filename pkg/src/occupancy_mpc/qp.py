"""Dense box-constrained convex QP by projected Newton iteration.

Minimizes ``0.5 x'Hx + g'x`` subject to ``lower <= x <= upper`` with ``H``
symmetric positive semidefinite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverFailure

ARMIJO = 0.1
STEP_SHRINK = 0.5
MIN_STEP = 1e-20


@dataclass
class QpResult:
    x: np.ndarray
    objective: float
    iterations: int
    kkt_residual: float


def projected_gradient(x, grad, lower, upper) -> np.ndarray:
    """Components of the gradient that violate first-order optimality."""
    pg = grad.copy()
    at_lower = x <= lower
    at_upper = x >= upper
    pg[at_lower] = np.minimum(grad[at_lower], 0.0)
    pg[at_upper] = np.maximum(grad[at_upper], 0.0)
    return pg


def _newton_direction(H_ff, grad_f):
    scale = max(1.0, float(np.max(np.abs(np.diag(H_ff)))) if H_ff.size else 1.0)
    ridge = 1e-13 * scale
    eye = np.eye(H_ff.shape[0])
    for _ in range(8):
        try:
            L = np.linalg.cholesky(H_ff + ridge * eye)
        except np.linalg.LinAlgError:
            ridge *= 100.0
            continue
        y = np.linalg.solve(L, -grad_f)
        return np.linalg.solve(L.T, y)
    raise SolverFailure("free-set Hessian is not positive semidefinite")


def _arc_search(objective, x, value, grad, direction, lower, upper):
    step = 1.0
    while step >= MIN_STEP:
        candidate = np.clip(x + step * direction, lower, upper)
        cand_value = objective(candidate)
        decrease = grad @ (candidate - x)
        if decrease < 0 and cand_value <= value + ARMIJO * decrease:
            return candidate, cand_value
        step *= STEP_SHRINK
    return None


def solve_box_qp(H, g, lower, upper, x0=None, tol: float = 1e-8, max_iter: int = 200) -> QpResult:
    """Projected Newton with Armijo backtracking along the projection arc.

    Converges when the infinity norm of the projected gradient falls below
    ``tol * max(1, |g|_inf, |H|_inf)``.
    """
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if np.any(lower > upper):
        raise ValueError("lower bound exceeds upper bound")
    x = np.clip(lower if x0 is None else np.asarray(x0, dtype=float), lower, upper)
    threshold = tol * max(1.0, float(np.max(np.abs(g), initial=0.0)), float(np.max(np.abs(H), initial=0.0)))

    def objective(v):
        return 0.5 * v @ H @ v + g @ v

    value = objective(x)
    for it in range(max_iter + 1):
        grad = H @ x + g
        residual = float(np.max(np.abs(projected_gradient(x, grad, lower, upper)), initial=0.0))
        if residual <= threshold:
            return QpResult(x, float(value), it, residual)
        if it == max_iter:
            break
        clamped = ((x <= lower) & (grad > 0)) | ((x >= upper) & (grad < 0))
        free = ~clamped
        direction = np.zeros_like(x)
        direction[free] = _newton_direction(H[np.ix_(free, free)], grad[free])

        found = _arc_search(objective, x, value, grad, direction, lower, upper)
        if found is None:
            # projected Newton can fail to descend when cross terms couple free and clamped sets
            curvature = max(float(np.max(np.diag(H), initial=0.0)), 1e-300)
            found = _arc_search(objective, x, value, grad, -grad / curvature, lower, upper)
        if found is None:
            raise SolverFailure(f"line search stalled at iteration {it}, residual {residual:.3g}")
        x, value = found
    raise SolverFailure(f"no convergence in {max_iter} iterations (residual {residual:.3g} > {threshold:.3g})")
