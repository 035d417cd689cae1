"""Sparse linear solves and the damped Newton driver.

Direct factorization (scipy splu) is the workhorse at desk scale; Newton
globalization halves the step until the iterate is admissible and the
residual norm does not grow, which is required because the state law is
singular at p = 0.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NewtonError, SolverError


@dataclass
class SparseSystem:
    matrix: sp.spmatrix
    rhs: np.ndarray


@dataclass
class NewtonConfig:
    abs_tol: float = 1e-11
    rel_tol: float = 1e-10
    max_iter: int = 50
    max_halvings: int = 30
    max_nonmonotone: int = 8

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0 or self.max_iter < 1:
            raise ValueError("Newton tolerances must be positive and max_iter >= 1")


@dataclass
class NewtonResult:
    x: np.ndarray
    iterations: int
    residual_norm: float


def solve(matrix, rhs, check=True):
    """Direct sparse (or dense) solve with an a-posteriori residual check."""
    rhs = np.asarray(rhs, dtype=float)
    if sp.issparse(matrix):
        A = matrix.tocsc()
        try:
            x = spla.splu(A).solve(rhs)
        except RuntimeError as exc:  # singular factorization
            raise SolverError(f"sparse factorization failed: {exc}") from exc
        norm_A = spla.norm(A, np.inf)
    else:
        A = np.asarray(matrix, dtype=float)
        try:
            x = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"dense solve failed: {exc}") from exc
        norm_A = np.linalg.norm(A, np.inf)
    if not np.all(np.isfinite(x)):
        raise SolverError("linear solve produced non-finite entries")
    if check:
        res = float(np.linalg.norm(A @ x - rhs, np.inf))
        bound = 1e-12 * (norm_A * float(np.linalg.norm(x, np.inf)) + float(np.linalg.norm(rhs, np.inf)))
        if res > max(bound, 1e-300) and res > 1e-8 * max(1.0, float(np.linalg.norm(rhs, np.inf))):
            raise SolverError(f"linear solve residual {res:.3e} exceeds bound {bound:.3e}",
                              residual=res)
    return x


def solve_linear(system):
    return solve(system.matrix, system.rhs)


def _levenberg_step(residual_fn, J, x, r, merit, admissible_fn, target):
    """Regularized Gauss-Newton step for nearly singular Jacobians.

    Solves (J^t J + lam D) d = -J^t r with growing lam; for large lam this is
    a scaled gradient step on |r|_2^2, so an admissible decreasing step exists
    unless the iterate is a stationary point of the merit.
    """
    if not sp.issparse(J):
        J = sp.csr_matrix(J)
    Jt = J.T.tocsr()
    g = Jt @ r
    JtJ = (Jt @ J).tocsr()
    dvals = np.maximum(JtJ.diagonal(), 1e-12 * float(np.max(JtJ.diagonal())) + 1e-300)
    lam = 1e-6
    for _ in range(18):
        try:
            d = solve(JtJ + sp.diags(lam * dvals), -g, check=False)
        except SolverError:
            lam *= 10.0
            continue
        alpha = 1.0
        for _ in range(12):
            x_new = x + alpha * d
            if admissible_fn is None or admissible_fn(x_new):
                r_new = np.asarray(residual_fn(x_new), dtype=float)
                merit_new = float(r_new @ r_new)
                norm_new = float(np.linalg.norm(r_new, np.inf))
                if merit_new <= merit * (1.0 - 1e-6 * alpha) or norm_new <= target:
                    return x_new, r_new, norm_new, merit_new
            alpha *= 0.5
        lam *= 10.0
    return None


def newton_solve(residual_fn, jacobian_fn, x0, cfg=None, admissible_fn=None):
    """Damped Newton iteration.

    Stops when ||r||_inf <= abs_tol + rel_tol * ||r(x0)||_inf.  Every accepted
    iterate satisfies ``admissible_fn``; the step is halved (up to
    ``max_halvings`` times) until it does and the residual norm has not
    increased.
    """
    cfg = cfg or NewtonConfig()
    x = np.array(x0, dtype=float)
    if admissible_fn is not None and not admissible_fn(x):
        raise NewtonError("initial Newton iterate is inadmissible")
    r = np.asarray(residual_fn(x), dtype=float)
    norm = float(np.linalg.norm(r, np.inf))
    merit = float(r @ r)
    target = cfg.abs_tol + cfg.rel_tol * norm
    # Grippo-style nonmonotone line search on |r|_2^2: accept against the
    # worst of the recent merits, so stiff steps may overshoot briefly while
    # global progress is still enforced
    history = [merit]
    nonmono = 0
    for it in range(cfg.max_iter):
        if norm <= target:
            return NewtonResult(x=x, iterations=it, residual_norm=norm)
        ref = max(history[-6:])
        delta = solve(jacobian_fn(x), -r)
        alpha = 1.0
        accepted = False
        fallback = None
        for _ in range(cfg.max_halvings + 1):
            x_new = x + alpha * delta
            if admissible_fn is None or admissible_fn(x_new):
                r_new = np.asarray(residual_fn(x_new), dtype=float)
                norm_new = float(np.linalg.norm(r_new, np.inf))
                merit_new = float(r_new @ r_new)
                if (merit_new <= ref * (1.0 - 1e-4 * alpha)
                        or norm_new <= norm * (1.0 + 1e-12)
                        or norm_new <= target):
                    accepted = True
                    break
                if fallback is None and np.isfinite(merit_new):
                    fallback = (x_new, r_new, norm_new, merit_new)
            alpha *= 0.5
        if not accepted:
            lm = _levenberg_step(residual_fn, jacobian_fn(x), x, r, merit,
                                 admissible_fn, target)
            if lm is not None:
                x_new, r_new, norm_new, merit_new = lm
                accepted = True
        if not accepted:
            # with piecewise flux kinks the residual can jump across a
            # discontinuity however small the step; accept the admissible
            # full step a bounded number of times and trust local Newton
            if fallback is not None and nonmono < cfg.max_nonmonotone:
                nonmono += 1
                x_new, r_new, norm_new, merit_new = fallback
            else:
                raise NewtonError("Newton damping exhausted", residual_norm=norm,
                                  iterations=it)
        x, r, norm, merit = x_new, r_new, norm_new, merit_new
        history.append(merit)
    if norm <= target:
        return NewtonResult(x=x, iterations=cfg.max_iter, residual_norm=norm)
    raise NewtonError(f"Newton did not converge in {cfg.max_iter} iterations "
                      f"(residual {norm:.3e}, target {target:.3e})",
                      residual_norm=norm, iterations=cfg.max_iter)
