"""ADMM solver for the unscaled Lasso ``||y - Z a||^2 + lam * ||a||_1``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import DimensionMismatch, NonConvergence


@dataclass(frozen=True)
class AdmmSettings:
    rho: float = 1.0
    abs_tol: float = 1e-6
    rel_tol: float = 1e-4
    max_iter: int = 2000
    relaxation: float = 1.5
    # residual balancing (Boyd et al. 2011, sec. 3.4.1)
    adaptive_rho: bool = True
    rho_mu: float = 10.0
    rho_tau: float = 2.0
    # exact active-set solve tried every ``polish_every`` iterations and at exit
    polish: bool = True
    polish_every: int = 25
    kkt_tol: float = 1e-9


@dataclass
class LassoSolution:
    coef: np.ndarray
    objective: float
    n_iter: int
    primal_residual: float
    dual_residual: float
    converged: bool = True


def penalty_weights(p, penalize_intercept=True):
    w = np.ones(p)
    if not penalize_intercept:
        w[0] = 0.0
    return w


def lasso_objective(z, y, coef, lam, penalize_intercept=True):
    r = y - z @ coef
    pen = penalty_weights(coef.size, penalize_intercept)
    return float(r @ r + lam * (pen @ np.abs(coef)))


def soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _polish(q, zty, c, thresh, kkt_tol, max_moves=None):
    """Exact Lasso solution seeded by the support and signs of ``c``, or None.

    Solves the stationarity condition restricted to an active set with fixed
    signs.  Coefficients whose sign flips are dropped and the worst
    violator among the inactive ones is added, until the full optimality
    conditions hold or ``max_moves`` adjustments have been made.
    """
    p = c.size
    free = thresh == 0.0
    active = (c != 0.0) | free
    sign = np.sign(c)
    scale = kkt_tol * max(1.0, float(np.max(np.abs(zty), initial=0.0)))
    max_moves = p if max_moves is None else max_moves
    for _ in range(max_moves + 1):
        idx = np.flatnonzero(active)
        a = np.zeros(p)
        if idx.size:
            rhs = zty[idx] - thresh[idx] * sign[idx]
            a[idx] = np.linalg.lstsq(q[np.ix_(idx, idx)], rhs, rcond=None)[0]
        flipped = active & ~free & (np.sign(a) != sign)
        if flipped.any():
            active &= ~flipped
            continue
        grad = zty - q @ a
        if np.any(np.abs(grad[idx] - thresh[idx] * sign[idx]) > scale):
            return None
        excess = np.where(active, -np.inf, np.abs(grad) - thresh)
        k = int(np.argmax(excess))
        if excess[k] <= scale:
            return a
        active[k] = True
        sign[k] = np.sign(grad[k])
    return None


def lasso_admm(z, y, lam, settings=None, penalize_intercept=True, warm_start=None,
               gram=None):
    """Solve the Lasso by ADMM on the split ``a = c``.

    The returned ``coef`` is the thresholded split variable, so exact zeros
    mark pruned coefficients.  When ``settings.polish`` is on, the support
    and signs of the iterate are periodically used for an exact active-set
    solve, which is returned as soon as it passes the optimality check.
    Column 0 of ``z`` is the constant and is penalized unless
    ``penalize_intercept`` is False.

    Parameters
    ----------
    z : ndarray of shape (N, p)
    y : ndarray of shape (N,)
    lam : float
        Penalty on the l1 norm; ``0`` gives least squares.
    warm_start : ndarray of shape (p,), optional
    gram : ndarray of shape (p, p), optional
        Precomputed ``z.T @ z``.

    Raises
    ------
    NonConvergence
        When ``max_iter`` is reached; the exception carries the iterate.
    """
    s = settings or AdmmSettings()
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    if z.ndim != 2 or y.shape != (z.shape[0],):
        raise DimensionMismatch(f"Z {z.shape} and y {y.shape} are not conformable")
    if lam < 0:
        raise ValueError("lam must be non-negative")
    n, p = z.shape
    q = 2.0 * (z.T @ z if gram is None else gram)
    zty = 2.0 * (z.T @ y)
    thresh = lam * penalty_weights(p, penalize_intercept)

    rho = s.rho
    factor = cho_factor(q + rho * np.eye(p))
    if warm_start is None:
        c = np.zeros(p)
    else:
        c = np.array(warm_start, dtype=float)
    u = np.zeros(p)
    sqrt_p = np.sqrt(p)
    r_norm = s_norm = np.inf
    for it in range(1, s.max_iter + 1):
        a = cho_solve(factor, zty + rho * (c - u))
        a_hat = s.relaxation * a + (1.0 - s.relaxation) * c
        c_old = c
        c = soft_threshold(a_hat + u, thresh / rho)
        u = u + a_hat - c

        r_norm = np.linalg.norm(a - c)
        s_norm = rho * np.linalg.norm(c - c_old)
        eps_pri = sqrt_p * s.abs_tol + s.rel_tol * max(np.linalg.norm(a), np.linalg.norm(c))
        eps_dual = sqrt_p * s.abs_tol + s.rel_tol * rho * np.linalg.norm(u)
        done = r_norm <= eps_pri and s_norm <= eps_dual
        if s.polish and (done or it % s.polish_every == 0):
            exact = _polish(q, zty, c, thresh, s.kkt_tol)
            if exact is not None:
                c = exact
                break
        if done:
            break
        if s.adaptive_rho:
            if r_norm > s.rho_mu * s_norm:
                scale = s.rho_tau
            elif s_norm > s.rho_mu * r_norm:
                scale = 1.0 / s.rho_tau
            else:
                continue
            rho *= scale
            u = u / scale
            factor = cho_factor(q + rho * np.eye(p))
    else:
        sol = LassoSolution(c, lasso_objective(z, y, c, lam, penalize_intercept),
                            s.max_iter, float(r_norm), float(s_norm), converged=False)
        raise NonConvergence(sol)
    return LassoSolution(c, lasso_objective(z, y, c, lam, penalize_intercept),
                         it, float(r_norm), float(s_norm))
