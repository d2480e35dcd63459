"""Maximum-entropy outcome distributions subject to energy and charge constraints.

The estimate is ``p_j = d_j exp(-beta eps_j - mu . q_j) / Z``. Multipliers
minimize the convex dual ``log Z(x) + x . T`` with ``x = (beta, mu)`` and
``T`` the target moments. With few outcomes the moment map is not injective,
so the dual is minimized inside the span of the centred features; this is a
pseudo-inverse Newton method and returns the minimum-norm multipliers.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp

from ..errors import ContractError, ConvergenceError, InfeasibleTargetsError
from .core import ObservableDistribution

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MultiplierSolution:
    lambda_N: float
    beta: float
    mu: np.ndarray
    Z: float
    p_est: ObservableDistribution
    convergence: dict = field(default_factory=dict)

    @property
    def multipliers(self) -> np.ndarray:
        return np.concatenate([[self.beta], self.mu])


def _features(eps, q) -> np.ndarray:
    eps = np.asarray(eps, dtype=float)
    cols = [eps] + [np.asarray(c, dtype=float) for c in (q or [])]
    F = np.column_stack(cols)
    if not np.all(np.isfinite(F)):
        raise ContractError("features must be finite")
    return F


def gibbs_probs(F: np.ndarray, d: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, float]:
    """``p = d exp(-F x) / Z`` and ``log Z``."""
    logits = np.log(d) - F @ x
    logZ = float(logsumexp(logits))
    return np.exp(logits - logZ), logZ


def interior_margin(F: np.ndarray, T: np.ndarray) -> float:
    """Largest ``t`` with a distribution ``p >= t`` matching the moments, or -inf if none.

    Solved as a linear program; ``t > 0`` means the targets are in the relative
    interior of the moment polytope, where finite multipliers exist.
    """
    n, m = F.shape
    # variables (p_1..p_n, t); maximize t
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_eq = np.zeros((m + 1, n + 1))
    A_eq[0, :n] = 1.0
    A_eq[1:, :n] = F.T
    b_eq = np.concatenate([[1.0], T])
    A_ub = np.hstack([-np.eye(n), np.ones((n, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(n), A_eq=A_eq, b_eq=b_eq,
                  bounds=[(0, None)] * n + [(None, 1.0)], method="highs")
    if res.status == 2:
        return -np.inf
    if res.status != 0:
        raise ConvergenceError(f"feasibility program failed: {res.message}")
    return float(res.x[-1])


def _grad_norm(F, W, T, p) -> float:
    return float(np.linalg.norm(W.T @ (T - F.T @ p)))


def solve_multipliers(eps, q=None, d=None, targets=None, labels=None, *, max_iter: int = 200,
                      tol: float = 1e-10, check_feasible: bool = True) -> MultiplierSolution:
    """Minimum-norm multipliers reproducing the target moments.

    ``q`` is a sequence of 0-3 charge feature vectors and ``targets`` the
    matching ``(E, q^a...)`` values.
    """
    F = _features(eps, q)
    n, m = F.shape
    d = np.ones(n) if d is None else np.asarray(d, dtype=float)
    if d.shape != (n,) or np.any(d < 1):
        raise ContractError("degeneracies must be >= 1, one per outcome")
    T = np.asarray(targets, dtype=float).ravel()
    if T.shape != (m,):
        raise ContractError(f"expected {m} targets, got {T.size}")
    labels = tuple(labels) if labels is not None else tuple(str(j) for j in range(n))

    scale = max(1.0, float(np.abs(F).max()))
    if check_feasible:
        margin = interior_margin(F, T)
        if margin <= 1e-12:
            raise InfeasibleTargetsError(
                f"targets {T} are outside (or on the boundary of) the moment polytope; margin {margin:.3g}")

    # restrict to the span of the centred features
    G = F - F.mean(axis=0)
    _, s, Vt = np.linalg.svd(G, full_matrices=False)
    rank = int(np.sum(s > 1e-12 * max(scale, s.max(initial=0.0))))
    W = Vt[:rank].T  # m x rank
    residual_out = (T - F.mean(axis=0)) @ (np.eye(m) - W @ W.T)
    if np.abs(residual_out).max(initial=0.0) > 1e-9 * scale:
        raise InfeasibleTargetsError("targets have a component outside the feature span")

    def dual(y):
        p, logZ = gibbs_probs(F, d, W @ y)
        return logZ + (W @ y) @ T, p, logZ

    y = np.zeros(rank)
    f, p, logZ = dual(y)
    it, gnorm = 0, np.inf
    for it in range(1, max_iter + 1):
        mom = F.T @ p
        g = W.T @ (T - mom)
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            break
        Fc = (F - mom) @ W
        Hs = Fc.T @ (p[:, None] * Fc)
        try:
            step = -np.linalg.solve(Hs, g)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(Hs, g, rcond=None)[0]
        f_new, p_new, logZ_new = dual(y + step)
        flat = abs(f_new - f) <= 1e-13 * (1 + abs(f)) and _grad_norm(F, W, T, p_new) < gnorm
        if f_new > f + 1e-4 * (g @ step) and not flat:
            # backtrack; ``flat`` covers the end game where f no longer resolves the decrease
            t = 0.5
            while t > 1e-12:
                f_new, p_new, logZ_new = dual(y + t * step)
                if f_new <= f + 1e-4 * t * (g @ step):
                    break
                t *= 0.5
            else:
                break
            step = t * step
        y, f, p, logZ = y + step, f_new, p_new, logZ_new
    else:
        it = max_iter
    mom = F.T @ p
    gnorm = float(np.linalg.norm(W.T @ (T - mom)))
    diag = {"iterations": it, "grad_norm": gnorm, "method": "newton-pinv", "rank": rank}
    if gnorm > tol:
        raise ConvergenceError(f"multiplier solve stalled at |g| = {gnorm:.3g} after {it} iterations", diag)
    x = W @ y
    return MultiplierSolution(
        lambda_N=logZ,
        beta=float(x[0]),
        mu=x[1:].copy(),
        Z=float(np.exp(logZ)),
        p_est=ObservableDistribution(p, d.astype(int) if np.all(d == np.round(d)) else d, labels),
        convergence=diag,
    )


def solve_multipliers_direct(p, eps, q=None, d=None, labels=None) -> MultiplierSolution:
    """Least-squares minimum-norm solve of ``-log(p_j/d_j) = lambda + beta eps_j + mu . q_j``.

    Needs strictly positive ``p``. The returned ``p_est`` is the Gibbs form
    built from the fitted multipliers.
    """
    F = _features(eps, q)
    n = F.shape[0]
    d = np.ones(n) if d is None else np.asarray(d, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0):
        raise ContractError("direct mode needs strictly positive probabilities")
    A = np.column_stack([np.ones(n), F])
    sol, *_ = np.linalg.lstsq(A, -np.log(p / d), rcond=1e-12)
    x = sol[1:]
    pe, logZ = gibbs_probs(F, d, x)
    labels = tuple(labels) if labels is not None else tuple(str(j) for j in range(n))
    return MultiplierSolution(
        lambda_N=logZ,
        beta=float(x[0]),
        mu=x[1:].copy(),
        Z=float(np.exp(logZ)),
        p_est=ObservableDistribution(pe, d, labels),
        convergence={"iterations": 1, "grad_norm": float(np.linalg.norm(F.T @ (pe - p))), "method": "direct-lstsq"},
    )
