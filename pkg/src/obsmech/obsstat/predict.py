"""Equilibrium prediction from conditional energies and charges."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import AXES
from .core import P_FLOOR, ObservableDistribution, tvd
from .maxent import MultiplierSolution, solve_multipliers


@dataclass(frozen=True)
class Prediction:
    eps: np.ndarray
    q: dict
    targets: np.ndarray
    target_mode: str
    solution: MultiplierSolution
    p_est: np.ndarray
    tvd: float
    dropped: tuple[int, ...] = ()


def conditional_moments(p, R, R_charges, p_floor: float = P_FLOOR):
    """``eps_j = R_j / p_j`` and ``q^a_j = R^a_j / p_j`` (NaN where ``p_j`` is below the floor)."""
    p = np.asarray(p, dtype=float)
    ok = p > p_floor
    safe = np.where(ok, p, 1.0)
    eps = np.where(ok, np.asarray(R, dtype=float) / safe, np.nan)
    q = {a: np.where(ok, np.asarray(v, dtype=float) / safe, np.nan) for a, v in R_charges.items()}
    return eps, q, ok


def predict_equilibrium(p, R, R_charges, d, labels=None, targets=None, p_floor: float = P_FLOOR,
                        axes=AXES) -> Prediction:
    """Maximum-entropy estimate of the equilibrium distribution.

    ``p``, ``R``, ``R_charges`` are either exact equilibrium values or time
    averages. ``targets`` defaults to the internally consistent moments
    ``(sum_j R_j, sum_j R^a_j)``; pass a mapping with keys ``E`` and ``q_<a>``
    (e.g. closed-form moments) to use external targets instead. Outcomes with
    ``p_j`` below the floor have no defined conditional moments and are
    assigned zero probability.
    """
    p = np.asarray(p, dtype=float)
    d = np.asarray(d)
    eps, q, ok = conditional_moments(p, R, {a: R_charges[a] for a in axes}, p_floor)
    if targets is None:
        T = np.array([np.sum(R)] + [np.sum(R_charges[a]) for a in axes], dtype=float)
        mode = "internal"
    else:
        T = np.array([targets["E"]] + [targets[f"q_{a}"] for a in axes], dtype=float)
        mode = "external"
    keep = np.flatnonzero(ok)
    lab = list(labels) if labels is not None else [str(j) for j in range(p.size)]
    sol = solve_multipliers(eps[keep], [q[a][keep] for a in axes], d[keep], T,
                            labels=[lab[j] for j in keep])
    p_est = np.zeros_like(p)
    p_est[keep] = sol.p_est.probs
    return Prediction(eps, q, T, mode, sol, p_est, tvd(p, p_est), tuple(int(j) for j in np.flatnonzero(~ok)))
