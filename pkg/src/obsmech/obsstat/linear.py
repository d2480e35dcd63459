"""Affine models for the conditional energies and charges across a family of states."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import FitError


@dataclass(frozen=True)
class WVLinearModel:
    """``eps_j ~ gamma_j E + eta_j dE + chi_j`` and ``q^a_j ~ gamma^a_j q^a + chi^a_j``.

    ``energy`` has shape ``(n, 3)`` holding ``(gamma, eta, chi)`` per outcome;
    ``charges[a]`` has shape ``(n, 2)`` holding ``(gamma^a, chi^a)``.
    """

    energy: np.ndarray
    charges: dict
    fit_points: tuple[int, ...]
    residuals: dict = field(default_factory=dict)

    def predict_eps(self, E, dE) -> np.ndarray:
        X = np.column_stack([np.atleast_1d(E), np.atleast_1d(dE), np.ones(np.size(E))])
        return X @ self.energy.T

    def predict_q(self, axis: str, qa) -> np.ndarray:
        X = np.column_stack([np.atleast_1d(qa), np.ones(np.size(qa))])
        return X @ self.charges[axis].T


def lstsq_checked(X: np.ndarray, Y: np.ndarray, what: str, rcond: float = 1e-10) -> np.ndarray:
    s = np.linalg.svd(X, compute_uv=False)
    cond = s[0] / s[-1] if s[-1] > 0 else np.inf
    if X.shape[0] < X.shape[1] or s[-1] <= rcond * s[0]:
        raise FitError(f"rank-deficient design for {what}: shape {X.shape}, condition {cond:.3g}")
    return np.linalg.lstsq(X, Y, rcond=None)[0]


def fit_wv_linear(eps, E, dE, q=None, q_moments=None, fit_points=None, on_degenerate="raise") -> WVLinearModel:
    """Least-squares fit over the states listed in ``fit_points``.

    ``eps`` has shape ``(n_states, n_outcomes)``; ``q[a]`` likewise, with
    ``q_moments[a]`` the per-state charge mean. If a charge regressor is
    constant over the fit points the design is singular: ``on_degenerate =
    "raise"`` raises :class:`FitError`, ``"intercept"`` fits ``gamma^a = 0``
    and records the charge under ``residuals["degenerate"]``.
    """
    eps = np.asarray(eps, dtype=float)
    n_states = eps.shape[0]
    idx = np.arange(n_states) if fit_points is None else np.asarray(fit_points, dtype=int)
    held = np.setdiff1d(np.arange(n_states), idx)
    E, dE = np.asarray(E, dtype=float), np.asarray(dE, dtype=float)
    if idx.size < 3:
        raise FitError("the energy model needs at least three fit points")
    if idx.min() < 0 or idx.max() >= n_states:
        raise FitError(f"fit points {tuple(idx)} out of range for {n_states} states")
    X = np.column_stack([E, dE, np.ones(n_states)])
    energy = lstsq_checked(X[idx], eps[idx], "energy model").T
    resid = {"energy_fit": eps[idx] - X[idx] @ energy.T, "energy_held": eps[held] - X[held] @ energy.T,
             "degenerate": []}
    charges = {}
    for a, qa in (q or {}).items():
        qa = np.asarray(qa, dtype=float)
        m = np.asarray(q_moments[a], dtype=float)
        Xa = np.column_stack([m, np.ones(n_states)])
        try:
            coef = lstsq_checked(Xa[idx], qa[idx], f"charge model {a}").T
        except FitError:
            if on_degenerate != "intercept":
                raise
            coef = np.column_stack([np.zeros(qa.shape[1]), qa[idx].mean(axis=0)])
            resid["degenerate"].append(a)
        charges[a] = coef
        resid[f"{a}_fit"] = qa[idx] - Xa[idx] @ coef.T
        resid[f"{a}_held"] = qa[held] - Xa[held] @ coef.T
    return WVLinearModel(energy, charges, tuple(int(i) for i in idx), resid)
