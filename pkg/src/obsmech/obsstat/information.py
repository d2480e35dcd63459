"""Mutual information between energy (or charge) eigenspaces and observable outcomes."""
from __future__ import annotations

import numpy as np

from ..model import AXES, ChargeSet, CoarseObservable, apply_local
from ..spectral import EquilibriumState
from .core import Conditioning, charge_conditioning


def _entropy(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def _mi(joint: np.ndarray) -> float:
    """Mutual information of a 2-D joint distribution."""
    return _entropy(joint.sum(axis=1)) + _entropy(joint.sum(axis=0)) - _entropy(joint.ravel())


def product_basis_coords(obs: CoarseObservable, vecs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Coordinates in the complete basis ``|j, s>`` and the outcome ``j`` of each basis vector.

    Support sites are rotated to the observable's local eigenbasis; all other
    sites stay computational.
    """
    n = obs.n_sites
    first, last = obs.support_sites[0], obs.support_sites[-1]
    coords = apply_local(obs.local_basis.conj().T, first, n, vecs)
    k = len(obs.support_sites)
    outcome = (np.arange(2**n) >> (n - last)) & (2**k - 1)
    return coords, outcome


def mutual_information(state: EquilibriumState, obs: CoarseObservable, charges: ChargeSet | None = None,
                       basis=None) -> dict:
    """Classical channel diagnostics at equilibrium.

    ``basis`` optionally replaces the product basis: a pair ``(V, outcome)``
    with the complete basis as columns of ``V`` and the outcome of each column.
    ``I_AH`` uses the coarse outcomes ``j``; ``I_AH_fine`` resolves the full
    basis ``|j, s>``. With ``charges`` the same pair is reported for each
    charge's eigenspaces (``I_QxA``, ``I_QxA_fine``, ...).
    """
    phi, w, levels = state.components, state.weights, state.levels
    if basis is None:
        coords_of = lambda v: product_basis_coords(obs, v)[0]
        outcome = product_basis_coords(obs, phi[:, :1])[1]
    else:
        V, outcome = basis
        coords_of = lambda v: V.conj().T @ v
        outcome = np.asarray(outcome)
    n_out = len(obs)

    # p(js; n): every dephased component lies in one level
    c = coords_of(phi)
    per_comp = np.abs(c) ** 2 * w
    joint = np.zeros((c.shape[0], state.grouping.n_levels))
    np.add.at(joint.T, levels, per_comp.T)
    coarse = np.zeros((n_out, joint.shape[1]))
    np.add.at(coarse, outcome, joint)
    p_h = joint.sum(axis=0)
    out = {
        "S_H": _entropy(p_h),
        "S_A": _entropy(coarse.sum(axis=1)),
        "S_A_fine": _entropy(joint.sum(axis=1)),
        "I_AH": _mi(coarse),
        "I_AH_fine": _mi(joint),
    }
    if charges is not None:
        for a in AXES:
            out[f"I_Q{a}A_fine"], out[f"I_Q{a}A"] = _charge_mi(phi, w, charge_conditioning(charges, a),
                                                                 coords_of, outcome, n_out)
    return out


def _charge_mi(phi, w, cond: Conditioning, coords_of, outcome, n_out):
    cq = cond.to_coords(phi)
    cols = []
    for mu in range(cond.n_blocks):
        mask = (cond.labels == mu)[:, None]
        v = cond.from_coords(np.where(mask, cq, 0))
        cols.append(np.abs(coords_of(v)) ** 2 @ w)
    joint = np.array(cols).T
    coarse = np.zeros((n_out, joint.shape[1]))
    np.add.at(coarse, outcome, joint)
    return _mi(joint), _mi(coarse)
