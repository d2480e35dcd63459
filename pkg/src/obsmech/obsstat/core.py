"""Outcome distributions, R-overlaps, weak values and Kirkwood-Dirac tables.

Every quantity here is a trace ``Tr(rho X A_j)``. States are handled in
factored form ``rho = sum_k w_k |phi_k><phi_k|`` so a trace costs a few
operator applications on the columns ``phi_k`` and never a ``D x D`` product.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..errors import ContractError, UndefinedWeakValueError
from ..model import AXES, ChargeSet, CoarseObservable, DenseOperator, _frozen, apply_product
from ..spectral import DegenerateGrouping, SpectralDecomposition, _state_factor

P_FLOOR = 1e-13


def _as_operator(op):
    if hasattr(op, "apply"):
        return op
    return DenseOperator(np.asarray(op))


def _weighted_inner(a: np.ndarray, b: np.ndarray, w: np.ndarray) -> complex:
    """``sum_k w_k <a_k|b_k>`` over columns."""
    return complex(np.einsum("ik,ik,k->", a.conj(), b, w))


@dataclass(frozen=True)
class ObservableDistribution:
    probs: np.ndarray
    degeneracies: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.min(initial=0.0) < -1e-12 or abs(p.sum() - 1) > 1e-10:
            raise ContractError(f"not a distribution: {p}")
        object.__setattr__(self, "probs", _frozen(p))
        object.__setattr__(self, "degeneracies", _frozen(np.asarray(self.degeneracies)))
        object.__setattr__(self, "labels", tuple(self.labels))

    def __len__(self) -> int:
        return len(self.probs)


def normalize_probs(raw) -> np.ndarray:
    """Clamp tiny negatives and renormalize; refuse sums far from one."""
    p = np.asarray(raw, dtype=float).copy()
    total = p.sum()
    if abs(total - 1) > 1e-8:
        raise ContractError(f"probabilities sum to {total!r}; projectors are not complete")
    if p.min(initial=0.0) < -1e-12:
        raise ContractError(f"negative probability {p.min()!r}")
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def _projected(rho, obs: CoarseObservable):
    phi, w = _state_factor(rho)
    return phi, w, [P.apply(phi) for P in obs.projectors]


def measure_distribution(rho, obs: CoarseObservable) -> ObservableDistribution:
    """``p_j = Tr(rho A_j)``."""
    phi, w, pphi = _projected(rho, obs)
    raw = [_weighted_inner(phi, x, w).real for x in pphi]
    return ObservableDistribution(normalize_probs(raw), obs.degeneracies, obs.labels)


@dataclass(frozen=True)
class WeakValueRecord:
    """Raw traces ``Tr(rho O A_j)`` and weak values for ``O`` in H, Q^x, Q^y, Q^z.

    ``traces[name][j]`` is complex; ``weak[name][j]`` is NaN where ``p_j`` is
    at or below the floor (``defined[j]`` is False there).
    """

    probs: np.ndarray
    traces: Mapping[str, np.ndarray]
    weak: Mapping[str, np.ndarray]
    defined: np.ndarray
    labels: tuple[str, ...] = field(default=())

    @property
    def R(self) -> np.ndarray:
        return self.traces["H"].real

    def R_charge(self, axis: str) -> np.ndarray:
        return self.traces[axis].real

    @property
    def eps(self) -> np.ndarray:
        return self.weak["H"].real

    def q(self, axis: str) -> np.ndarray:
        return self.weak[axis].real


def trace_table(rho, obs: CoarseObservable, operators: Mapping[str, object],
                cache: dict | None = None) -> tuple[np.ndarray, dict]:
    """``p_j`` and ``Tr(rho O A_j)`` for each hermitian ``O`` in ``operators``.

    Uses ``Tr(rho O A) = sum_k w_k <O phi_k | A phi_k>``, valid for hermitian ``O``.
    ``cache`` (keyed by operator name) keeps ``O phi`` between calls on the same state.
    """
    phi, w, pphi = _projected(rho, obs)
    probs = np.array([_weighted_inner(phi, x, w).real for x in pphi])
    out = {}
    for name, op in operators.items():
        if cache is not None and name in cache:
            ophi = cache[name]
        else:
            ophi = _as_operator(op).apply(phi)
            if cache is not None:
                cache[name] = ophi
        out[name] = np.array([_weighted_inner(ophi, x, w) for x in pphi])
    return probs, out


def r_overlaps(rho, obs: CoarseObservable, H, charges: ChargeSet | None = None,
               p_floor: float = P_FLOOR, cache: dict | None = None) -> WeakValueRecord:
    ops = {"H": H}
    if charges is not None:
        ops.update({a: charges[a] for a in AXES})
    probs, traces = trace_table(rho, obs, ops, cache)
    defined = probs > p_floor
    safe = np.where(defined, probs, 1.0)
    weak = {k: np.where(defined, v / safe, np.nan + 0j) for k, v in traces.items()}
    return WeakValueRecord(_frozen(probs), traces, weak, _frozen(defined), tuple(obs.labels))


def weak_value(rho, O, postselect, p_floor: float = P_FLOOR) -> complex:
    """``Tr(rho O A) / Tr(rho A)`` for any (not necessarily hermitian) ``O``."""
    phi, w = _state_factor(rho)
    A = _as_operator(postselect)
    aphi = A.apply(phi)
    p = _weighted_inner(phi, aphi, w).real
    if p <= p_floor:
        raise UndefinedWeakValueError(f"postselection probability {p:.3g} is below the floor")
    num = _weighted_inner(phi, _as_operator(O).apply(aphi), w)
    return num / p


@dataclass(frozen=True)
class Conditioning:
    """A complete family of orthogonal projectors written in one orthonormal basis.

    ``to_coords(v)`` returns ``V^dagger v``; basis vector ``m`` belongs to
    block ``labels[m]``, whose eigenvalue is ``values[labels[m]]``.
    """

    kind: str
    to_coords: object = field(repr=False)
    labels: np.ndarray = field(repr=False)
    values: np.ndarray
    from_coords: object = field(default=None, repr=False)

    @property
    def n_blocks(self) -> int:
        return len(self.values)

    def block_sums(self, a: np.ndarray, b: np.ndarray, w: np.ndarray) -> np.ndarray:
        """``sum_k w_k <a_k| P_n |b_k>`` for every block ``n``."""
        ca, cb = self.to_coords(a), self.to_coords(b)
        per = np.einsum("mk,mk,k->m", ca.conj(), cb, w)
        return np.bincount(self.labels, weights=per.real, minlength=self.n_blocks) + 1j * np.bincount(
            self.labels, weights=per.imag, minlength=self.n_blocks
        )


def energy_conditioning(sd: SpectralDecomposition, grouping: DegenerateGrouping) -> Conditioning:
    U = sd.eigenvectors
    return Conditioning("energy", lambda v: U.conj().T @ v, grouping.labels(),
                        np.asarray(grouping.group_energies), lambda c: U @ c)


def charge_conditioning(charges: ChargeSet, axis: str) -> Conditioning:
    """Eigenprojectors of ``Q^axis`` from the site-wise rotation to the sigma^z basis.

    Block ``mu`` collects basis states with ``mu`` spins down in the local
    eigenbasis of ``sigma^axis``; its eigenvalue is ``scale * (N - 2 mu)``.
    """
    from ..model import LOCAL_EIGENBASIS

    n = charges.n_sites
    V = [LOCAL_EIGENBASIS[axis]] * n
    Vh = [LOCAL_EIGENBASIS[axis].conj().T] * n
    down = np.array([bin(i).count("1") for i in range(2**n)])
    values = charges.scale * (n - 2 * np.arange(n + 1))
    return Conditioning(f"charge-{axis}", lambda v: apply_product(Vh, v), down, values.astype(float),
                        lambda c: apply_product(V, c))


def charge_conditioning_dense(charges: ChargeSet, axis: str) -> Conditioning:
    """Same projectors obtained by diagonalizing ``Q^axis`` and grouping its levels."""
    from ..spectral import diagonalize, group_levels

    Q = charges[axis].to_dense()
    sd = diagonalize(DenseOperator(Q, hermitian=True))
    g = group_levels(sd)
    U = sd.eigenvectors
    return Conditioning(f"charge-{axis}", lambda v: U.conj().T @ v, g.labels(),
                        np.asarray(g.group_energies), lambda c: U @ c)


@dataclass(frozen=True)
class KDQTable:
    entries: np.ndarray
    kind: str
    values: np.ndarray

    @property
    def outcome_marginal(self) -> np.ndarray:
        return self.entries.sum(axis=1)

    @property
    def conditioning_marginal(self) -> np.ndarray:
        return self.entries.sum(axis=0)


def kdq_table(rho, obs: CoarseObservable, conditioning: Conditioning) -> KDQTable:
    """``K[j, n] = Tr(A_j rho P_n) = sum_k w_k <P_n phi_k | A_j phi_k>``."""
    phi, w, pphi = _projected(rho, obs)
    K = np.array([conditioning.block_sums(phi, x, w) for x in pphi])
    total = K.sum()
    if abs(total - _weighted_inner(phi, phi, w)) > 1e-8:
        raise ContractError(f"conditioning projectors are not complete (sum {total:.3g})")
    return KDQTable(_frozen(K), conditioning.kind, conditioning.values)


def shannon_entropy(p, degeneracies=None) -> float:
    """``-sum p log p`` in nats, or ``-sum p log(p/d)`` when degeneracies are given."""
    p = np.asarray(getattr(p, "probs", p), dtype=float)
    nz = p > 0
    if degeneracies is None:
        return float(-np.sum(p[nz] * np.log(p[nz])))
    d = np.asarray(degeneracies, dtype=float)
    return float(-np.sum(p[nz] * np.log(p[nz] / d[nz])))


def tvd(p, q) -> float:
    p = np.asarray(getattr(p, "probs", p), dtype=float)
    q = np.asarray(getattr(q, "probs", q), dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch {p.shape} vs {q.shape}")
    return float(0.5 * np.abs(p - q).sum())
