"""Eigendecomposition, degenerate-level grouping, exact dynamics and dephasing."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, ContractError
from .model import DenseOperator, PureState, _frozen

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    diag_residual: float

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]


@dataclass(frozen=True)
class DegenerateGrouping:
    """Contiguous blocks of the sorted spectrum treated as one energy level.

    ``bounds[n]:bounds[n+1]`` indexes the eigenvectors of level ``n``.
    """

    bounds: np.ndarray
    tolerance: float
    group_energies: np.ndarray
    degeneracies: np.ndarray
    fallback: bool = False

    @property
    def n_levels(self) -> int:
        return len(self.degeneracies)

    def slices(self):
        for a, b in zip(self.bounds[:-1], self.bounds[1:]):
            yield slice(int(a), int(b))

    def labels(self) -> np.ndarray:
        """Level index of every eigenvector."""
        return np.repeat(np.arange(self.n_levels), self.degeneracies)


def diagonalize(H: DenseOperator) -> SpectralDecomposition:
    """Dense Hermitian eigensolve with a reproducible eigenvector phase.

    Each eigenvector's largest-magnitude component is made real and positive.
    """
    m = H.entries
    if not H.hermitian:
        scale = max(float(np.abs(m).max(initial=0.0)), 1e-300)
        if np.abs(m - m.conj().T).max(initial=0.0) > 1e-12 * scale:
            raise ContractError("diagonalize needs a hermitian matrix")
    w, U = np.linalg.eigh(m)
    pivot = np.abs(U).argmax(axis=0)
    phase = U[pivot, np.arange(U.shape[1])]
    U = U * (np.abs(phase) / phase).conj() if np.iscomplexobj(U) else U * np.sign(phase)
    resid = U.conj().T @ m @ U
    resid[np.diag_indices_from(resid)] -= w
    return SpectralDecomposition(_frozen(w), _frozen(U), float(np.linalg.norm(resid)))


def jump_tolerance(eigenvalues: np.ndarray, diag_residual: float, safety_factor: float = 10.0):
    """Tolerance separating round-off gaps from physical level spacings.

    Sorted nonzero gaps are compared on a log10 scale; the largest jump between
    consecutive log-gaps splits noise from physics, and the largest gap on the
    noise side, times ``safety_factor``, is the tolerance (never below the
    diagonalization residual).

    Returns ``(tau, fallback)``. ``fallback`` is set when the spectrum shows no
    noise class at all (fewer than two distinct gaps, or every gap far above
    round-off), in which case ``tau = max(diag_residual, 1e-10)``.
    """
    gaps = np.diff(np.sort(eigenvalues))
    nonzero = gaps[gaps > 0]
    if nonzero.size == 0:
        return float(diag_residual), False
    logs = np.sort(np.log10(nonzero))
    if np.unique(logs).size < 2:
        return max(float(diag_residual), 1e-10), True
    k = int(np.argmax(np.diff(logs)))
    below = 10.0 ** logs[k]
    scale = max(1.0, float(np.abs(eigenvalues).max()))
    if below > 1e-8 * scale:
        return max(float(diag_residual), 1e-10), True
    return max(float(diag_residual), safety_factor * below), False


def group_levels(sd: SpectralDecomposition, safety_factor: float = 10.0) -> DegenerateGrouping:
    """Cluster numerically degenerate eigenvalues by transitive chaining."""
    w = np.asarray(sd.eigenvalues)
    if np.any(np.diff(w) < 0):
        raise ContractError("eigenvalues must be sorted ascending")
    tau, fallback = jump_tolerance(w, sd.diag_residual, safety_factor)
    if fallback:
        log.warning("no noise class in the spectrum gaps; tau falls back to %.3g", tau)
    cuts = np.flatnonzero(np.diff(w) > tau) + 1
    bounds = np.concatenate([[0], cuts, [w.size]])
    energies = np.array([w[a:b].mean() for a, b in zip(bounds[:-1], bounds[1:])])
    return DegenerateGrouping(_frozen(bounds), tau, _frozen(energies), _frozen(np.diff(bounds)), fallback)


@dataclass(frozen=True)
class EquilibriumState:
    """Dephased state ``rho_inf = sum_k w_k |phi_k><phi_k|``.

    For a pure initial state ``phi_n = Pi_n psi`` (one column per level with
    nonzero weight) and ``w_k = 1``. ``energy_probs[n] = Tr(Pi_n rho)``.
    """

    components: np.ndarray
    weights: np.ndarray
    energy_probs: np.ndarray
    grouping: DegenerateGrouping = field(repr=False)
    levels: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.components.shape[0]

    @property
    def rho_inf(self) -> DenseOperator:
        m = (self.components * self.weights) @ self.components.conj().T
        return DenseOperator(0.5 * (m + m.conj().T), hermitian=True)

    def energy_components(self) -> list[np.ndarray]:
        """Normalized projections ``|lambda_n>`` for levels with weight (pure input)."""
        norms = np.linalg.norm(self.components, axis=0)
        return [self.components[:, k] / norms[k] for k in range(self.components.shape[1])]


def _state_factor(rho) -> tuple[np.ndarray, np.ndarray]:
    """``(Phi, w)`` with ``rho = Phi diag(w) Phi^dagger``."""
    if isinstance(rho, PureState):
        return rho.amplitudes[:, None], np.ones(1)
    if isinstance(rho, EquilibriumState):
        return rho.components, rho.weights
    m = rho.entries if isinstance(rho, DenseOperator) else np.asarray(rho)
    w, V = np.linalg.eigh(0.5 * (m + m.conj().T))
    keep = np.abs(w) > 1e-15
    return V[:, keep], w[keep]


def dephase(rho, grouping: DegenerateGrouping, sd: SpectralDecomposition) -> EquilibriumState:
    """Remove all coherences between different energy levels.

    ``rho`` may be a :class:`PureState` or a density matrix.
    """
    U = sd.eigenvectors
    if isinstance(rho, PureState):
        c = U.conj().T @ rho.amplitudes
        comps, levels, probs = [], [], np.zeros(grouping.n_levels)
        for n, s in enumerate(grouping.slices()):
            probs[n] = float(np.vdot(c[s], c[s]).real)
            if probs[n] > 0:
                comps.append(U[:, s] @ c[s])
                levels.append(n)
        comps = np.array(comps).T if comps else np.zeros((sd.dim, 0), dtype=complex)
        weights = np.ones(comps.shape[1])
        levels = np.array(levels, dtype=int)
    else:
        m = rho.entries if isinstance(rho, DenseOperator) else np.asarray(rho)
        M = U.conj().T @ m @ U
        blocks, ws, levels, probs = [], [], [], np.zeros(grouping.n_levels)
        for n, s in enumerate(grouping.slices()):
            b = M[s, s]
            b = 0.5 * (b + b.conj().T)
            probs[n] = float(np.trace(b).real)
            w, V = np.linalg.eigh(b)
            keep = np.abs(w) > 1e-15
            blocks.append(U[:, s] @ V[:, keep])
            ws.append(w[keep])
            levels += [n] * int(keep.sum())
        comps = np.concatenate(blocks, axis=1)
        weights = np.concatenate(ws)
        levels = np.array(levels, dtype=int)
        trace_in = float(np.trace(m).real)
        if abs(probs.sum() - trace_in) > 1e-8:
            raise ConsistencyError(f"dephasing changed the trace by {probs.sum() - trace_in:.3g}")
    return EquilibriumState(_frozen(comps), _frozen(weights), _frozen(probs), grouping, _frozen(levels))


def evolve(psi0: PureState, sd: SpectralDecomposition, t: float) -> PureState:
    """``U exp(-i diag(E) t) U^dagger psi0``."""
    U = sd.eigenvectors
    c = U.conj().T @ psi0.amplitudes
    out = U @ (np.exp(-1j * sd.eigenvalues * t) * c)
    return PureState(out / np.linalg.norm(out))


def evolve_many(psi0: PureState, sd: SpectralDecomposition, times: np.ndarray) -> np.ndarray:
    """States at every time as columns of a ``D x T`` array."""
    U = sd.eigenvectors
    c = U.conj().T @ psi0.amplitudes
    return U @ (np.exp(-1j * np.outer(sd.eigenvalues, times)) * c[:, None])


def time_grid(dt: float = 0.02, t_final: float = 40.02) -> np.ndarray:
    if dt <= 0 or t_final < dt:
        raise ValueError("need dt > 0 and t_final >= dt")
    n = int(round(t_final / dt))
    return dt * np.arange(n + 1)


def time_average_series(values) -> dict[str, float | complex]:
    """Arithmetic mean and mean absolute deviation of a uniformly sampled series."""
    v = np.asarray(values)
    if v.size == 0:
        raise ValueError("empty series")
    mean = v.mean()
    mad = float(np.abs(v - mean).mean())
    return {"mean": mean.item(), "mad": mad}


def symmetry_witness(sd: SpectralDecomposition, grouping: DegenerateGrouping):
    """Two non-commuting unitaries that both commute with ``H``, or ``None``.

    Inside the first degenerate level, two eigenvectors span a block on which
    the witnesses act as Pauli X and Pauli Z; elsewhere they are the identity.
    """
    for s, d in zip(grouping.slices(), grouping.degeneracies):
        if d > 1:
            break
    else:
        return None
    U = sd.eigenvectors
    u1, u2 = U[:, s.start], U[:, s.start + 1]
    D = sd.dim
    P1, P2 = np.outer(u1, u1.conj()), np.outer(u2, u2.conj())
    W_flip = np.eye(D) - P1 - P2 + np.outer(u1, u2.conj()) + np.outer(u2, u1.conj())
    W_phase = np.eye(D) - 2 * P2
    return DenseOperator(W_flip, hermitian=True), DenseOperator(W_phase, hermitian=True)
