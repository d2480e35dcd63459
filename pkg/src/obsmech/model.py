"""Operators and states of the SU(2)-symmetric XXX chain.

Conventions
-----------
* Sites are 1-based. Site 1 is the leftmost Kronecker factor, so it owns the
  most significant bit of a computational-basis index.
* ``|0>`` is the +1 eigenstate of sigma^z.
* Rotations are ``R_a(t) = exp(-i t sigma^a / 2)``.

The Euler observable at angles ``(0, pi/2, 0)`` is ``R_y(pi/2) sigma^z
R_y(pi/2)^dagger = +sigma^x``, so its outcome 0 coincides with outcome 0 of
the axis-x Pauli observable (no sign flip).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import NotApplicableError, ResourceError, UnsupportedError

AXES = ("x", "y", "z")

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"x": SX, "y": SY, "z": SZ}

# columns are the +1 and -1 eigenvectors of sigma^a
LOCAL_EIGENBASIS = {
    "x": np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2),
    "y": np.array([[1, 1], [1j, -1j]], dtype=complex) / math.sqrt(2),
    "z": I2.copy(),
}

DEFAULT_MAX_SITES = 12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def rotation(axis: str, angle: float) -> np.ndarray:
    """Single-qubit rotation ``exp(-i angle sigma^axis / 2)``."""
    return math.cos(angle / 2) * I2 - 1j * math.sin(angle / 2) * PAULI[axis]


def euler_rotation(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """``R_x(alpha) R_y(beta) R_x(gamma)``."""
    return rotation("x", alpha) @ rotation("y", beta) @ rotation("x", gamma)


@dataclass(frozen=True)
class ChainSpec:
    """Open XXX chain with nearest and next-nearest couplings.

    Bond ``i`` couples sites ``(i, i+1)`` with strength ``J + eps*[i == defect_site]``
    and sites ``(i, i+2)`` with ``K + eps*[i == defect_site]``. ``K`` defaults to
    ``J``.
    """

    n_sites: int
    nn_coupling: float = 1.0
    nnn_coupling: float | None = None
    defect_strength: float = 0.3
    defect_site: int = 3
    max_sites: int = DEFAULT_MAX_SITES

    def __post_init__(self):
        if self.n_sites < 2:
            raise ValueError(f"a chain needs at least two sites, got {self.n_sites}")
        if self.defect_strength != 0 and not 1 <= self.defect_site <= self.n_sites:
            raise ValueError(
                f"defect_site {self.defect_site} outside chain of {self.n_sites} sites"
            )
        if self.n_sites > self.max_sites:
            raise ResourceError(
                f"N={self.n_sites} exceeds the dense budget of {self.max_sites} sites"
            )

    @property
    def K(self) -> float:
        return self.nn_coupling if self.nnn_coupling is None else self.nnn_coupling

    @property
    def dim(self) -> int:
        return 2**self.n_sites

    def nn_bond(self, i: int) -> float:
        return self.nn_coupling + self.defect_strength * (i == self.defect_site)

    def nnn_bond(self, i: int) -> float:
        return self.K + self.defect_strength * (i == self.defect_site)

    def bonds(self) -> list[tuple[int, int, float]]:
        """All ``(site_a, site_b, coupling)`` triples, 1-based."""
        out = [(i, i + 1, self.nn_bond(i)) for i in range(1, self.n_sites)]
        out += [(i, i + 2, self.nnn_bond(i)) for i in range(1, self.n_sites - 1)]
        return out

    def to_dict(self) -> dict:
        return {
            "n_sites": self.n_sites,
            "nn_coupling": self.nn_coupling,
            "nnn_coupling": self.K,
            "defect_strength": self.defect_strength,
            "defect_site": self.defect_site,
        }


@dataclass(frozen=True)
class DenseOperator:
    """A full ``D x D`` matrix. Real dtype is kept when the matrix is real."""

    entries: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        m = self.entries
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator must be square, got shape {m.shape}")
        if self.hermitian:
            scale = max(float(np.abs(m).max(initial=0.0)), 1e-300)
            if np.abs(m - m.conj().T).max(initial=0.0) > 1e-12 * scale:
                raise ValueError("matrix flagged hermitian is not hermitian")
        object.__setattr__(self, "entries", _frozen(m))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def apply(self, vecs: np.ndarray) -> np.ndarray:
        return self.entries @ vecs

    def to_dense(self) -> np.ndarray:
        return self.entries

    def trace(self) -> complex:
        return complex(np.trace(self.entries))


@dataclass(frozen=True)
class LocalOperator:
    """Operator acting as ``local`` on consecutive ``sites`` and identity elsewhere."""

    n_sites: int
    sites: tuple[int, ...]
    local: np.ndarray

    def __post_init__(self):
        k = len(self.sites)
        if list(self.sites) != list(range(self.sites[0], self.sites[0] + k)):
            raise UnsupportedError(f"sites {self.sites} are not consecutive")
        if self.sites[0] < 1 or self.sites[-1] > self.n_sites:
            raise ValueError(f"sites {self.sites} outside chain of {self.n_sites}")
        if self.local.shape != (2**k, 2**k):
            raise ValueError("local matrix does not match support size")
        object.__setattr__(self, "local", _frozen(np.asarray(self.local, dtype=complex)))

    @property
    def dim(self) -> int:
        return 2**self.n_sites

    def apply(self, vecs: np.ndarray) -> np.ndarray:
        return apply_local(self.local, self.sites[0], self.n_sites, vecs)

    def to_dense(self) -> np.ndarray:
        left = 2 ** (self.sites[0] - 1)
        right = 2 ** (self.n_sites - self.sites[-1])
        return np.kron(np.kron(np.eye(left), self.local), np.eye(right))

    def trace(self) -> complex:
        return complex(np.trace(self.local)) * 2 ** (self.n_sites - len(self.sites))


@dataclass(frozen=True)
class SiteSum:
    """``coeff * sum_i op_i`` for an identical single-site ``op`` on every site."""

    n_sites: int
    op: np.ndarray
    coeff: float = 1.0

    @property
    def dim(self) -> int:
        return 2**self.n_sites

    def apply(self, vecs: np.ndarray) -> np.ndarray:
        out = np.zeros(vecs.shape, dtype=complex)
        for i in range(1, self.n_sites + 1):
            out += apply_local(self.op, i, self.n_sites, vecs)
        return self.coeff * out

    def to_dense(self) -> np.ndarray:
        D = self.dim
        out = np.zeros((D, D), dtype=complex)
        for i in range(1, self.n_sites + 1):
            out += LocalOperator(self.n_sites, (i,), self.op).to_dense()
        return self.coeff * out


def apply_local(local: np.ndarray, first_site: int, n_sites: int, vecs: np.ndarray) -> np.ndarray:
    """Apply a ``2^k x 2^k`` matrix on sites ``first_site..first_site+k-1``.

    ``vecs`` is a state vector of length ``2^N`` or a stack with states as columns.
    """
    k = local.shape[0].bit_length() - 1
    left = 2 ** (first_site - 1)
    right = 2 ** (n_sites - first_site - k + 1)
    flat = vecs.ndim == 1
    v = vecs.reshape(left, 2**k, right, -1)
    out = np.einsum("ab,lbrk->lark", local, v, optimize=True)
    return out.reshape(vecs.shape) if flat else out.reshape(vecs.shape[0], -1)


def apply_product(locals_: Sequence[np.ndarray], vecs: np.ndarray) -> np.ndarray:
    """Apply ``locals_[0] (x) ... (x) locals_[N-1]`` site by site."""
    n = len(locals_)
    out = vecs
    for i, u in enumerate(locals_, start=1):
        out = apply_local(u, i, n, out)
    return out


@dataclass(frozen=True)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        norm = np.linalg.norm(a)
        if abs(norm - 1) > 1e-12:
            raise ValueError(f"state norm {norm!r} differs from 1")
        object.__setattr__(self, "amplitudes", _frozen(a))

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def density_matrix(self) -> DenseOperator:
        a = self.amplitudes
        return DenseOperator(np.outer(a, a.conj()), hermitian=True)


@dataclass(frozen=True)
class Outcome:
    label: str
    projector: LocalOperator
    degeneracy: int


@dataclass(frozen=True)
class CoarseObservable:
    """Coarse observable given by its eigenprojectors.

    ``local_basis`` holds, as columns, an eigenbasis of the observable restricted
    to ``support_sites``; column ``c`` belongs to outcome ``c`` (the support-site
    bit string read in the observable's own basis).
    """

    name: str
    outcomes: tuple[Outcome, ...]
    support_sites: tuple[int, ...]
    local_basis: np.ndarray = field(repr=False)

    @property
    def labels(self) -> list[str]:
        return [o.label for o in self.outcomes]

    @property
    def degeneracies(self) -> np.ndarray:
        return np.array([o.degeneracy for o in self.outcomes])

    @property
    def projectors(self) -> list[LocalOperator]:
        return [o.projector for o in self.outcomes]

    @property
    def n_sites(self) -> int:
        return self.outcomes[0].projector.n_sites

    def __len__(self) -> int:
        return len(self.outcomes)


def _observable_from_basis(name: str, n_sites: int, first_site: int, basis: np.ndarray) -> CoarseObservable:
    k = basis.shape[0].bit_length() - 1
    sites = tuple(range(first_site, first_site + k))
    deg = 2 ** (n_sites - k)
    outcomes = []
    for c in range(2**k):
        v = basis[:, c]
        proj = LocalOperator(n_sites, sites, np.outer(v, v.conj()))
        outcomes.append(Outcome(format(c, f"0{k}b"), proj, deg))
    return CoarseObservable(name, tuple(outcomes), sites, _frozen(basis.copy()))


def build_pauli_observable(spec: ChainSpec, axis: str, sites: int | Sequence[int]) -> CoarseObservable:
    """One-body ``sigma^a_i`` or two-body ``sigma^a_i sigma^a_{i+1}`` observable.

    Outcome ``j`` of a one-body observable has projector ``(I + (-1)^j sigma^a_i)/2``;
    two-body outcome ``jk`` has ``A_j^{a,i} A_k^{a,i+1}``.
    """
    if axis not in PAULI:
        raise ValueError(f"unknown axis {axis!r}")
    sites = (sites,) if isinstance(sites, (int, np.integer)) else tuple(int(s) for s in sites)
    if not 1 <= len(sites) <= 2:
        raise UnsupportedError("only one- and two-site Pauli observables are supported")
    if len(sites) == 2 and sites[1] != sites[0] + 1:
        raise UnsupportedError(f"two-site observable needs adjacent sites, got {sites}")
    if sites[0] < 1 or sites[-1] > spec.n_sites:
        raise ValueError(f"sites {sites} outside chain of {spec.n_sites}")
    r = LOCAL_EIGENBASIS[axis]
    basis = r if len(sites) == 1 else np.kron(r, r)
    name = axis.upper() * len(sites) + "@" + ",".join(map(str, sites))
    return _observable_from_basis(name, spec.n_sites, sites[0], basis)


@dataclass(frozen=True)
class EulerAngles:
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not all(math.isfinite(a) for a in (self.alpha, self.beta, self.gamma)):
            raise ValueError("Euler angles must be finite")

    def matrix(self) -> np.ndarray:
        return euler_rotation(self.alpha, self.beta, self.gamma)

    def inverse_matrix(self) -> np.ndarray:
        # R_x(-gamma) R_y(-beta) R_x(-alpha)
        return euler_rotation(-self.gamma, -self.beta, -self.alpha)


def build_euler_observable(spec: ChainSpec, angles: EulerAngles, site: int) -> CoarseObservable:
    """Two-outcome observable ``R sigma^z R^dagger`` on ``site``, ``R = R_x R_y R_x``."""
    if not 1 <= site <= spec.n_sites:
        raise ValueError(f"site {site} outside chain of {spec.n_sites}")
    basis = angles.matrix()  # columns R|0>, R|1>
    return _observable_from_basis(f"EULER@{site}", spec.n_sites, site, basis)


@dataclass(frozen=True)
class ChargeSet:
    x: SiteSum
    y: SiteSum
    z: SiteSum
    normalization: str = "per-site"

    def __getitem__(self, axis: str) -> SiteSum:
        return {"x": self.x, "y": self.y, "z": self.z}[axis]

    def __iter__(self):
        return iter((self.x, self.y, self.z))

    def items(self):
        return zip(AXES, (self.x, self.y, self.z))

    @property
    def scale(self) -> float:
        return self.x.coeff

    @property
    def n_sites(self) -> int:
        return self.x.n_sites


def build_charges(spec: ChainSpec, normalization: str = "per-site") -> ChargeSet:
    """Total magnetizations, divided by ``N`` for ``per-site`` normalization."""
    if normalization not in ("per-site", "extensive"):
        raise ValueError(f"unknown normalization {normalization!r}")
    c = 1.0 / spec.n_sites if normalization == "per-site" else 1.0
    return ChargeSet(*(SiteSum(spec.n_sites, PAULI[a], c) for a in AXES), normalization=normalization)


def _bit(n_sites: int, site: int) -> int:
    return 1 << (n_sites - site)


def build_hamiltonian(spec: ChainSpec) -> DenseOperator:
    """Dense real Hamiltonian ``sum_bonds J_b sigma_a . sigma_b``.

    Each Heisenberg bond acts as ``+J`` on aligned pairs, ``-J`` on anti-aligned
    pairs and ``2J`` between the two anti-aligned configurations.
    """
    n, D = spec.n_sites, spec.dim
    H = np.zeros((D, D))
    idx = np.arange(D)
    for a, b, J in spec.bonds():
        if J == 0:
            continue
        ma, mb = _bit(n, a), _bit(n, b)
        differ = ((idx & ma) > 0) != ((idx & mb) > 0)
        H[idx, idx] += np.where(differ, -J, J)
        src = idx[differ]
        H[src ^ (ma | mb), src] += 2 * J
    return DenseOperator(H, hermitian=True)


def neel_state(n_sites: int) -> np.ndarray:
    """Amplitudes of ``|0101...>``: odd sites up, even sites down."""
    index = sum(_bit(n_sites, s) for s in range(2, n_sites + 1, 2))
    psi = np.zeros(2**n_sites, dtype=complex)
    psi[index] = 1.0
    return psi


def build_theta_state(spec: ChainSpec, theta: float) -> PureState:
    """``R_y(theta) (x) R_y(-theta) (x) ... |0101...01>``."""
    if spec.n_sites % 2:
        raise UnsupportedError("the theta family needs an even number of sites")
    n = spec.n_sites
    rots = [rotation("y", theta if s % 2 else -theta) for s in range(1, n + 1)]
    return PureState(apply_product(rots, neel_state(n)))


def build_euler_state(spec: ChainSpec, angles: EulerAngles, kind: str) -> PureState:
    """Néel state rotated uniformly (``symmetric``) or alternately (``breaking``)."""
    n = spec.n_sites
    r = angles.matrix()
    if kind == "symmetric":
        rots = [r] * n
    elif kind == "breaking":
        if n % 2:
            raise UnsupportedError("SU(2)-breaking rotations need an even number of sites")
        rinv = angles.inverse_matrix()
        rots = [r if s % 2 else rinv for s in range(1, n + 1)]
    else:
        raise ValueError(f"unknown rotation kind {kind!r}")
    return PureState(apply_product(rots, neel_state(n)))


def closed_form_moments(n_sites: int, eps: float, theta: float) -> dict[str, float]:
    """The theta-family moment formulas evaluated as written, with no validity checks.

    They assume both defect bonds (3-4 and 3-5) exist, so they are only
    exact for ``n_sites >= 5`` (or ``eps == 0``).
    """
    N = n_sites
    s2 = math.sin(theta) ** 2
    c2 = math.cos(theta) ** 2
    E = 2 * (N - 1 + eps) * s2 - 1
    var_E = 4 * c2 * ((1 + 3 * s2) * N - 5 * s2 - 1 + 2 * eps * (1 + 3 * s2) + eps**2 * (1 + s2))
    return {
        "E": E,
        "var_E": var_E,
        "q_x": math.sin(theta),
        "q_y": 0.0,
        "q_z": math.cos(theta) / N * (N % 2),
        "var_q_x": c2 / N,
        "var_q_y": 1.0 / N,
        "var_q_z": s2 / N,
    }


def analytic_moments(spec: ChainSpec, theta: float) -> dict[str, float]:
    """Closed-form energy and charge moments on the theta family.

    Energies are totals (not divided by N); charges use per-site normalization.
    """
    if spec.K != spec.nn_coupling or spec.nn_coupling != 1.0:
        raise NotApplicableError("closed forms hold only for J = K = 1")
    if spec.defect_strength != 0 and spec.defect_site != 3:
        raise NotApplicableError("closed forms assume the defect on bond 3")
    if spec.defect_strength != 0 and spec.n_sites < 5:
        # the 3-5 defect bond does not exist on a shorter chain
        raise NotApplicableError("closed forms with a defect need n_sites >= 5")
    if spec.n_sites % 2:
        raise UnsupportedError("the theta family needs an even number of sites")
    return closed_form_moments(spec.n_sites, spec.defect_strength, theta)
