"""Closed-form thermal baselines for one- and two-site subsystems.

The non-Abelian thermal state of a subsystem is ``exp(-beta H_S - mu n.Q_S)/Z``
with extensive subsystem charges ``Q_S^a = sum_i sigma^a_i``. For one site
``H_S = 0``; for two sites ``H_S = J sigma_1 . sigma_2``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, minimize_scalar

from .errors import FitError
from .model import AXES, PAULI, ChainSpec, analytic_moments
from .obsstat.core import ObservableDistribution

log = logging.getLogger(__name__)

BETA_BRACKET = (-5.0, 5.0)
BETA_XTOL = 1e-10


@dataclass(frozen=True)
class NatsParams:
    beta: float
    mu: float
    direction: tuple[float, float, float] = (0.0, 0.0, 1.0)
    J: float = 1.0
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        n = np.asarray(self.direction, dtype=float)
        if self.mu < 0:
            raise ValueError("mu is a magnitude and must be >= 0")
        if self.mu > 0 and abs(np.linalg.norm(n) - 1) > 1e-12:
            raise ValueError(f"direction {n} is not a unit vector")
        object.__setattr__(self, "direction", tuple(float(x) for x in n))

    @property
    def mu_vector(self) -> np.ndarray:
        return self.mu * np.asarray(self.direction)


def nats_one_site_probs(params: NatsParams) -> dict[str, ObservableDistribution]:
    t = math.tanh(params.mu)
    out = {}
    for a, na in zip(AXES, params.direction):
        p = np.array([0.5 - t * na / 2, 0.5 + t * na / 2])
        out[a] = ObservableDistribution(p, np.ones(2, dtype=int), ("0", "1"))
    return out


def nats_two_site_probs(params: NatsParams) -> dict[str, ObservableDistribution]:
    b, mu, J = params.beta, params.mu, params.J
    e4 = math.exp(4 * b * J)
    Zt = e4 + 1 + 2 * math.cosh(2 * mu)
    s2, c2 = math.sinh(2 * mu), math.cosh(2 * mu)
    out = {}
    for a, na in zip(AXES, params.direction):
        p = np.empty(4)
        for j in (0, 1):
            for k in (0, 1):
                sgn = (-1) ** (j + k)
                p[2 * j + k] = (0.25 + sgn * (1 - e4) / (4 * Zt) + (-1) ** (j + 1) * na * (j == k) * s2 / Zt
                                + sgn * na**2 * (c2 - 1) / (2 * Zt))
        out[a] = ObservableDistribution(p, np.ones(4, dtype=int), ("00", "01", "10", "11"))
    return out


def gibbs_two_site_probs(beta: float, J: float = 1.0) -> np.ndarray:
    e4 = math.exp(4 * beta * J)
    g = (1 - e4) / (3 + e4)
    return 0.25 * np.array([1 + g, 1 - g, 1 - g, 1 + g])


def fit_nats_params(one_body: dict, two_body: dict, J: float = 1.0) -> NatsParams:
    """Fit ``(beta, mu, n)`` to one- and two-site outcome distributions.

    ``one_body[a]`` is ``(p_0, p_1)`` for axis ``a``; ``two_body[a]`` is
    ``(p_00, p_01, p_10, p_11)``. ``mu`` and ``n`` come in closed form from the
    one-site data; ``beta`` minimizes the summed squared error over all twelve
    two-site probabilities on the bracket ``[-5, 5]``.
    """
    missing = [a for a in AXES if a not in one_body]
    if missing:
        raise FitError(f"one-body distributions missing for axes {missing}")
    v = np.array([one_body[a][1] - one_body[a][0] for a in AXES], dtype=float)
    r = float(np.linalg.norm(v))
    if r >= 1:
        raise FitError(f"|p1 - p0| = {r:.6g} >= 1 has no finite chemical potential")
    flags = []
    if r < 1e-14:
        mu, n = 0.0, (0.0, 0.0, 1.0)
        flags.append("direction-undefined")
    else:
        mu, n = math.atanh(r), tuple(v / r)

    data = np.array([two_body[a] for a in AXES], dtype=float)

    def resid(b):
        model = nats_two_site_probs(NatsParams(float(np.squeeze(b)), mu, n, J))
        return np.concatenate([model[a].probs - data[i] for i, a in enumerate(AXES)])

    loss = lambda b: float(np.sum(resid(b) ** 2))
    grid = np.linspace(*BETA_BRACKET, 21)
    probe = np.array([loss(b) for b in grid])
    if probe.max() - probe.min() < 1e-15:
        flags.append("degenerate-fit")
        beta = 0.0
    else:
        # golden-section/parabolic search around the best probe, then a
        # Gauss-Newton polish of the residual vector
        k = int(np.argmin(probe))
        lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
        res = minimize_scalar(loss, bounds=(lo, hi), method="bounded",
                              options={"xatol": BETA_XTOL, "maxiter": 500})
        pol = least_squares(resid, x0=[float(res.x)], bounds=BETA_BRACKET, xtol=1e-15, ftol=1e-15, gtol=1e-15)
        beta = float(pol.x[0]) if pol.cost * 2 <= res.fun else float(res.x)
        if min(abs(beta - BETA_BRACKET[0]), abs(beta - BETA_BRACKET[1])) < 1e-6:
            flags.append("beta-at-bracket")
    return NatsParams(beta, mu, n, J, tuple(flags))


def relative_improvement(tvd_est: float, tvd_nats: float) -> float:
    """``1 - tvd_est / tvd_nats``; NaN when undefined (``tvd_nats = 0 < tvd_est``)."""
    if tvd_nats == 0:
        return 0.0 if tvd_est == 0 else float("nan")
    return 1.0 - tvd_est / tvd_nats


# ---------------------------------------------------------------- coupling diagnostics

def _bond_matrix(n: int, a: int, b: int) -> np.ndarray:
    """``sum_c sigma^c_a sigma^c_b`` on ``n`` sites (1-based, local numbering)."""
    D = 2**n
    out = np.zeros((D, D), dtype=complex)
    for s in PAULI.values():
        ops = [np.eye(2)] * n
        ops[a - 1], ops[b - 1] = s, s
        m = ops[0]
        for o in ops[1:]:
            m = np.kron(m, o)
        out += m
    return out


def _sum_bonds(spec: ChainSpec, sites: list[int], select) -> np.ndarray:
    lo = sites[0]
    n = len(sites)
    m = np.zeros((2**n, 2**n), dtype=complex)
    for a, b, c in spec.bonds():
        if a in sites and b in sites and select(a, b):
            m += c * _bond_matrix(n, a - lo + 1, b - lo + 1)
    return m


def _norm(m: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvalsh(m)).max(initial=0.0))


def subsystem_hamiltonian(n_sites: int, J: float = 1.0, K: float | None = None) -> np.ndarray:
    """Nearest plus next-nearest Heisenberg bonds inside an isolated block."""
    K = J if K is None else K
    m = np.zeros((2**n_sites, 2**n_sites), dtype=complex)
    for i in range(1, n_sites):
        m += J * _bond_matrix(n_sites, i, i + 1)
    for i in range(1, n_sites - 1):
        m += K * _bond_matrix(n_sites, i, i + 2)
    return m


@dataclass(frozen=True)
class CouplingDiagnostics:
    norm_Hs_1: float
    norm_Hint_1: float
    norm_Hs_2: float
    norm_Hint_2: float
    delta_Es_2: float
    beta_norm_Hint: float | None
    ratio_Hint_dE: dict = field(default_factory=dict)
    site: int = 0

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def coupling_diagnostics(spec: ChainSpec, theta_grid=(), beta: float | None = None,
                         site: int | None = None) -> CouplingDiagnostics:
    """Subsystem and interaction norms around the central site.

    Matrices live on their minimal support: sites ``i-2..i+2`` for the one-site
    subsystem and ``i-2..i+3`` for the pair ``(i, i+1)``, with ``i = N/2`` by
    default. Bond strengths are taken from ``spec`` as built. ``ratio_Hint_dE``
    divides the pair's interaction norm by the energy standard deviation of the
    theta-family state (closed form).
    """
    i = spec.n_sites // 2 if site is None else site
    s1 = [i]
    s2 = [i, i + 1]
    sup1 = list(range(i - 2, i + 3))
    sup2 = list(range(i - 2, i + 4))
    if sup2[0] < 1 or sup2[-1] > spec.n_sites:
        raise ValueError(f"chain of {spec.n_sites} sites is too short for the site-{i} supports")
    inside = lambda S: (lambda a, b: a in S and b in S)
    touching = lambda S: (lambda a, b: (a in S) != (b in S))
    Hs1 = _sum_bonds(spec, sup1, inside(s1))
    Hint1 = _sum_bonds(spec, sup1, touching(s1))
    Hs2 = _sum_bonds(spec, sup2, inside(s2))
    Hint2 = _sum_bonds(spec, sup2, touching(s2))
    w = np.linalg.eigvalsh(Hs2)
    n_int2 = _norm(Hint2)
    ratios = {}
    for th in theta_grid:
        m = analytic_moments(spec, th)
        ratios[float(th)] = n_int2 / math.sqrt(m["var_E"]) if m["var_E"] > 0 else float("inf")
    return CouplingDiagnostics(
        norm_Hs_1=_norm(Hs1), norm_Hint_1=_norm(Hint1), norm_Hs_2=_norm(Hs2), norm_Hint_2=n_int2,
        delta_Es_2=float(w.max() - w.min()),
        beta_norm_Hint=None if beta is None else abs(beta) * n_int2,
        ratio_Hint_dE=ratios, site=i,
    )
