"""Shared orchestration used by the command line and the experiment scripts."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cache import cached_diagonalize
from .errors import FitError, ObsMechError
from .model import AXES, ChainSpec, analytic_moments, build_charges, build_hamiltonian, build_pauli_observable, \
    build_theta_state
from .nats import NatsParams, fit_nats_params, nats_one_site_probs, nats_two_site_probs, relative_improvement
from .obsstat.core import tvd
from .obsstat.linear import fit_wv_linear
from .obsstat.report import analyze
from .spectral import dephase, group_levels, time_grid

_SYSTEMS: dict = {}


@dataclass(frozen=True)
class System:
    spec: ChainSpec
    H: object
    sd: object
    grouping: object
    charges: object


def system(spec: ChainSpec, cache_dir=None) -> System:
    """Hamiltonian, eigendecomposition, level grouping and charges (memoized per process)."""
    key = (spec, str(cache_dir))
    if key not in _SYSTEMS:
        H = build_hamiltonian(spec)
        sd = cached_diagonalize(spec, cache_dir)
        _SYSTEMS[key] = System(spec, H, sd, group_levels(sd), build_charges(spec))
    return _SYSTEMS[key]


def central_observables(spec: ChainSpec):
    c = spec.n_sites // 2
    return [build_pauli_observable(spec, a, c) for a in AXES] + \
        [build_pauli_observable(spec, a, (c, c + 1)) for a in AXES]


def theta_reports(sys_: System, theta: float, observables, times=None, mode="exact", targets="internal"):
    psi = build_theta_state(sys_.spec, theta)
    tg = analytic_moments(sys_.spec, theta) if targets == "analytic" else None
    st = dephase(psi, sys_.grouping, sys_.sd)
    return analyze(psi, sys_.sd, sys_.grouping, observables, sys_.H, sys_.charges, times, mode, tg, state=st)


def linear_fits(spec: ChainSpec, thetas, reports_by_theta, fit_points):
    """Affine conditional-moment models per observable across the theta family."""
    mom = [analytic_moments(spec, t) for t in thetas]
    E = np.array([m["E"] for m in mom])
    dE = np.sqrt([m["var_E"] for m in mom])
    qm = {a: np.array([m[f"q_{a}"] for m in mom]) for a in AXES}
    out = {}
    for k, name in enumerate(r.observable for r in reports_by_theta[0]):
        eps = np.array([reps[k].eps for reps in reports_by_theta])
        q = {a: np.array([reps[k].q[a] for reps in reports_by_theta]) for a in AXES}
        out[name] = fit_wv_linear(eps, E, dE, q, qm, fit_points, on_degenerate="intercept")
    return out, E, dE, qm


def nats_fit_from_reports(reports, J: float = 1.0) -> NatsParams:
    """NATS parameters from the central one- and two-site equilibrium distributions."""
    by = {r.observable.split("@")[0].lower(): r.p_bar for r in reports}
    one = {a: by[a] for a in AXES}
    two = {a: by[a + a] for a in AXES}
    return fit_nats_params(one, two, J)


def nats_comparison(reports, J: float = 1.0):
    params = nats_fit_from_reports(reports, J)
    one, two = nats_one_site_probs(params), nats_two_site_probs(params)
    rows = []
    for r in reports:
        code = r.observable.split("@")[0].lower()
        p_n = (one[code] if len(code) == 1 else two[code[0]]).probs
        d_n = tvd(r.p_bar, p_n)
        rows.append({"observable": r.observable, "tvd_est": r.tvd, "tvd_nats": d_n,
                     "delta_r": relative_improvement(r.tvd, d_n), "delta_a": d_n - r.tvd, "p_nats": p_n})
    return params, rows
