"""Per-observable equilibrium analysis and its on-disk form."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import ObsMechError
from ..model import AXES, ChargeSet, CoarseObservable, PureState
from ..spectral import DegenerateGrouping, EquilibriumState, SpectralDecomposition, dephase
from .core import P_FLOOR, r_overlaps, shannon_entropy
from .equations import ee1_residual, ee2_residual
from .predict import predict_equilibrium

SCHEMA_VERSION = "1"
OPERATORS = ("H",) + AXES


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _num(x):
    """JSON-safe float; NaN becomes null."""
    x = float(x)
    return None if not np.isfinite(x) else x


def time_series_table(states: np.ndarray, obs: CoarseObservable, H, charges: ChargeSet,
                      chunk: int = 256) -> tuple[np.ndarray, dict]:
    """``p_j(t)`` and ``Tr(rho(t) O A_j)`` for states given as columns."""
    ops = {"H": H, **{a: charges[a] for a in AXES}}
    T = states.shape[1]
    probs = np.zeros((T, len(obs)))
    traces = {k: np.zeros((T, len(obs)), dtype=complex) for k in ops}
    for start in range(0, T, chunk):
        psi = states[:, start:start + chunk]
        sl = slice(start, start + psi.shape[1])
        applied = {k: op.apply(psi) for k, op in ops.items()}
        for j, P in enumerate(obs.projectors):
            apsi = P.apply(psi)
            probs[sl, j] = np.einsum("ik,ik->k", psi.conj(), apsi).real
            for k, v in applied.items():
                traces[k][sl, j] = np.einsum("ik,ik->k", v.conj(), apsi)
    return probs, traces


@dataclass
class EquilibriumReport:
    observable: str
    labels: tuple[str, ...]
    degeneracies: np.ndarray
    mode: str
    target_mode: str
    p_bar: np.ndarray
    R_bar: np.ndarray
    Ra_bar: dict
    eps: np.ndarray
    q: dict
    weak_values: dict  # at rho_inf, complex arrays keyed by operator
    p_est: np.ndarray
    multipliers: dict
    tvd: float
    ee2: np.ndarray
    p_exact: np.ndarray = None
    times: np.ndarray = None
    p_series: np.ndarray = None
    traces: dict = field(default=None, repr=False)
    entropy: np.ndarray = None
    entropy_weighted: np.ndarray = None
    ee1: dict = None
    linearity_mad: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def summary(self) -> dict:
        """JSON-ready record (no time series)."""
        c = lambda z: [[_num(v.real), _num(v.imag)] for v in np.asarray(z)]
        r = lambda v: [_num(x) for x in np.asarray(v, dtype=float)]
        out = {
            "schema_version": SCHEMA_VERSION,
            "observable": self.observable,
            "labels": list(self.labels),
            "degeneracies": [int(x) for x in self.degeneracies],
            "mode": self.mode,
            "target_mode": self.target_mode,
            "p_bar": r(self.p_bar),
            "R_bar": r(self.R_bar),
            "Ra_bar": {a: r(v) for a, v in self.Ra_bar.items()},
            "eps": r(self.eps),
            "q": {a: r(v) for a, v in self.q.items()},
            "weak_values_rho_inf": {k: c(v) for k, v in self.weak_values.items()},
            "p_est": r(self.p_est),
            "multipliers": {k: (r(v) if np.ndim(v) else _num(v)) for k, v in self.multipliers.items()},
            "tvd": _num(self.tvd),
            "ee2_residual": r(self.ee2),
            "meta": self.meta,
        }
        if self.p_exact is not None:
            out["p_exact"] = r(self.p_exact)
        if self.ee1 is not None:
            out["ee1"] = {"mean": r(self.ee1["mean"]), "mad": r(self.ee1["mad"]), "excluded": self.ee1["excluded"]}
        if self.linearity_mad is not None:
            out["linearity_mad"] = r(self.linearity_mad)
        return out

    def series_csv(self) -> str:
        """Time series as CSV text: ``t`` then one column per outcome and quantity."""
        if self.times is None:
            raise ObsMechError("report has no time series")
        cols = ["t"] + [f"p_{l}" for l in self.labels]
        data = [self.times] + list(self.p_series.T)
        for k in OPERATORS:
            cols += [f"re_{k}_{l}" for l in self.labels] + [f"im_{k}_{l}" for l in self.labels]
            data += list(self.traces[k].real.T) + list(self.traces[k].imag.T)
        cols += ["S_A", "S_A_weighted"] + [f"ee1_{l}" for l in self.labels]
        data += [self.entropy, self.entropy_weighted] + list(self.ee1["series"].T)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in zip(*data):
            w.writerow([fmt(v) for v in row])
        return buf.getvalue()

    def write(self, directory: Path, stem: str) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        js = directory / f"{stem}.json"
        js.write_text(json.dumps(self.summary(), indent=1, sort_keys=True) + "\n")
        paths = [js]
        if self.times is not None:
            cs = directory / f"{stem}_series.csv"
            cs.write_text(self.series_csv())
            paths.append(cs)
        return paths


def analyze(psi0: PureState, sd: SpectralDecomposition, grouping: DegenerateGrouping,
            observables: Sequence[CoarseObservable], H, charges: ChargeSet, times=None,
            mode: str = "exact", targets=None, p_floor: float = P_FLOOR,
            state: EquilibriumState | None = None) -> list[EquilibriumReport]:
    """Full equilibrium analysis of one initial state for several observables.

    ``mode="exact"`` takes ``p_bar``, ``R_bar`` from the dephased state;
    ``mode="timeavg"`` from averages over ``times`` (required then). Time
    series, entropies and EE1 residuals are produced whenever ``times`` is given.
    """
    if mode not in ("exact", "timeavg"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "timeavg" and times is None:
        raise ValueError("time-average mode needs a time grid")
    state = state if state is not None else dephase(psi0, grouping, sd)
    states = None
    if times is not None:
        U = sd.eigenvectors
        c = U.conj().T @ psi0.amplitudes
    reports = []
    # dephased components sit in single levels, so H acts on them as a scalar
    cache: dict = {"H": state.components * grouping.group_energies[state.levels]}
    for obs in observables:
        rec = r_overlaps(state, obs, H, charges, p_floor, cache)
        series = None
        if times is not None:
            if states is None:
                states = U @ (np.exp(-1j * np.outer(sd.eigenvalues, times)) * c[:, None])
            series = time_series_table(states, obs, H, charges)
        if mode == "exact":
            p_bar, R_bar = rec.probs, rec.R
            Ra_bar = {a: rec.R_charge(a) for a in AXES}
        else:
            p_s, tr = series
            p_bar = p_s.mean(axis=0)
            R_bar = tr["H"].real.mean(axis=0)
            Ra_bar = {a: tr[a].real.mean(axis=0) for a in AXES}
        pred = predict_equilibrium(p_bar, R_bar, Ra_bar, obs.degeneracies, obs.labels, targets, p_floor)
        sol = pred.solution
        mult = {"lambda_N": sol.lambda_N, "beta": sol.beta, "mu": sol.mu, "Z": sol.Z}
        ee2 = ee2_residual(p_bar, obs.degeneracies, sol.lambda_N, sol.beta, sol.mu, R_bar,
                           [Ra_bar[a] for a in AXES])
        rep = EquilibriumReport(
            observable=obs.name, labels=tuple(obs.labels), degeneracies=obs.degeneracies, mode=mode,
            target_mode=pred.target_mode, p_bar=p_bar, R_bar=R_bar, Ra_bar=Ra_bar, eps=pred.eps, q=pred.q,
            weak_values=dict(rec.weak), p_est=pred.p_est, multipliers=mult, tvd=pred.tvd, ee2=ee2,
            p_exact=rec.probs,
            meta={"targets": [_num(t) for t in pred.targets], "solver": sol.convergence,
                  "dropped_outcomes": list(pred.dropped)},
        )
        if series is not None:
            p_s, tr = series
            ok = p_s > p_floor
            safe = np.where(ok, p_s, 1.0)
            im_w = {k: np.where(ok, tr[k].imag / safe, np.nan) for k in OPERATORS}
            rep.times = np.asarray(times)
            rep.p_series = p_s
            rep.traces = tr
            rep.entropy = np.array([shannon_entropy(row) for row in p_s])
            rep.entropy_weighted = np.array([shannon_entropy(row, obs.degeneracies) for row in p_s])
            rep.ee1 = ee1_residual(sol.beta, sol.mu, im_w["H"], np.stack([im_w[a] for a in AXES]))
            rep.linearity_mad = np.abs(tr["H"].real - pred.eps * p_s).mean(axis=0)
        reports.append(rep)
    return reports
