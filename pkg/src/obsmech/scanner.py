"""Exhaustive census of anomalous equilibrium weak values over Euler-angle grids.

For every (K, eps) Hamiltonian, every rotated initial state and every Euler
observable at one site, the charge weak values ``Q^a_w(rho_inf, A_j)`` are
classified as excluded (``p_j`` at the floor), imaginary-anomalous or
real-anomalous.
"""
from __future__ import annotations

import csv
import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .model import AXES, ChainSpec, EulerAngles, build_charges, build_euler_observable, build_euler_state
from .obsstat.report import fmt
from .spectral import dephase, group_levels
from .cache import cached_diagonalize

log = logging.getLogger(__name__)

COLUMNS = ["K", "eps", "kind", "alpha_s", "beta_s", "gamma_s", "alpha_o", "beta_o", "gamma_o",
           "j", "charge", "p_j", "re_wv", "im_wv", "flags"]
ANGLE_UNIT = math.pi / 16


@dataclass(frozen=True)
class SweepGrid:
    """Angles are integer multiples of pi/16."""

    K_values: tuple[float, ...] = (0.0, 0.1, 1.0)
    eps_values: tuple[float, ...] = (0.0, 0.3)
    alpha_steps: tuple[int, ...] = (0, 8, 16, 24)
    beta_steps: tuple[int, ...] = (0, 4, 8, 12, 16)
    gamma_steps: tuple[int, ...] = (0, 8, 16, 24)
    kinds: tuple[str, ...] = ("symmetric", "breaking")
    n_sites: int = 6
    nn_coupling: float = 1.0
    defect_site: int = 3
    obs_site: int | None = None
    im_threshold: float = 1e-2
    re_threshold: float = 1 + 1e-2
    p_floor: float = 1e-13

    @property
    def site(self) -> int:
        return self.n_sites // 2 + 1 if self.obs_site is None else self.obs_site

    def angle_triples(self) -> list[tuple[int, int, int]]:
        return list(itertools.product(self.alpha_steps, self.beta_steps, self.gamma_steps))

    def hamiltonians(self) -> list[tuple[float, float]]:
        return list(itertools.product(self.K_values, self.eps_values))

    def tasks(self) -> list[tuple]:
        """(kind, K, eps, state angles) in output order."""
        return [(kind, K, eps, s) for kind in self.kinds for K, eps in self.hamiltonians()
                for s in self.angle_triples()]

    def rows_per_task(self) -> int:
        return len(self.angle_triples()) * 2 * len(AXES)

    def cardinality_per_kind(self) -> int:
        return len(self.hamiltonians()) * len(self.angle_triples()) * self.rows_per_task()

    def spec(self, K: float, eps: float) -> ChainSpec:
        return ChainSpec(self.n_sites, self.nn_coupling, K, eps, self.defect_site)

    def to_dict(self) -> dict:
        return asdict(self)


def _angles(steps) -> EulerAngles:
    return EulerAngles(*(s * ANGLE_UNIT for s in steps))


@dataclass
class _HamiltonianData:
    sd: object
    grouping: object
    projectors: np.ndarray  # (n_obs * 2, D, D)
    charges: np.ndarray  # (3, D, D)


_WORKER_CACHE: dict = {}


def _hamiltonian_data(grid: SweepGrid, K: float, eps: float, cache_dir) -> _HamiltonianData:
    key = (grid, K, eps)
    if key not in _WORKER_CACHE:
        spec = grid.spec(K, eps)
        sd = cached_diagonalize(spec, cache_dir)
        g = group_levels(sd)
        Q = build_charges(spec)
        P = np.array([o.projector.to_dense() for s in grid.angle_triples()
                      for o in build_euler_observable(spec, _angles(s), grid.site).outcomes])
        _WORKER_CACHE[key] = _HamiltonianData(sd, g, P, np.array([q.to_dense() for q in Q]))
    return _WORKER_CACHE[key]


def scan_task(grid: SweepGrid, task, cache_dir=None) -> np.ndarray:
    """Weak values for one (kind, K, eps, initial state) as a structured array.

    One row per (observable, outcome, charge), in grid order.
    """
    kind, K, eps, s = task
    hd = _hamiltonian_data(grid, K, eps, cache_dir)
    spec = grid.spec(K, eps)
    st = dephase(build_euler_state(spec, _angles(s), kind), hd.grouping, hd.sd)
    rho = st.rho_inf.entries
    P = hd.projectors
    p = np.einsum("oik,ki->o", P, rho).real
    # Tr(rho Q^a A_o)
    T = np.einsum("ik,akl,oli->oa", rho, hd.charges, P, optimize=True)
    ok = p > grid.p_floor
    wv = np.where(ok[:, None], T / np.where(ok, p, 1.0)[:, None], np.nan)
    return np.rec.fromarrays(
        [np.repeat(p, 3), wv.real.ravel(), wv.imag.ravel(), np.repeat(~ok, 3), T.ravel()],
        names="p,re,im,excluded,trace",
    )


def classify(rec, grid: SweepGrid) -> tuple[np.ndarray, np.ndarray]:
    im = ~rec.excluded & (np.abs(rec.im) > grid.im_threshold)
    re = ~rec.excluded & (np.abs(rec.re) > grid.re_threshold)
    return im, re


def _rows(grid: SweepGrid, task, rec) -> Iterator[list[str]]:
    kind, K, eps, s = task
    im, re = classify(rec, grid)
    sa = [fmt(x * ANGLE_UNIT) for x in s]
    r = 0
    for o in grid.angle_triples():
        oa = [fmt(x * ANGLE_UNIT) for x in o]
        for j in (0, 1):
            for a in AXES:
                flags = "excluded" if rec.excluded[r] else "|".join(
                    f for f, on in (("im", im[r]), ("re", re[r])) if on)
                yield [fmt(K), fmt(eps), kind, *sa, *oa, str(j), a, fmt(rec.p[r]),
                       fmt(rec.re[r]), fmt(rec.im[r]), flags]
                r += 1


@dataclass
class SweepSummary:
    counts: dict
    sensitivity: dict = field(default_factory=dict)
    levels: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"counts": self.counts, "threshold_sensitivity": self.sensitivity,
                           "levels": self.levels, "grid": self.grid}, indent=1, sort_keys=True) + "\n"


DEFAULT_THRESHOLDS = (1e-13, 1e-12, 1e-10, 1e-8, 1e-6, 1e-4, 1e-3, 1e-2)


def threshold_sensitivity(im_abs: np.ndarray, excluded: np.ndarray, thresholds=DEFAULT_THRESHOLDS) -> dict:
    """Number of imaginary anomalies at each threshold."""
    vals = np.where(excluded, -np.inf, im_abs)
    return {format(t, "g"): int(np.sum(vals > t)) for t in thresholds}


def _count_lines(path: Path) -> int:
    with open(path, "rb") as fh:
        return sum(1 for _ in fh)


def run_sweep(grid: SweepGrid = SweepGrid(), records_path=None, workers: int = 1, cache_dir=None,
              thresholds=DEFAULT_THRESHOLDS, resume: bool = True) -> tuple[SweepSummary, dict]:
    """Run the census, streaming records to ``records_path`` if given.

    An existing record file is resumed at the last complete task (rows of a
    partial task are discarded). Returns the summary and the per-record arrays
    ``{"kind", "im", "re", "excluded"}`` in grid order.
    """
    tasks = grid.tasks()
    per = grid.rows_per_task()
    done = 0
    fh = writer = None
    if records_path is not None:
        records_path = Path(records_path)
        if resume and records_path.exists() and records_path.stat().st_size > 0:
            n = _count_lines(records_path) - 1
            done = min(max(n, 0) // per, len(tasks))
            _truncate_lines(records_path, 1 + done * per)
            log.info("resuming census after %d of %d tasks", done, len(tasks))
            fh = open(records_path, "a", newline="")
            writer = csv.writer(fh, lineterminator="\n")
        else:
            fh = open(records_path, "w", newline="")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(COLUMNS)

    results: list = [None] * len(tasks)
    if done:
        for i, rec in enumerate(_read_records(records_path, grid, done)):
            results[i] = rec
    todo = list(range(done, len(tasks)))
    try:
        if workers > 1 and todo:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                it = ex.map(scan_task, [grid] * len(todo), [tasks[i] for i in todo], [cache_dir] * len(todo),
                            chunksize=8)
                for i, rec in zip(todo, it):
                    results[i] = rec
                    if writer:
                        writer.writerows(_rows(grid, tasks[i], rec))
        else:
            for i in todo:
                rec = scan_task(grid, tasks[i], cache_dir)
                results[i] = rec
                if writer:
                    writer.writerows(_rows(grid, tasks[i], rec))
    finally:
        if fh:
            fh.close()

    kinds = np.concatenate([np.full(per, t[0]) for t in tasks])
    im_abs = np.concatenate([np.abs(r.im) for r in results])
    re_abs = np.concatenate([np.abs(r.re) for r in results])
    excluded = np.concatenate([np.asarray(r.excluded, dtype=bool) for r in results])
    counts, sens = {}, {}
    for kind in grid.kinds:
        m = kinds == kind
        ex = excluded[m]
        counts[kind] = {
            "total": int(m.sum()),
            "excluded": int(ex.sum()),
            "excluded_probabilities": int(ex.sum()) // len(AXES),
            "im_anomalies": int(np.sum(~ex & (im_abs[m] > grid.im_threshold))),
            "re_anomalies": int(np.sum(~ex & (re_abs[m] > grid.re_threshold))),
        }
        sens[kind] = threshold_sensitivity(im_abs[m], ex, thresholds)
    levels = {}
    for K, eps in grid.hamiltonians():
        hd = _hamiltonian_data(grid, K, eps, cache_dir)
        levels[f"K={K:g},eps={eps:g}"] = {"n_levels": hd.grouping.n_levels,
                                                "tolerance": hd.grouping.tolerance,
                                                "fallback": hd.grouping.fallback}
    summary = SweepSummary(counts, sens, levels, grid.to_dict())
    arrays = {"kind": kinds, "im": im_abs, "re": re_abs, "excluded": excluded}
    return summary, arrays


def _truncate_lines(path: Path, keep: int) -> None:
    with open(path, "rb") as fh:
        lines = fh.readlines()[:keep]
    with open(path, "wb") as fh:
        fh.writelines(lines)


def _read_records(path: Path, grid: SweepGrid, n_tasks: int):
    per = grid.rows_per_task()
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        buf = []
        for row in rd:
            buf.append(row)
            if len(buf) == per:
                p = np.array([float(r["p_j"]) for r in buf])
                re = np.array([float(r["re_wv"]) for r in buf])
                im = np.array([float(r["im_wv"]) for r in buf])
                ex = np.array([r["flags"] == "excluded" for r in buf])
                yield np.rec.fromarrays([p, re, im, ex, (re + 1j * im) * p], names="p,re,im,excluded,trace")
                buf = []
                n_tasks -= 1
                if n_tasks == 0:
                    return
