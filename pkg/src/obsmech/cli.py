"""Command line front end: ``obsmech {simulate,predict,compare-nats,scan,diagnostics}``."""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import shutil
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from .errors import ConfigError, ObsMechError, ResourceError
from .model import AXES
from .nats import coupling_diagnostics
from .obsstat.information import mutual_information
from .obsstat.report import fmt
from .pipeline import central_observables, linear_fits, nats_comparison, system, theta_reports
from .scanner import run_sweep
from .spectral import dephase, symmetry_witness, time_grid
from .model import build_theta_state

log = logging.getLogger("obsmech")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_RESOURCE = 0, 2, 3, 4


# ----------------------------------------------------------------------------- io helpers

def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    path.write_text(buf.getvalue())


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not serializable: {type(o)}")


class Manifest:
    """Run record written before work starts and finalized afterwards."""

    def __init__(self, out: Path, command: str, cfg, config_text: str):
        self.path = out / "manifest.json"
        self.data = {
            "command": command,
            "config": cfg.to_dict(),
            "config_sha256": hashlib.sha256(config_text.encode()).hexdigest(),
            "software_version": __version__,
            "numpy_version": np.__version__,
            "status": "running",
            "tasks": {},
            "timing": {"started": time.time()},
        }
        self._t0 = time.perf_counter()
        self.flush()

    def task(self, name: str, status: str) -> None:
        self.data["tasks"][name] = status

    def flush(self) -> None:
        write_json(self.path, self.data)

    def finalize(self, status: str = "complete", **extra) -> None:
        self.data["status"] = status
        self.data["timing"]["elapsed_s"] = time.perf_counter() - self._t0
        self.data.update(extra)
        self.flush()


def prepare_out(out: Path, force: bool, resumable: bool = False) -> None:
    if out.exists() and any(out.iterdir()):
        if force:
            shutil.rmtree(out)
        elif resumable and (out / "manifest.json").exists() and \
                json.loads((out / "manifest.json").read_text()).get("status") == "running":
            return
        else:
            raise ConfigError(f"output directory {out} exists and is not empty; pass --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)


# ----------------------------------------------------------------------------- tasks

def _cache(cfg, out: Path):
    return cfg.cache_dir if cfg.cache_dir else None


def _simulate_task(args):
    cfg, k, out, cache = args
    sys_ = system(cfg.chain, cache)
    th = cfg.thetas[k]
    times = time_grid(cfg.dt, cfg.t_final) if (cfg.time_series or cfg.mode == "timeavg") else None
    reps = theta_reports(sys_, th, cfg.observable_list(), times, cfg.mode, cfg.targets)
    d = Path(out) / f"theta_{k:02d}"
    rows = []
    for r in reps:
        r.meta["theta"] = th
        r.write(d, r.observable.replace("@", "_at_").replace(",", "-"))
        for op in ("H",) + AXES:
            wv = r.weak_values[op]
            for j, lab in enumerate(r.labels):
                if r.p_series is not None:
                    ok = r.p_series[:, j] > 1e-13
                    im_t = r.traces[op].imag[ok, j] / r.p_series[ok, j]
                    m, mad = float(im_t.mean()), float(np.abs(im_t - im_t.mean()).mean())
                else:
                    m = mad = float("nan")
                rows.append([th, r.observable, lab, op, float(wv[j].imag), m, mad])
    return rows


def _predict_task(args):
    cfg, k, cache = args
    sys_ = system(cfg.chain, cache)
    th = cfg.thetas[k]
    times = time_grid(cfg.dt, cfg.t_final) if cfg.mode == "timeavg" else None
    return theta_reports(sys_, th, cfg.observable_list(), times, cfg.mode, cfg.targets)


def _run_tasks(fn, args, workers):
    if workers > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, args))
    return [fn(a) for a in args]


def _warm_cache(cfg, cache):
    if cache and cfg.workers > 1:
        system(cfg.chain, cache)


# ----------------------------------------------------------------------------- commands

def cmd_simulate(cfg, out: Path, man: Manifest) -> None:
    cache = _cache(cfg, out)
    _warm_cache(cfg, cache)
    results = _run_tasks(_simulate_task, [(cfg, k, str(out), cache) for k in range(len(cfg.thetas))], cfg.workers)
    for k in range(len(cfg.thetas)):
        man.task(f"theta_{k:02d}", "done")
    write_csv(out / "plot_im_weak_values.csv",
              ["theta", "observable", "j", "operator", "im_wv_rho_inf", "im_wv_time_mean", "im_wv_time_mad"],
              [row for rows in results for row in rows])


def _all_reports(cfg, cache):
    _warm_cache(cfg, cache)
    return _run_tasks(_predict_task, [(cfg, k, cache) for k in range(len(cfg.thetas))], cfg.workers)


def cmd_predict(cfg, out: Path, man: Manifest) -> None:
    cache = _cache(cfg, out)
    by_theta = _all_reports(cfg, cache)
    pred_rows, mult_rows, tvd_rows = [], [], []
    for th, reps in zip(cfg.thetas, by_theta):
        for r in reps:
            for j, lab in enumerate(r.labels):
                pred_rows.append([th, r.observable, lab, float(r.p_bar[j]), float(r.p_est[j]), float(r.eps[j]),
                                  *(float(r.q[a][j]) for a in AXES)])
            m = r.multipliers
            mult_rows.append([th, r.observable, r.target_mode, float(m["lambda_N"]), float(m["beta"]),
                              *(float(x) for x in m["mu"]), float(m["Z"]), r.meta["solver"]["iterations"]])
            tvd_rows.append([th, r.observable, float(r.tvd)])
    write_csv(out / "predictions.csv", ["theta", "observable", "j", "p_bar", "p_est", "eps", "q_x", "q_y", "q_z"],
              pred_rows)
    write_csv(out / "multipliers.csv", ["theta", "observable", "target_mode", "lambda_N", "beta", "mu_x", "mu_y",
                                        "mu_z", "Z", "iterations"], mult_rows)
    write_csv(out / "plot_tvd.csv", ["theta", "observable", "tvd"], tvd_rows)

    fits_out, lin_rows = {}, []
    try:
        fits, E, dE, qm = linear_fits(cfg.chain, cfg.thetas, by_theta, cfg.fit_points)
    except ObsMechError as exc:
        log.warning("linear weak-value fits skipped: %s", exc)
        man.task("wv_linear", f"skipped: {exc}")
        fits = {}
    for name, model in fits.items():
        k = [r.observable for r in by_theta[0]].index(name)
        pe = model.predict_eps(E, dE)
        fits_out[name] = {"energy": model.energy, "charges": model.charges, "fit_points": model.fit_points,
                          "degenerate_charges": model.residuals["degenerate"]}
        for i, th in enumerate(cfg.thetas):
            r = by_theta[i][k]
            fit = int(i in model.fit_points)
            for j, lab in enumerate(r.labels):
                lin_rows.append([th, name, lab, "eps", float(r.eps[j]), float(pe[i, j]), fit])
                for a in AXES:
                    lin_rows.append([th, name, lab, f"q_{a}", float(r.q[a][j]),
                                 float(model.predict_q(a, qm[a])[i, j]), fit])
    write_json(out / "wv_linear.json", fits_out)
    write_csv(out / "plot_wv_linear.csv", ["theta", "observable", "j", "quantity", "actual", "predicted",
                                                "fit_point"], lin_rows)
    man.task("predict", "done")


def cmd_compare_nats(cfg, out: Path, man: Manifest) -> None:
    cache = _cache(cfg, out)
    cfg = cfg.with_overrides(observables=cfgmod.DEFAULT_OBSERVABLES)
    by_theta = _all_reports(cfg, cache)
    prow, trow, dr_rows = [], [], []
    for th, reps in zip(cfg.thetas, by_theta):
        try:
            params, rows = nats_comparison(reps, cfg.chain.nn_coupling)
        except ObsMechError as exc:
            man.task(f"nats_theta={th!r}", f"fit failed: {exc}")
            prow.append([th, "nan", "nan", "nan", "nan", "nan", f"error: {exc}"])
            continue
        prow.append([th, params.beta, params.mu, *params.direction, "|".join(params.flags)])
        for row in rows:
            trow.append([th, row["observable"], row["tvd_est"], row["tvd_nats"], row["delta_r"], row["delta_a"]])
            if len(row["observable"].split("@")[0]) == 2:
                dr_rows.append([th, row["observable"], row["delta_r"]])
    write_csv(out / "nats_params.csv", ["theta", "beta", "mu", "n_x", "n_y", "n_z", "flags"], prow)
    write_csv(out / "nats_tvd.csv", ["theta", "observable", "tvd_est", "tvd_nats", "delta_r", "delta_a"], trow)
    write_csv(out / "plot_nats_delta_r.csv", ["theta", "observable", "delta_r"], dr_rows)
    man.task("compare-nats", "done")


def cmd_scan(cfg, out: Path, man: Manifest) -> None:
    summary, _ = run_sweep(cfg.scan, out / "records.csv", cfg.workers, _cache(cfg, out))
    (out / "summary.json").write_text(summary.to_json())
    man.task("scan", "done")
    man.data["census"] = summary.counts


def cmd_diagnostics(cfg, out: Path, man: Manifest) -> None:
    cache = _cache(cfg, out)
    sys_ = system(cfg.chain, cache)
    diag = {"coupling": {}, "symmetry_witness": None}
    cfg6 = cfg.with_overrides(observables=cfgmod.DEFAULT_OBSERVABLES)
    by_theta = _all_reports(cfg6, cache)
    betas = {}
    for th, reps in zip(cfg.thetas, by_theta):
        try:
            params, _ = nats_comparison(reps, cfg.chain.nn_coupling)
            betas[th] = params.beta
        except ObsMechError as exc:
            man.task(f"nats_theta={th!r}", f"fit failed: {exc}")
    base = coupling_diagnostics(cfg.chain, cfg.thetas)
    diag["coupling"] = {k: v for k, v in base.to_dict().items() if k not in ("beta_norm_Hint", "ratio_Hint_dE")}
    diag["coupling"]["per_theta"] = [
        {"theta": th, "ratio_Hint_dE": base.ratio_Hint_dE[float(th)],
         "beta": betas.get(th), "beta_norm_Hint": None if th not in betas else abs(betas[th]) * base.norm_Hint_2}
        for th in cfg.thetas]
    w = symmetry_witness(sys_.sd, sys_.grouping)
    if w is not None:
        Hm = sys_.H.to_dense()
        W1, W2 = (x.to_dense() for x in w)
        nH = np.linalg.norm(Hm)
        diag["symmetry_witness"] = {
            "commutator_H_W1": float(np.linalg.norm(Hm @ W1 - W1 @ Hm) / nH),
            "commutator_H_W2": float(np.linalg.norm(Hm @ W2 - W2 @ Hm) / nH),
            "commutator_W1_W2": float(np.linalg.norm(W1 @ W2 - W2 @ W1)),
        }
    write_json(out / "diagnostics.json", diag)
    rows = []
    for th in cfg.thetas:
        st = dephase(build_theta_state(cfg.chain, th), sys_.grouping, sys_.sd)
        for obs in cfg.observable_list():
            mi = mutual_information(st, obs, sys_.charges)
            rows.append([th, obs.name] + [mi[k] for k in MI_COLUMNS])
    write_csv(out / "mutual_information.csv", ["theta", "observable"] + list(MI_COLUMNS), rows)
    man.task("diagnostics", "done")


MI_COLUMNS = ("S_H", "S_A", "S_A_fine", "I_AH", "I_AH_fine", "I_QxA", "I_QxA_fine", "I_QyA", "I_QyA_fine",
              "I_QzA", "I_QzA_fine")

COMMANDS = {"simulate": cmd_simulate, "predict": cmd_predict, "compare-nats": cmd_compare_nats,
            "scan": cmd_scan, "diagnostics": cmd_diagnostics}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="obsmech", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="INI or JSON run configuration")
        s.add_argument("--out", type=Path, help="output directory")
        s.add_argument("--workers", type=int)
        s.add_argument("--n-sites", type=int, dest="n_sites")
        s.add_argument("--mode", choices=("exact", "timeavg"))
        s.add_argument("--force", action="store_true", help="replace an existing output directory")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text = args.config.read_text() if args.config else ""
        cfg = cfgmod.load(args.config) if args.config else cfgmod.loads("")
        cfg = cfg.with_overrides(n_sites=args.n_sites, workers=args.workers, mode=args.mode)
        if args.command == "scan" and args.n_sites is not None:
            from dataclasses import replace
            cfg = replace(cfg, scan=replace(cfg.scan, n_sites=args.n_sites))
        out = args.out or (Path(cfg.out) if cfg.out else None)
        if out is None:
            raise ConfigError("no output directory: pass --out or set [run] out")
        prepare_out(out, args.force, resumable=args.command == "scan")
        man = Manifest(out, args.command, cfg, text)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        COMMANDS[args.command](cfg, out, man)
    except ResourceError as exc:
        man.finalize("failed", error=str(exc))
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ObsMechError, np.linalg.LinAlgError, FloatingPointError) as exc:
        man.finalize("failed", error=str(exc))
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except MemoryError as exc:
        man.finalize("failed", error="out of memory")
        print("resource limit: out of memory", file=sys.stderr)
        return EXIT_RESOURCE
    man.finalize()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
