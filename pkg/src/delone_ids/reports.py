"""Run a configured experiment and write its artifacts.

Every run writes ``report.json``, one CSV per table, ``summary.txt`` and a
``meta.json`` sidecar.  Only the sidecar carries timestamps, so the other
files are byte-identical across reruns of the same config.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import platform
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .config import ExperimentConfig
from .delone_core import Box, census_to_csv, patch_census, verify_delone
from .hulls import generator_from_json, mean_density, sample_orbit
from .ids import (
    cauchy_gaps,
    estimate_tau,
    exact_free_ids,
    gap_report,
    ids_curve,
    omega_independence_report,
    shubin_report,
    tau_estimators_agree,
)
from .kernels import kernel_from_spec
from .spectral import Polynomial

COUNTING_COLUMNS = ["E", "count", "per_volume", "per_site", "box_halfwidth", "omega_id", "seed"]


def _num(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return None if math.isnan(x) else x
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    return _num(obj)


def _fmt(x) -> str:
    x = _num(x)
    if isinstance(x, float):
        return repr(x)
    if x is None:
        return ""
    return str(x)


def _csv(header: list, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _halfwidth(q: Box) -> float:
    return max(q.widths) / 2.0


@dataclass
class RunResult:
    out_dir: str
    report: dict
    checks: dict
    tables: dict = field(default_factory=dict)
    summary: str = ""

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 1


def _counting_rows(col, q: Box, omega_id: int, seed: int):
    for E, c, pv, ps in zip(col.grid.energies, col.counts, col.per_volume, col.per_site):
        yield (float(E), int(c), float(pv), float(ps), _halfwidth(q), omega_id, seed)


def _column_json(col, q: Box, omega_id: int = 1) -> dict:
    return {"box_halfwidth": _halfwidth(q), "omega_id": omega_id, "volume": col.volume, "counts": [int(c) for c in col.counts]}


def _monotone(col) -> bool:
    return bool(np.all(np.diff(col.counts) >= 0))


def _strictly_decreasing(xs) -> bool:
    return all(b < a for a, b in zip(xs, xs[1:]))


class _Run:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.opts = cfg.options
        self.g = generator_from_json(cfg.generator)
        self.k = kernel_from_spec(cfg.kernel, cfg.base_dir) if cfg.kernel is not None else None
        self.boxes = cfg.box_list()
        self.grid = cfg.energy_grid()
        self.report = {
            "config_hash": cfg.hash,
            "experiment": cfg.experiment,
            "generator": self.g.to_json(),
            "kernel": self.k.spec() if self.k is not None else None,
            "boxes": [q.to_json() for q in self.boxes],
            "grid": None if self.grid is None else [float(e) for e in self.grid.energies],
            "columns": [],
            "diagnostics": {},
            "tau": None,
            "shubin_table": None,
            "gaps": None,
        }
        self.checks: dict[str, bool] = {}
        self.tables: dict[str, str] = {}
        self.lines: list[str] = []

    # experiments ---------------------------------------------------------
    def verify(self):
        boxes = self.boxes or [Box.cube(50, self.g.dim)]
        rows = []
        for q in boxes:
            patch = self.g.materialize(q)
            rep = verify_delone(patch, self.g.r, self.g.R)
            rows.append((_halfwidth(q), len(patch.points), rep.min_distance, rep.max_gap_radius, rep.packing_ok, rep.covering_ok))
            self.checks[f"packing_ok[L={_halfwidth(q):g}]"] = rep.packing_ok
            self.checks[f"covering_ok[L={_halfwidth(q):g}]"] = rep.covering_ok
        self.tables["delone.csv"] = _csv(["box_halfwidth", "n_points", "min_distance", "max_gap_radius", "packing_ok", "covering_ok"], rows)
        s = self.opts.get("census_radius", 2.0 * self.g.R)
        census = patch_census(self.g.materialize(boxes[-1]), s)
        self.tables["census.csv"] = census_to_csv(census, s)
        self.report["diagnostics"] = {"delone": [list(r) for r in rows], "census_classes": len(census), "census_radius": s}
        self.lines.append(f"r={self.g.r:.6g} R={self.g.R:.6g}; census at s={s:g}: {len(census)} classes")
        pk = all(r[4] for r in rows)
        cv = all(r[5] for r in rows)
        self.lines.append(f"packing {'ok' if pk else 'FAILED'}, covering {'ok' if cv else 'FAILED'}")

    def density(self):
        dens = mean_density(self.g, self.opts["radii"])
        gaps = cauchy_gaps([d for _, d in dens])
        self.tables["density.csv"] = _csv(["radius", "density", "cauchy_gap"], [(R, d, gaps[i - 1] if i else None) for i, (R, d) in enumerate(dens)])
        self.report["diagnostics"] = {"density": [list(x) for x in dens], "cauchy_gaps": gaps}
        tol = self.opts.get("tolerance", 1e-3)
        self.checks["density_cauchy"] = bool(gaps[-1] <= tol)
        self.lines.append(f"density {dens[-1][1]:.8g} at R={dens[-1][0]:g}, last gap {gaps[-1]:.3g} (tol {tol:g})")

    def tau(self):
        bk = self.opts.get("birkhoff", True)
        est = estimate_tau(
            self.k, self.g, self.boxes, birkhoff=bk, weight=self.opts.get("weight", "indicator"),
            orbit_samples=self.opts.get("orbit_samples", 0), seed=self.cfg.seed,
        )
        rows = []
        for i, q in enumerate(self.boxes):
            rows.append((
                _halfwidth(q), est.per_box[i], est.cauchy_gaps[i - 1] if i else None,
                est.birkhoff[i] if est.birkhoff else None,
                est.birkhoff_stderr[i] if est.birkhoff_stderr else None,
            ))
        self.tables["tau.csv"] = _csv(["box_halfwidth", "tau", "cauchy_gap", "birkhoff", "birkhoff_stderr"], rows)
        self.report["tau"] = {"value": est.value, "per_box": est.per_box, "cauchy_gaps": est.cauchy_gaps, "birkhoff": est.birkhoff, "birkhoff_stderr": est.birkhoff_stderr}
        if bk:
            self.checks["tau_estimators_agree"] = tau_estimators_agree(est)
        if "expected" in self.opts:
            tol = self.opts.get("tolerance", 1e-3)
            self.checks["tau_expected"] = bool(abs(est.value - self.opts["expected"]) <= tol)
        self.lines.append(f"tau = {_fmt(est.value)}; last Cauchy gap {est.final_gap:.3g}")

    def _curve(self):
        curve = ids_curve(self.k, self.g, self.boxes, self.grid, self.cfg.normalization, self.opts.get("richardson", False))
        rows = []
        for col, q in zip(curve.columns, self.boxes):
            rows.extend(_counting_rows(col, q, 1, self.cfg.seed))
            self.report["columns"].append(_column_json(col, q))
        self.tables["counting.csv"] = _csv(COUNTING_COLUMNS, rows)
        self.report["diagnostics"]["sup_successive"] = curve.diagnostics
        self.checks["counting_monotone"] = all(_monotone(c) for c in curve.columns)
        return curve

    def ids(self):
        curve = self._curve()
        if self.opts.get("oracle") == "free_z":
            err = float(np.max(np.abs(curve.columns[-1].per_volume - exact_free_ids(self.grid.energies))))
            tol = self.opts.get("tolerance", 1e-2)
            self.report["diagnostics"]["oracle_sup_error"] = err
            self.checks["oracle_free_z"] = bool(err <= tol)
            self.lines.append(f"sup error vs free-chain IDS {err:.3g} (tol {tol:g})")
        self.lines.append(f"{len(curve.columns)} boxes, last sup successive diff {curve.diagnostics[-1] if curve.diagnostics else float('nan'):.3g}")

    def shubin(self):
        phi = Polynomial(tuple(self.opts.get("phi", [0.0, 0.0, 1.0])))
        rep = shubin_report(self.k, self.g, self.boxes, phi)
        rows = [(r.halfwidth, r.t_restrict_poly, r.t_poly_restrict, r.diff, r.bound, r.ok) for r in rep.rows]
        header = ["box_halfwidth", "trace_restrict_of_poly", "trace_poly_of_restrict", "diff", "bound", "ok"]
        self.tables["shubin.csv"] = _csv(header, rows)
        self.report["shubin_table"] = {"degree": rep.degree, "slope": rep.slope, "rows": [dict(zip(header, r)) for r in rows]}
        self.checks["shubin_bound"] = rep.all_ok
        if "expected" in self.opts:
            tol = self.opts.get("tolerance", 0.15)
            self.checks["shubin_slope"] = rep.slope is not None and abs(rep.slope - self.opts["expected"]) <= tol
        self.lines.append(f"degree {rep.degree}: slope {rep.slope}, all within bound: {rep.all_ok}")

    def omega(self):
        if "second_generator" in self.opts:
            g2 = generator_from_json(self.opts["second_generator"])
        else:
            hb = self.opts.get("orbit_box", 100.0)
            g2 = sample_orbit(self.g, Box.cube(hb, self.g.dim), self.opts.get("orbit_seed", self.cfg.seed))
        cols: list = []
        rows = omega_independence_report(self.k, self.g, g2, self.boxes, self.grid, self.opts.get("extents", True), columns=cols)
        crow = []
        for (c1, c2), q in zip(cols, self.boxes):
            crow.extend(_counting_rows(c1, q, 1, self.cfg.seed))
            crow.extend(_counting_rows(c2, q, 2, self.cfg.seed))
            self.report["columns"].extend([_column_json(c1, q, 1), _column_json(c2, q, 2)])
        self.tables["counting.csv"] = _csv(COUNTING_COLUMNS, crow)
        out = [(r.halfwidth, r.sup_diff, r.extent_1[0], r.extent_1[1], r.extent_2[0], r.extent_2[1], r.extent_gap) for r in rows]
        self.tables["omega.csv"] = _csv(["box_halfwidth", "sup_diff", "min_1", "max_1", "min_2", "max_2", "extent_gap"], out)
        self.report["generator_2"] = g2.to_json()
        self.report["diagnostics"] = {"sup_diff": [r.sup_diff for r in rows], "extent_gap": [r.extent_gap for r in rows]}
        tol = self.opts.get("tolerance", 0.02)
        self.checks["omega_sup_final"] = bool(rows[-1].sup_diff <= tol)
        n = self.opts.get("strict_decrease", 0)
        if n:
            self.checks[f"omega_strict_decrease_last_{n}"] = _strictly_decreasing([r.sup_diff for r in rows[-n:]])
        self.lines.append("sup diffs: " + ", ".join(f"{r.sup_diff:.3g}" for r in rows))

    def gaps(self):
        curve = self._curve()
        gaps = gap_report(curve, self.opts.get("min_width", 0.05))
        self.tables["gaps.csv"] = _csv(["lo", "hi", "width", "ids_value"], [(g.lo, g.hi, g.width, g.value) for g in gaps])
        self.report["gaps"] = [{"lo": g.lo, "hi": g.hi, "width": g.width, "ids_value": g.value} for g in gaps]
        self.lines.append(f"{len(gaps)} gaps wider than {self.opts.get('min_width', 0.05):g}")

    # -------------------------------------------------------------------
    def execute(self) -> None:
        getattr(self, self.cfg.experiment)()
        self.report["checks"] = dict(self.checks)
        self.report["ok"] = all(self.checks.values())


def _summary(r: _Run) -> str:
    out = [
        f"experiment: {r.cfg.experiment}",
        f"config_hash: {r.cfg.hash}",
        f"generator: {r.cfg.generator.get('kind')}",
    ]
    out.extend(r.lines)
    for name, ok in r.checks.items():
        out.append(f"{'PASS' if ok else 'FAIL'} {name}")
    out.append("status: " + ("ok" if all(r.checks.values()) else "failed"))
    return "\n".join(out) + "\n"


def run(cfg: ExperimentConfig, out_dir: str | None = None) -> RunResult:
    t0 = time.perf_counter()
    out_dir = out_dir or cfg.output_dir
    r = _Run(cfg)
    r.execute()
    os.makedirs(out_dir, exist_ok=True)
    report = _clean(r.report)
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=1)
        fh.write("\n")
    for name, text in r.tables.items():
        with open(os.path.join(out_dir, name), "w", newline="") as fh:
            fh.write(text)
    summary = _summary(r)
    with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
        fh.write(summary)
    meta = {
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "wall_seconds": time.perf_counter() - t0,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config_hash": cfg.hash,
        "files": sorted(["report.json", "summary.txt", *r.tables]),
    }
    with open(os.path.join(out_dir, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=1)
        fh.write("\n")
    return RunResult(out_dir, report, dict(r.checks), dict(r.tables), summary)
