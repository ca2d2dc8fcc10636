"""Job execution and report writing for the command-line front end.

CSV columns per job kind (``n`` is the grid shape joined by ``x``):

=================  ==========================================================
verify-lr          job, n, residual, absolute, norm_kind, ratio
verify-resolvent   job, n, quantity, lam, residual, norm_kind
verify-covariance  job, n, quantity, residual, norm_kind, ratio
verify-lie         job, n, residual, absolute, norm_kind, ratio
verify-cocycle     job, n, samples, wrapping, residual
verify-local       job, n, quantity, residual
spectrum           job, n, rep, index, eigenvalue, residual, reference
sweep              job, rep, n, solver, max_residual, max_error, E0 .. E{k-1}
equivalence        job, n, verdict, trace_difference, spectrum_difference
=================  ==========================================================

Ratios are coarse-over-fine residuals between consecutive configured grids.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import operators as ops
from . import representations as reps_mod
from . import spectra
from .config import Job, RunConfig
from .errors import LRQuantError
from .flows import FlowMap
from .manifolds import make_grid

COLUMNS = {
    "verify-lr": ["job", "n", "residual", "absolute", "norm_kind", "ratio"],
    "verify-resolvent": ["job", "n", "quantity", "lam", "residual", "norm_kind"],
    "verify-covariance": ["job", "n", "quantity", "residual", "norm_kind", "ratio"],
    "verify-lie": ["job", "n", "residual", "absolute", "norm_kind", "ratio"],
    "verify-cocycle": ["job", "n", "samples", "wrapping", "residual"],
    "verify-local": ["job", "n", "quantity", "residual"],
    "spectrum": ["job", "n", "rep", "index", "eigenvalue", "residual", "reference"],
    "sweep": ["job", "rep", "n", "solver", "max_residual", "max_error"],
    "equivalence": ["job", "n", "verdict", "trace_difference", "spectrum_difference"],
}

SELECTIONS = {
    "verify": {k for k in COLUMNS if k.startswith("verify-")} | {"equivalence"},
    "spectrum": {"spectrum", "sweep"},
    "report": set(COLUMNS),
}


@dataclass
class JobResult:
    job: Job
    passed: bool
    columns: list[str]
    rows: list[dict] = field(default_factory=list)
    records: list[dict] = field(default_factory=list)
    inputs: dict = field(default_factory=dict)
    error: str | None = None

    def to_dict(self) -> dict:
        return {"job": self.job.name, "kind": self.job.kind, "inputs": self.inputs,
                "records": self.records, "pass": self.passed, "error": self.error}


def _shape_label(shape) -> str:
    return "x".join(str(int(s)) for s in np.atleast_1d(shape))


def _ratios(values):
    out = [None]
    for a, b in zip(values, values[1:]):
        out.append(a / b if b > 0 else float("inf"))
    return out


class Runner:
    def __init__(self, cfg: RunConfig, seed: int = 0, strict: bool = False):
        self.cfg = cfg
        self.seed = seed
        self.strict = strict
        self.tol = cfg.tolerances

    # -- helpers
    def _grid(self, g):
        return make_grid(self.cfg.manifold, g)

    def _space(self, rep_name, g):
        return reps_mod.build_space(self.cfg.manifold, self.cfg.reps[rep_name], g)

    def _inputs(self, job: Job) -> dict:
        cfg = self.cfg
        out = {}
        for key, val in job.params.items():
            if key in ("f",) and val in cfg.functions:
                out[key] = str(cfg.functions[val])
            elif key in ("v", "w", "g", "h") and val in cfg.fields:
                out[key] = str(cfg.fields[val])
            elif key in ("rep", "rep1", "rep2") and val in cfg.reps:
                out[key] = {"name": val, **cfg.reps[val].summary()}
            else:
                out[key] = val
        out["grids"] = [_shape_label(g) for g in cfg.grids]
        out["manifold"] = cfg.manifold.label()
        return out

    def run(self, job: Job) -> JobResult:
        columns = list(COLUMNS[job.kind])
        result = JobResult(job, False, columns, inputs=self._inputs(job))
        try:
            getattr(self, "_" + job.kind.replace("-", "_"))(job, result)
        except LRQuantError as exc:
            result.passed = False
            result.error = f"{type(exc).__name__}: {exc}"
        return result

    # -- verification jobs
    def _verify_lr(self, job, res):
        p, cfg = job.params, self.cfg
        f, v = cfg.functions[p["f"]], cfg.fields[p["v"]]
        recs = [ops.check_lr_relation(self._grid(g), f, v, p["order"], levels=1).records[0]
                for g in cfg.grids]
        ratios = _ratios([r.residual for r in recs])
        for r, q in zip(recs, ratios):
            res.rows.append({"job": job.name, "n": _shape_label(r.resolution), "residual": r.residual,
                             "absolute": r.extra["absolute"], "norm_kind": r.norm_kind, "ratio": q})
            res.records.append(r.to_dict())
        ok = recs[-1].residual <= self.tol["lr"]
        if self.strict and len(recs) > 1:
            lo, hi = self.tol["lr_ratio"]
            ok = ok and lo <= ratios[-1] <= hi
        res.passed = bool(ok)

    def _verify_resolvent(self, job, res):
        p = job.params
        rep = ops.check_resolvent_identities(self._grid(self.cfg.grids[-1]), self.cfg.fields[p["v"]],
                                             p["lams"], p["order"])
        for r in rep.records:
            res.rows.append({"job": job.name, "n": _shape_label(r.resolution), "quantity": r.quantity,
                             "lam": r.extra.get("lam"), "residual": r.residual, "norm_kind": r.norm_kind})
            res.records.append(r.to_dict())
        ident = [r.residual for r in rep.records if r.quantity.startswith("R")]
        ok = max(ident) <= self.tol["resolvent"] and rep.residual("norm(R)") <= 1 + 1e-12
        if self.strict:
            lo, hi = self.tol["resolvent_ratio"]
            limits = [r.residual for r in rep.select("resolvent-limit")]
            ok = ok and all(lo <= a / b <= hi for a, b in zip(limits, limits[1:]))
        res.passed = bool(ok)

    def _verify_covariance(self, job, res):
        p, cfg = job.params, self.cfg
        g = FlowMap(cfg.fields[p["v"]], p["lam"], p["steps"])
        per_grid = [ops.check_covariance(self._grid(n), g, cfg.functions[p["f"]], cfg.fields[p["w"]],
                                         p["order"], levels=1, probes=p["probes"]) for n in cfg.grids]
        ok = True
        for quantity in ("function", "resolvent"):
            recs = [rep.select(quantity)[0] for rep in per_grid]
            ratios = _ratios([r.residual for r in recs])
            for r, q in zip(recs, ratios):
                res.rows.append({"job": job.name, "n": _shape_label(r.resolution), "quantity": quantity,
                                 "residual": r.residual, "norm_kind": r.norm_kind, "ratio": q})
                res.records.append(r.to_dict())
            ok = ok and recs[-1].residual <= self.tol["covariance"]
            if self.strict and len(recs) > 1:
                ok = ok and (recs[-1].residual <= 1e-9 or ratios[-1] >= self.tol["covariance_decrease"])
        res.passed = bool(ok)

    def _verify_lie(self, job, res):
        p, cfg = job.params, self.cfg
        recs = [ops.check_lie_relations(self._grid(n), cfg.fields[p["v"]], cfg.fields[p["w"]],
                                        p["order"], levels=1, probes=p["probes"]).records[0]
                for n in cfg.grids]
        ratios = _ratios([r.residual for r in recs])
        for r, q in zip(recs, ratios):
            res.rows.append({"job": job.name, "n": _shape_label(r.resolution), "residual": r.residual,
                             "absolute": r.extra["absolute"], "norm_kind": r.norm_kind, "ratio": q})
            res.records.append(r.to_dict())
        ok = recs[-1].residual <= self.tol["lie"]
        if self.strict and len(recs) > 1:
            ok = ok and (recs[-1].extra["absolute"] <= 1e-10 or ratios[-1] >= self.tol["lie_decrease"])
        res.passed = bool(ok)

    def _verify_cocycle(self, job, res):
        p, cfg = job.params, self.cfg
        s = self._space(p["rep"], cfg.grids[-1])
        g = FlowMap(cfg.fields[p["g"]], p["lam"], p["steps"])
        h = FlowMap(cfg.fields[p["h"]], p["mu"], p["steps"])
        rng = np.random.default_rng([self.seed, job.index])
        m = cfg.manifold
        x = np.asarray(m.lower) + rng.random((p["samples"], m.dim)) * np.asarray(m.extent)
        r = reps_mod.check_cocycle(s, g, h, x).records[0]
        res.rows.append({"job": job.name, "n": _shape_label(r.resolution), "samples": p["samples"],
                         "wrapping": r.extra["wrapping"], "residual": r.residual})
        res.records.append(r.to_dict())
        res.passed = r.residual <= self.tol["cocycle"]

    def _verify_local(self, job, res):
        p = job.params
        s = self._space(p["rep"], self.cfg.grids[-1])
        rep = reps_mod.check_locally_schroedinger(s, p["box"], lam=p["lam"])
        for r in rep.records:
            res.rows.append({"job": job.name, "n": _shape_label(r.resolution), "quantity": r.quantity,
                             "residual": r.residual})
            res.records.append(r.to_dict())
        res.passed = max(r.residual for r in rep.records) <= self.tol["local"]

    def _equivalence(self, job, res):
        p = job.params
        n = self.cfg.grids[-1]
        verdict = reps_mod.check_equivalence(self._space(p["rep1"], n), self._space(p["rep2"], n),
                                             n_eigs=p["n_eigs"])
        res.rows.append({"job": job.name, "n": _shape_label(n), "verdict": verdict.verdict,
                         "trace_difference": verdict.trace_difference,
                         "spectrum_difference": verdict.spectrum_difference})
        res.records.append(verdict.to_dict())
        if p["expect"] is not None:
            res.passed = verdict.verdict == p["expect"]
        else:
            res.passed = not (self.strict and verdict.verdict == "inconclusive")

    # -- spectral jobs
    def _reference(self, p, rep_name, k):
        ref = p["reference"]
        if ref is None:
            return None
        if ref == "flat":
            m = self.cfg.manifold
            R = self.cfg.reps[rep_name]
            if m.kind not in ("Circle", "Torus") or R.fiber_dim != 1:
                raise LRQuantError("reference 'flat' needs a 1-dim rep on a Circle or Torus")
            angles = [float(np.angle(M[0, 0])) for M in R.matrices]
            return spectra.flat_torus_levels(m.extent, angles, k)
        return np.asarray(ref[:k], dtype=float)

    def _spectrum(self, job, res):
        p = job.params
        n = self.cfg.grids[-1]
        s = self._space(p["rep"], n)
        out = spectra.eigenvalues(spectra.hamiltonian(s, p["potential"], p["order"]), p["k"])
        ref = self._reference(p, p["rep"], p["k"])
        for i, (e, r) in enumerate(zip(out.eigenvalues, out.residuals)):
            res.rows.append({"job": job.name, "n": _shape_label(n), "rep": p["rep"], "index": i,
                             "eigenvalue": e, "residual": r,
                             "reference": None if ref is None or i >= len(ref) else float(ref[i])})
        res.records.append({"eigenvalues": out.eigenvalues, "residuals": out.residuals,
                            "degeneracies": out.degeneracies, "solver": out.solver})
        if ref is None:
            res.passed = True
        else:
            m = min(len(ref), len(out.eigenvalues))
            res.passed = bool(np.abs(np.asarray(out.eigenvalues[:m]) - ref[:m]).max() <= self.tol["spectrum"])

    def _sweep(self, job, res):
        p, cfg = job.params, self.cfg
        n = cfg.grids[-1]
        k = p["k"]
        res.columns += [f"E{i}" for i in range(k)]
        results = spectra.theta_sweep(cfg.manifold, [cfg.reps[r] for r in p["reps"]], n, k,
                                      p["potential"], p["order"])
        ok = True
        for name, out in zip(p["reps"], results):
            row = {"job": job.name, "rep": name, "n": _shape_label(n), "solver": out.solver,
                   "max_residual": max(out.residuals) if out.residuals else None, "max_error": None}
            if out.error:
                ok = False
            else:
                ref = self._reference(p, name, k)
                if ref is not None:
                    err = float(np.abs(np.asarray(out.eigenvalues) - ref).max())
                    row["max_error"] = err
                    ok = ok and err <= self.tol["spectrum"]
            for i, e in enumerate(out.eigenvalues):
                row[f"E{i}"] = e
            res.rows.append(row)
            res.records.append({"rep": name, "eigenvalues": out.eigenvalues, "residuals": out.residuals,
                                "degeneracies": out.degeneracies, "error": out.error})
        res.passed = bool(ok)


def run_jobs(cfg: RunConfig, selection: str = "report", seed: int = 0, workers: int = 1,
             strict: bool = False) -> list[JobResult]:
    kinds = SELECTIONS[selection]
    jobs = [j for j in cfg.jobs if j.kind in kinds]
    runner = Runner(cfg, seed, strict)
    if workers <= 1 or len(jobs) <= 1:
        return [runner.run(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(runner.run, jobs))


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def csv_text(columns, rows, timestamp: bool = True) -> str:
    buf = io.StringIO()
    if timestamp:
        buf.write(f"# generated {time.strftime('%Y-%m-%dT%H:%M:%S%z')}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_value(row.get(c)) for c in columns])
    return buf.getvalue()


def atomic_write(path, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def report_dict(cfg: RunConfig, results: list[JobResult]) -> dict:
    return {"version": __version__, "config-hash": cfg.source_hash,
            "jobs": [r.to_dict() for r in results]}


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def write_outputs(cfg: RunConfig, results: list[JobResult], out_dir, timestamp: bool = True) -> list[str]:
    written = []
    for r in results:
        path = os.path.join(out_dir, f"{r.job.name}.csv")
        atomic_write(path, csv_text(r.columns, r.rows, timestamp))
        written.append(path)
    path = os.path.join(out_dir, "report.json")
    atomic_write(path, json.dumps(report_dict(cfg, results), indent=2, sort_keys=True,
                                  default=_json_default) + "\n")
    written.append(path)
    return written
