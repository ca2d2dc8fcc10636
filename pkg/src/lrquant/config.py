"""Strict YAML run configuration.

Example::

    manifold: {kind: Circle, L: 2*pi}
    grids: [256, 512]
    functions:
      f: sin(x)
    fields:
      v: [cos(x)]
    reps:
      half: {angles: [pi]}
    jobs:
      - kind: verify-lr
        params: {f: f, v: v}

Numbers may be written as constant DSL expressions (``pi/2``).  Functions
are a DSL string or ``{expr, support}``; fields are a component list or
``{components, support}``; representations are ``{angles}`` or
``{fiber_dim, matrices}`` with matrices given as row-major ``[re, im]`` pairs.
Unknown keys anywhere are errors, and every expression, field and
representation is built before any job runs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any

import yaml

from . import dsl
from .errors import ConfigError, LRQuantError
from .fields import ScalarField, VectorField
from .homotopy import Pi1Representation
from .manifolds import KINDS, PARAM_NAMES, Manifold, ManifoldSpec, make_manifold

JOB_KINDS = ("verify-lr", "verify-resolvent", "verify-covariance", "verify-lie",
             "verify-cocycle", "verify-local", "spectrum", "sweep", "equivalence")

# Allowed params per job kind: name -> default (REQUIRED marks mandatory ones).
REQUIRED = object()
JOB_PARAMS: dict[str, dict[str, Any]] = {
    "verify-lr": {"f": REQUIRED, "v": REQUIRED, "order": 2},
    "verify-resolvent": {"v": REQUIRED, "lams": [1e-2, 1e-3, 1e-4], "order": 2},
    "verify-covariance": {"v": REQUIRED, "lam": REQUIRED, "f": REQUIRED, "w": REQUIRED,
                          "steps": 64, "order": 2, "probes": 16},
    "verify-lie": {"v": REQUIRED, "w": REQUIRED, "order": 2, "probes": 16},
    "verify-cocycle": {"rep": REQUIRED, "g": REQUIRED, "lam": REQUIRED, "h": REQUIRED,
                       "mu": REQUIRED, "steps": 256, "samples": 50},
    "verify-local": {"rep": REQUIRED, "box": REQUIRED, "lam": 0.3},
    "spectrum": {"rep": REQUIRED, "k": 5, "potential": None, "order": 2, "reference": None},
    "sweep": {"reps": REQUIRED, "k": 5, "potential": None, "order": 2, "reference": None},
    "equivalence": {"rep1": REQUIRED, "rep2": REQUIRED, "expect": None, "n_eigs": 10},
}

DEFAULT_TOLERANCES = {
    "lr": 1e-3,
    "lr_ratio": [3.5, 4.5],
    "resolvent": 1e-10,
    "resolvent_ratio": [8.0, 12.0],
    "covariance_decrease": 3.0,
    "covariance": 1e-2,
    "lie_decrease": 3.0,
    "lie": 1e-1,
    "cocycle": 1e-6,
    "local": 1e-12,
    "spectrum": 1e-3,
}

TOP_KEYS = {"manifold", "grids", "functions", "fields", "reps", "jobs", "tolerances"}


@dataclass
class Job:
    kind: str
    name: str
    params: dict
    index: int


@dataclass
class RunConfig:
    manifold: Manifold
    grids: list
    functions: dict[str, ScalarField]
    fields: dict[str, VectorField]
    reps: dict[str, Pi1Representation]
    jobs: list[Job]
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    source_hash: str = ""


class _Doc:
    """Plain data plus a path -> line table from the YAML node tree."""

    def __init__(self, text: str):
        try:
            node = yaml.compose(text, Loader=yaml.SafeLoader)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            raise ConfigError(f"malformed YAML: {getattr(exc, 'problem', exc)}",
                              None, mark.line + 1 if mark else None) from None
        self.lines: dict[str, int] = {}
        self.data = self._convert(node, "") if node is not None else {}

    def _convert(self, node, path):
        self.lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            out = {}
            for k, v in node.value:
                key = str(k.value)
                sub = f"{path}.{key}" if path else key
                if key in out:
                    raise ConfigError(f"duplicate key {key!r}", sub, k.start_mark.line + 1)
                self.lines[sub] = k.start_mark.line + 1
                out[key] = self._convert(v, sub)
                self.lines[sub] = k.start_mark.line + 1
            return out
        if isinstance(node, yaml.SequenceNode):
            return [self._convert(v, f"{path}[{i}]") for i, v in enumerate(node.value)]
        return _scalar(node)

    def error(self, message, path) -> ConfigError:
        line = self.lines.get(path)
        probe = path
        while line is None and probe:
            probe = probe.rsplit(".", 1)[0] if "." in probe else ""
            line = self.lines.get(probe)
        return ConfigError(message, path or None, line)


def _scalar(node):
    loader = yaml.SafeLoader("")
    try:
        return loader.construct_object(node, deep=True)
    finally:
        loader.dispose()


def _number(doc: _Doc, value, path) -> float:
    if isinstance(value, bool):
        raise doc.error("expected a number", path)
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            e = dsl.parse(value)
            if e.variables() - {"pi"}:
                raise doc.error(f"numeric expression {value!r} uses variables", path)
            return float(dsl.evaluate(e, {}))
        except LRQuantError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise doc.error(f"bad numeric expression {value!r}: {exc}", path) from None
    raise doc.error(f"expected a number, got {type(value).__name__}", path)


def _check_keys(doc: _Doc, mapping, allowed, path, required=()):
    if not isinstance(mapping, dict):
        raise doc.error("expected a mapping", path)
    for key in mapping:
        if key not in allowed:
            raise doc.error(f"unknown key {key!r}", f"{path}.{key}" if path else key)
    for key in required:
        if key not in mapping:
            raise doc.error(f"missing key {key!r}", path)


def _manifold(doc: _Doc, data) -> Manifold:
    _check_keys(doc, data, {"kind"} | {p for names in PARAM_NAMES.values() for p in names},
                "manifold", ("kind",))
    kind = data["kind"]
    if kind not in KINDS:
        raise doc.error(f"unknown manifold kind {kind!r}", "manifold.kind")
    params = {}
    for key, val in data.items():
        if key == "kind":
            continue
        if key not in PARAM_NAMES[kind]:
            raise doc.error(f"{kind} has no parameter {key!r}", f"manifold.{key}")
        params[key] = _number(doc, val, f"manifold.{key}")
    try:
        return make_manifold(ManifoldSpec.of(kind, **params))
    except LRQuantError as exc:
        raise doc.error(str(exc), "manifold") from None


def _box(doc, data, path):
    if not isinstance(data, list):
        raise doc.error("support must be a list of [lo, hi] pairs", path)
    out = []
    for i, pair in enumerate(data):
        if not isinstance(pair, list) or len(pair) != 2:
            raise doc.error("support intervals are [lo, hi] pairs", f"{path}[{i}]")
        out.append((_number(doc, pair[0], f"{path}[{i}][0]"), _number(doc, pair[1], f"{path}[{i}][1]")))
    return out


def _functions(doc, m, data) -> dict[str, ScalarField]:
    out = {}
    if not isinstance(data, dict):
        raise doc.error("expected a mapping of named functions", "functions")
    for name, spec in data.items():
        path = f"functions.{name}"
        support = None
        if isinstance(spec, dict):
            _check_keys(doc, spec, {"expr", "support"}, path, ("expr",))
            support = _box(doc, spec["support"], f"{path}.support") if "support" in spec else None
            spec = spec["expr"]
        try:
            out[name] = ScalarField(dsl.parse(str(spec)), m, support)
        except LRQuantError as exc:
            raise doc.error(f"function {name!r}: {exc}", path) from None
    return out


def _fields(doc, m, data) -> dict[str, VectorField]:
    out = {}
    if not isinstance(data, dict):
        raise doc.error("expected a mapping of named fields", "fields")
    for name, spec in data.items():
        path = f"fields.{name}"
        support = None
        if isinstance(spec, dict):
            _check_keys(doc, spec, {"components", "support"}, path, ("components",))
            support = _box(doc, spec["support"], f"{path}.support") if "support" in spec else None
            spec = spec["components"]
        if not isinstance(spec, list):
            raise doc.error("field components must be a list", path)
        try:
            out[name] = VectorField(tuple(dsl.parse(str(c)) for c in spec), m, support)
        except LRQuantError as exc:
            raise doc.error(f"field {name!r}: {exc}", path) from None
    return out


def _reps(doc, m, data) -> dict[str, Pi1Representation]:
    out = {}
    if not isinstance(data, dict):
        raise doc.error("expected a mapping of named representations", "reps")
    for name, spec in data.items():
        path = f"reps.{name}"
        if not isinstance(spec, dict):
            raise doc.error("representation must be a mapping", path)
        if "angles" in spec:
            _check_keys(doc, spec, {"angles"}, path)
            if not isinstance(spec["angles"], list):
                raise doc.error("angles must be a list", f"{path}.angles")
            wire = {"angles": [_number(doc, a, f"{path}.angles[{i}]") for i, a in enumerate(spec["angles"])]}
        else:
            _check_keys(doc, spec, {"fiber_dim", "matrices"}, path, ("fiber_dim", "matrices"))
            mats = spec["matrices"]
            if not isinstance(mats, list):
                raise doc.error("matrices must be a list", f"{path}.matrices")
            wire = {"fiber_dim": spec["fiber_dim"], "matrices": [
                [[_number(doc, z, f"{path}.matrices[{g}]") for z in pair] for pair in mat]
                for g, mat in enumerate(mats)]}
        try:
            out[name] = Pi1Representation.from_wire(m.presentation, wire)
        except (LRQuantError, TypeError, ValueError) as exc:
            raise doc.error(f"representation {name!r}: {exc}", path) from None
    return out


def _jobs(doc, data, functions, fields, reps) -> list[Job]:
    if not isinstance(data, list):
        raise doc.error("jobs must be a list", "jobs")
    jobs, names = [], set()
    lookups = {"f": functions, "w": fields, "v": fields, "g": fields, "h": fields,
               "rep": reps, "rep1": reps, "rep2": reps}
    for i, job in enumerate(data):
        path = f"jobs[{i}]"
        _check_keys(doc, job, {"kind", "name", "params"}, path, ("kind",))
        kind = job["kind"]
        if kind not in JOB_KINDS:
            raise doc.error(f"unknown job kind {kind!r}", f"{path}.kind")
        name = str(job.get("name", f"{i:02d}-{kind}"))
        if name in names:
            raise doc.error(f"duplicate job name {name!r}", f"{path}.name")
        names.add(name)
        raw = job.get("params", {}) or {}
        spec = JOB_PARAMS[kind]
        _check_keys(doc, raw, set(spec), f"{path}.params",
                    tuple(k for k, d in spec.items() if d is REQUIRED))
        params = {k: d for k, d in spec.items() if d is not REQUIRED}
        params.update(raw)
        for key, table in lookups.items():
            if key in raw and raw[key] not in table:
                raise doc.error(f"unknown name {raw[key]!r}", f"{path}.params.{key}")
        if kind == "sweep":
            if not isinstance(raw["reps"], list) or not raw["reps"]:
                raise doc.error("sweep needs a non-empty list of reps", f"{path}.params.reps")
            for j, r in enumerate(raw["reps"]):
                if r not in reps:
                    raise doc.error(f"unknown name {r!r}", f"{path}.params.reps[{j}]")
        for key in ("lam", "mu"):
            if key in raw:
                params[key] = _number(doc, raw[key], f"{path}.params.{key}")
        if "lams" in raw:
            params["lams"] = [_number(doc, x, f"{path}.params.lams[{j}]") for j, x in enumerate(raw["lams"])]
        if "box" in raw:
            params["box"] = _box(doc, raw["box"], f"{path}.params.box")
        for key in ("k", "order", "steps", "samples", "probes", "n_eigs"):
            if key in raw and not (isinstance(raw[key], int) and not isinstance(raw[key], bool)):
                raise doc.error(f"{key} must be an integer", f"{path}.params.{key}")
        if "potential" in raw and raw["potential"] is not None:
            try:
                dsl.parse(str(raw["potential"]))
            except LRQuantError as exc:
                raise doc.error(f"potential: {exc}", f"{path}.params.potential") from None
        ref = params.get("reference")
        if ref is not None and ref != "flat":
            if not isinstance(ref, list):
                raise doc.error("reference is 'flat' or a list of numbers", f"{path}.params.reference")
            params["reference"] = [_number(doc, x, f"{path}.params.reference[{j}]") for j, x in enumerate(ref)]
        if kind == "equivalence" and params["expect"] not in (None, "equivalent", "distinct", "inconclusive"):
            raise doc.error("expect must be equivalent, distinct or inconclusive", f"{path}.params.expect")
        jobs.append(Job(kind, name, params, i))
    return jobs


def parse_config(text: str) -> RunConfig:
    doc = _Doc(text)
    data = doc.data
    _check_keys(doc, data, TOP_KEYS, "", ("manifold",))
    m = _manifold(doc, data["manifold"])
    grids = data.get("grids", [64])
    if not isinstance(grids, list) or not grids:
        raise doc.error("grids must be a non-empty list", "grids")
    for i, g in enumerate(grids):
        ok = isinstance(g, int) or (isinstance(g, list) and all(isinstance(x, int) for x in g))
        if not ok or isinstance(g, bool):
            raise doc.error("grid sizes are integers or integer lists", f"grids[{i}]")
    functions = _functions(doc, m, data.get("functions", {}) or {})
    fields_ = _fields(doc, m, data.get("fields", {}) or {})
    reps = _reps(doc, m, data.get("reps", {}) or {})
    jobs = _jobs(doc, data.get("jobs", []) or [], functions, fields_, reps)
    tol = dict(DEFAULT_TOLERANCES)
    raw_tol = data.get("tolerances", {}) or {}
    _check_keys(doc, raw_tol, set(DEFAULT_TOLERANCES), "tolerances")
    for key, val in raw_tol.items():
        if isinstance(DEFAULT_TOLERANCES[key], list):
            if not isinstance(val, list) or len(val) != 2:
                raise doc.error("expected a [lo, hi] window", f"tolerances.{key}")
            tol[key] = [_number(doc, x, f"tolerances.{key}") for x in val]
        else:
            tol[key] = _number(doc, val, f"tolerances.{key}")
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return RunConfig(m, grids, functions, fields_, reps, jobs, tol, digest)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())

