"""Scenario files (JSON in) and report rows (CSV / JSON out).

Scenario schema, all keys lower_snake_case::

    {
      "family_spec": {"type": "finite", "atoms": [...], "weights": [...],
                      "densities": [[...], ...]}
                   | {"type": "gaussian", "means": [[...], ...], "sigma": 1.0},
      "product_n": 1,
      "reference": {"kind": "uniform_mixture" | "indexed" | "custom_weights"
                            | "custom_density", "index": 0, "weights": [...],
                    "density": [...]},
      "bounds": ["two_point", "vj_improved", ...],
      "lambda_policy": {"kind": "fixed", "lambda": 1.0}
                     | {"kind": "optimize", "range": [1e-3, 1e3],
                        "points": 61, "tol": 1e-6},
      "mc": {"samples": 100000, "seed": 42},
      "oracle": {"minimax_iters": 100000, "enum_cap": 100000,
                 "product_size_cap": 1000000}
    }

Only ``family_spec`` and ``bounds`` are required; a free-text
``description`` is accepted and ignored.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .bounds import METHODS, BoundConfig, BoundResult
from .errors import BoundsError, ParseError, SchemaError
from .family import (
    FiniteFamily,
    GaussianFamily,
    ReferenceSpec,
    make_finite_family,
    make_gaussian_family,
)

FLOAT_FMT = ".12g"

DEFAULTS = {
    "product_n": 1,
    "reference": {"kind": "uniform_mixture"},
    "lambda_policy": {"kind": "fixed", "lambda": 1.0},
    "mc": {"samples": 100_000, "seed": 42},
    "oracle": {"minimax_iters": 100_000, "enum_cap": 100_000, "product_size_cap": 1_000_000},
}
LAMBDA_OPTIMIZE_DEFAULTS = {"range": [1e-3, 1e3], "points": 61, "tol": 1e-6}
TOP_LEVEL_KEYS = {"family_spec", "bounds", "description", *DEFAULTS}


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise SchemaError(f"missing key {where}.{key}" if where else f"missing key {key}")
    return mapping[key]


def _check_keys(mapping, allowed, where):
    if not isinstance(mapping, dict):
        raise SchemaError(f"{where} must be an object")
    extra = sorted(set(mapping) - set(allowed))
    if extra:
        raise SchemaError(f"unknown key(s) {extra} in {where or 'scenario'}")


@dataclass(frozen=True)
class Scenario:
    family_spec: dict
    bounds: tuple
    product_n: int
    reference: ReferenceSpec
    lambda_policy: dict
    mc: dict
    oracle: dict

    def build_family(self):
        spec = self.family_spec
        if spec["type"] == "finite":
            return make_finite_family(spec.get("atoms"), spec.get("weights"), spec["densities"])
        return make_gaussian_family(spec["means"], spec["sigma"])

    def bound_config(self, methods=None) -> BoundConfig:
        lp = self.lambda_policy
        optimize = lp["kind"] == "optimize"
        return BoundConfig(
            methods=tuple(methods if methods is not None else self.bounds),
            reference=self.reference,
            lam=None if optimize else lp["lambda"],
            optimize=optimize,
            lambda_range=tuple(lp.get("range", LAMBDA_OPTIMIZE_DEFAULTS["range"])),
            grid_points=lp.get("points", LAMBDA_OPTIMIZE_DEFAULTS["points"]),
            refine_tol=lp.get("tol", LAMBDA_OPTIMIZE_DEFAULTS["tol"]),
            mc_samples=self.mc["samples"],
            mc_seed=self.mc["seed"],
            minimax_iters=self.oracle["minimax_iters"],
        )

    def to_dict(self) -> dict:
        return {
            "family_spec": copy.deepcopy(self.family_spec),
            "product_n": self.product_n,
            "reference": self.reference.to_dict(),
            "bounds": list(self.bounds),
            "lambda_policy": dict(self.lambda_policy),
            "mc": dict(self.mc),
            "oracle": dict(self.oracle),
        }


def _parse_family_spec(spec) -> dict:
    if not isinstance(spec, dict):
        raise SchemaError("family_spec must be an object")
    kind = _require(spec, "type", "family_spec")
    if kind == "finite":
        _check_keys(spec, {"type", "atoms", "weights", "densities"}, "family_spec")
        _require(spec, "densities", "family_spec")
        out = {"type": "finite", "densities": spec["densities"]}
        n_atoms = len(spec["densities"][0]) if spec["densities"] else 0
        out["atoms"] = spec.get("atoms", list(range(n_atoms)))
        out["weights"] = spec.get("weights", [1.0] * n_atoms)
        out["atoms"] = [tuple(a) if isinstance(a, list) else a for a in out["atoms"]]
        return out
    if kind == "gaussian":
        _check_keys(spec, {"type", "means", "sigma"}, "family_spec")
        means = _require(spec, "means", "family_spec")
        means = [m if isinstance(m, list) else [m] for m in means]
        return {"type": "gaussian", "means": means, "sigma": _require(spec, "sigma", "family_spec")}
    raise SchemaError(f"family_spec.type must be 'finite' or 'gaussian', got {kind!r}")


def _parse_reference(ref) -> ReferenceSpec:
    _check_keys(ref, {"kind", "index", "weights", "density"}, "reference")
    kind = _require(ref, "kind", "reference")
    if kind not in ReferenceSpec.KINDS:
        raise SchemaError(f"reference.kind must be one of {ReferenceSpec.KINDS}, got {kind!r}")
    try:
        return ReferenceSpec(kind, ref.get("index"), ref.get("weights"), ref.get("density"))
    except BoundsError as exc:
        raise SchemaError(f"reference: {exc}") from exc


def _parse_lambda_policy(lp) -> dict:
    _check_keys(lp, {"kind", "lambda", "range", "points", "tol"}, "lambda_policy")
    kind = _require(lp, "kind", "lambda_policy")
    if kind == "fixed":
        lam = lp.get("lambda", 1.0)
        if not isinstance(lam, (int, float)) or not lam > 0:
            raise SchemaError(f"lambda_policy.lambda must be positive, got {lam!r}")
        return {"kind": "fixed", "lambda": float(lam)}
    if kind == "optimize":
        out = {"kind": "optimize", **LAMBDA_OPTIMIZE_DEFAULTS}
        out.update({k: lp[k] for k in ("range", "points", "tol") if k in lp})
        lo, hi = out["range"]
        if not 0 < lo < hi:
            raise SchemaError(f"lambda_policy.range must satisfy 0 < lo < hi, got {out['range']}")
        return out
    raise SchemaError(f"lambda_policy.kind must be 'fixed' or 'optimize', got {kind!r}")


def _positive_int(value, where):
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise SchemaError(f"{where} must be a positive integer, got {value!r}")
    return value


def scenario_from_dict(raw: dict) -> Scenario:
    _check_keys(raw, TOP_LEVEL_KEYS, "")
    family_spec = _parse_family_spec(_require(raw, "family_spec", ""))
    bounds = _require(raw, "bounds", "")
    if not isinstance(bounds, list) or not bounds:
        raise SchemaError("bounds must be a non-empty list of method names")
    unknown = [b for b in bounds if b not in METHODS]
    if unknown:
        raise SchemaError(f"unknown bound method(s) {unknown}; valid names: {', '.join(METHODS)}")
    merged = copy.deepcopy(DEFAULTS)
    for key in ("mc", "oracle"):
        if key in raw:
            _check_keys(raw[key], DEFAULTS[key], key)
            merged[key].update(raw[key])
    mc = {"samples": _positive_int(merged["mc"]["samples"], "mc.samples"),
          "seed": merged["mc"]["seed"]}
    if isinstance(mc["seed"], bool) or not isinstance(mc["seed"], int) or mc["seed"] < 0:
        raise SchemaError(f"mc.seed must be a non-negative integer, got {mc['seed']!r}")
    oracle = {k: _positive_int(v, f"oracle.{k}") for k, v in merged["oracle"].items()}
    return Scenario(
        family_spec=family_spec,
        bounds=tuple(dict.fromkeys(bounds)),
        product_n=_positive_int(raw.get("product_n", 1), "product_n"),
        reference=_parse_reference(raw.get("reference", DEFAULTS["reference"])),
        lambda_policy=_parse_lambda_policy(raw.get("lambda_policy", DEFAULTS["lambda_policy"])),
        mc=mc,
        oracle=oracle,
    )


def parse_scenario(path) -> Scenario:
    """Read and validate a scenario file, filling every default."""
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return scenario_from_dict(raw)


def family_to_spec(family) -> dict:
    if isinstance(family, GaussianFamily):
        return {"type": "gaussian", "means": family.means.tolist(), "sigma": family.sigma}
    assert isinstance(family, FiniteFamily)
    return {
        "type": "finite",
        "atoms": [list(a) if isinstance(a, tuple) else a for a in family.space.atoms],
        "weights": family.space.weights.tolist(),
        "densities": family.densities.tolist(),
    }


# -- report rows -------------------------------------------------------------

COLUMNS = (
    "method", "target", "value", "raw_value", "vacuous", "lambda_star",
    "reference_label", "n", "minimax_risk_lower_bound", "notes",
)


def _round(x):
    if x is None or isinstance(x, str):
        return x
    x = float(x)
    if not math.isfinite(x):
        return x
    return float(format(x, FLOAT_FMT))


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return format(x, FLOAT_FMT)
    return str(x)


@dataclass(frozen=True)
class ReportRow:
    """One output line. ``value is None`` means not available (``n/a``)."""

    method: str
    target: str
    value: float | None
    raw_value: float | None
    vacuous: bool
    lambda_star: float | None
    reference_label: str
    n: int
    minimax_risk_lower_bound: float | None
    notes: str = ""

    @classmethod
    def make(cls, method, target, value, raw_value, *, vacuous=False, lambda_star=None,
             reference_label="", n=1, notes=""):
        mrlb = None if value is None else min(max(1.0 - value, 0.0), 1.0)
        return cls(method, target, _round(value), _round(raw_value), bool(vacuous),
                   _round(lambda_star), reference_label, int(n), _round(mrlb), notes)

    @classmethod
    def from_bound(cls, r: BoundResult, n: int = 1) -> "ReportRow":
        return cls.make(r.method, r.target, r.value, r.raw_value, vacuous=r.vacuous,
                        lambda_star=r.lambda_used, reference_label=r.reference_label, n=n,
                        notes="; ".join(r.notes))

    def csv_fields(self) -> list[str]:
        out = []
        for name in COLUMNS:
            v = getattr(self, name)
            if v is None and name in ("value", "raw_value", "minimax_risk_lower_bound"):
                out.append("n/a")
            else:
                out.append(_fmt(v))
        return out

    def to_json(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, float) and not math.isfinite(v):
                d[k] = "inf" if v > 0 else "-inf"
        return d

    @classmethod
    def from_json(cls, d: dict) -> "ReportRow":
        vals = {}
        for f in fields(cls):
            v = d[f.name]
            if v in ("inf", "-inf") and f.name != "notes":
                v = float(v)
            vals[f.name] = v
        return cls(**vals)


def render_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in rows:
        w.writerow(row.csv_fields())
    return buf.getvalue()


def render_json(rows, scenario: Scenario | None = None, command: str = "eval", extra=None) -> str:
    doc = {"command": command}
    if scenario is not None:
        doc["scenario"] = scenario.to_dict()
    if extra:
        doc.update(extra)
    doc["columns"] = list(COLUMNS)
    doc["rows"] = [r.to_json() for r in rows]
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def rows_from_json(text: str) -> list[ReportRow]:
    return [ReportRow.from_json(d) for d in json.loads(text)["rows"]]


def write_atomic(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
