"""Run configuration: JSON parsing, validation and round-trip serialization.

Every problem is reported as ``"field.path: message"``; parsing collects all
of them before failing.
"""

import json
from dataclasses import dataclass, field, fields
from typing import Optional

from ..errors import ConfigError
from ..potentials import CoefficientField, PotentialSpec
from ..potentials.core import COEFFICIENT_KINDS, FAMILIES
from ..state_dynamics import FIELD_KINDS, FieldPreset
from ..variational_solver import SolverConfig

FORMATS = ("json", "csv")
_MISSING = object()


@dataclass(frozen=True)
class DomainConfig:
    dim: int
    lengths: tuple
    cells: tuple


@dataclass(frozen=True)
class TimeConfig:
    T: float
    steps: int


@dataclass(frozen=True)
class CoefficientConfig:
    kind: str = "constant"
    base: float = 1.0
    amplitude: float = 0.0
    center: tuple = (0.5,)
    width: float = 0.1


@dataclass(frozen=True)
class PotentialConfig:
    family: str
    p: float = 2.0
    a: CoefficientConfig = CoefficientConfig()
    a0: float = 1e-3
    table: Optional[tuple] = None


@dataclass(frozen=True)
class FieldConfig:
    kind: str = "constant"
    amplitude: float = 0.0
    center: tuple = (0.5,)
    width: float = 0.1
    switch_time: float = 0.0


@dataclass(frozen=True)
class DataConfig:
    f: FieldConfig = FieldConfig()
    y0: FieldConfig = FieldConfig()
    box: Optional[tuple] = None


@dataclass(frozen=True)
class ReferenceConfig:
    lam: float = 1e-4
    newton_tol: float = 1e-10
    max_iter: int = 100


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: tuple = FORMATS


@dataclass(frozen=True)
class RunConfig:
    domain: DomainConfig
    time: TimeConfig
    robin_alpha: float
    potential: PotentialConfig
    data: DataConfig
    solver: SolverConfig
    reference: ReferenceConfig
    output: OutputConfig
    # paths of omitted fields that received defaults; not part of equality
    defaults_applied: tuple = field(default=(), compare=False)

    def potential_spec(self) -> PotentialSpec:
        pc = self.potential
        coeff = CoefficientField(pc.a.kind, pc.a.base, pc.a.amplitude, horizon=self.time.T,
                                 center=pc.a.center, width=pc.a.width)
        return PotentialSpec(pc.family, p=pc.p, coefficient=coeff, a0=pc.a0, table=pc.table)

    def field_presets(self):
        return tuple(FieldPreset(**_asdict(fc)) for fc in (self.data.f, self.data.y0))


def _asdict(obj):
    return {f.name: getattr(obj, f.name) for f in fields(obj)}


class _Reader:
    def __init__(self):
        self.errors = []
        self.defaults = []

    def fail(self, path, msg):
        self.errors.append(f"{path}: {msg}")

    def section(self, obj, path, allowed, required=False):
        if obj is _MISSING or obj is None:
            if required:
                self.fail(path, "missing")
            return None
        if not isinstance(obj, dict):
            self.fail(path, "must be an object")
            return None
        for key in obj:
            if key not in allowed:
                self.fail(f"{path}.{key}" if path else key, "unknown key")
        return obj

    def get(self, obj, key, path, default=_MISSING):
        full = f"{path}.{key}" if path else key
        if obj is not None and key in obj:
            return obj[key], full, True
        if default is _MISSING:
            self.fail(full, "missing")
            return None, full, False
        self.defaults.append(full)
        return default, full, False

    def number(self, obj, key, path, default=_MISSING, integer=False, check=None):
        v, full, given = self.get(obj, key, path, default)
        if not given:
            return v
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(full, "must be a number")
            return None
        if integer:
            if float(v) != int(v):
                self.fail(full, "must be an integer")
                return None
            v = int(v)
        else:
            v = float(v)
        if check is not None:
            msg = check(v)
            if msg:
                self.fail(full, msg)
                return None
        return v

    def choice(self, obj, key, path, options, default=_MISSING):
        v, full, given = self.get(obj, key, path, default)
        if given and v not in options:
            self.fail(full, f"unknown (expected one of {', '.join(options)})")
            return None
        return v

    def number_list(self, obj, key, path, default=_MISSING, length=None, integer=False, check=None):
        v, full, given = self.get(obj, key, path, default)
        if not given:
            return None if v is None else tuple(v)
        if not isinstance(v, list) or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
            self.fail(full, "must be a list of numbers")
            return None
        if length is not None and len(v) != length:
            self.fail(full, f"must have {length} entries")
            return None
        if integer and any(float(x) != int(x) for x in v):
            self.fail(full, "entries must be integers")
            return None
        out = tuple(int(x) if integer else float(x) for x in v)
        if check is not None:
            msg = check(out)
            if msg:
                self.fail(full, msg)
                return None
        return out

    def boolean(self, obj, key, path, default=_MISSING):
        v, full, given = self.get(obj, key, path, default)
        if given and not isinstance(v, bool):
            self.fail(full, "must be true or false")
            return None
        return v


def _positive(v):
    return None if v > 0 else "must be > 0"


def _all_positive(vs):
    return None if all(x > 0 for x in vs) else "entries must be > 0"


def _decreasing(vs):
    if not vs:
        return "must not be empty"
    if any(x <= 0 for x in vs):
        return "entries must be > 0"
    if any(b >= a for a, b in zip(vs, vs[1:])):
        return "must be strictly decreasing"
    return None


def _parse_coefficient(rd, obj, path):
    obj = rd.section(obj, path, {"kind", "base", "amplitude", "center", "width"})
    d = CoefficientConfig()
    return CoefficientConfig(
        kind=rd.choice(obj, "kind", path, COEFFICIENT_KINDS, d.kind),
        base=rd.number(obj, "base", path, d.base),
        amplitude=rd.number(obj, "amplitude", path, d.amplitude),
        center=rd.number_list(obj, "center", path, d.center),
        width=rd.number(obj, "width", path, d.width, check=_positive),
    )


def _parse_field(rd, obj, path):
    obj = rd.section(obj, path, {"kind", "amplitude", "center", "width", "switch_time"})
    d = FieldConfig()
    return FieldConfig(
        kind=rd.choice(obj, "kind", path, FIELD_KINDS, d.kind),
        amplitude=rd.number(obj, "amplitude", path, d.amplitude),
        center=rd.number_list(obj, "center", path, d.center),
        width=rd.number(obj, "width", path, d.width, check=_positive),
        switch_time=rd.number(obj, "switch_time", path, d.switch_time),
    )


def _parse_table(rd, obj, path):
    v, full, given = rd.get(obj, "table", path, None)
    if not given:
        return None
    ok = isinstance(v, list) and all(
        isinstance(row, list) and len(row) == 3
        and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in row) for row in v)
    if not ok:
        rd.fail(full, "must be a list of [r, lo, hi] rows")
        return None
    return tuple(tuple(float(x) for x in row) for row in v)


def _from_dict(raw) -> RunConfig:
    rd = _Reader()
    top = rd.section(raw, "", {"domain", "time", "robin_alpha", "potential", "data", "solver",
                               "reference", "output"}, required=True)
    if top is None:
        raise ConfigError(rd.errors or ["config: must be an object"])

    dom = rd.section(top.get("domain", _MISSING), "domain", {"dim", "lengths", "cells"}, required=True)
    dim = rd.number(dom, "dim", "domain", integer=True,
                    check=lambda v: None if v in (1, 2) else "must be 1 or 2") if dom is not None else None
    n = dim if dim in (1, 2) else None
    lengths = rd.number_list(dom, "lengths", "domain", length=n, check=_all_positive) if dom is not None else None
    cells = rd.number_list(dom, "cells", "domain", length=n, integer=True,
                           check=lambda vs: None if all(c >= 2 for c in vs) else "entries must be >= 2") \
        if dom is not None else None

    tm = rd.section(top.get("time", _MISSING), "time", {"T", "steps"}, required=True)
    T = rd.number(tm, "T", "time", check=_positive) if tm is not None else None
    steps = rd.number(tm, "steps", "time", integer=True,
                      check=lambda v: None if v >= 1 else "must be >= 1") if tm is not None else None

    alpha = rd.number(top, "robin_alpha", "", 1.0, check=_positive)

    pot = rd.section(top.get("potential", _MISSING), "potential", {"family", "p", "a", "a0", "table"},
                     required=True)
    pconf = None
    if pot is not None:
        pconf = PotentialConfig(
            family=rd.choice(pot, "family", "potential", FAMILIES),
            p=rd.number(pot, "p", "potential", 2.0, check=lambda v: None if v > 1 else "must be > 1"),
            a=_parse_coefficient(rd, pot.get("a", _MISSING), "potential.a"),
            a0=rd.number(pot, "a0", "potential", 1e-3, check=_positive),
            table=_parse_table(rd, pot, "potential"),
        )

    dat = rd.section(top.get("data", _MISSING), "data", {"f", "y0", "box"})
    box, box_path, box_given = rd.get(dat, "box", "data", None)
    if box_given and box is not None:
        if (not isinstance(box, list) or len(box) != 2
                or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in box)):
            rd.fail(box_path, "must be [y_m, y_M]")
            box = None
        elif not box[0] < box[1]:
            rd.fail(box_path, "needs y_m < y_M")
            box = None
        else:
            box = (float(box[0]), float(box[1]))
    data = DataConfig(_parse_field(rd, dat.get("f", _MISSING) if dat else _MISSING, "data.f"),
                      _parse_field(rd, dat.get("y0", _MISSING) if dat else _MISSING, "data.y0"),
                      box)

    sd = SolverConfig()
    sol = rd.section(top.get("solver", _MISSING), "solver", {f.name for f in fields(SolverConfig)})
    solver_kw = dict(
        lambda_schedule=rd.number_list(sol, "lambda_schedule", "solver", sd.lambda_schedule, check=_decreasing),
        sigma_schedule=rd.number_list(sol, "sigma_schedule", "solver", sd.sigma_schedule, check=_decreasing),
        grad_tol=rd.number(sol, "grad_tol", "solver", sd.grad_tol, check=_positive),
        gap_tol=rd.number(sol, "gap_tol", "solver", sd.gap_tol, check=_positive),
        max_inner_iters=rd.number(sol, "max_inner_iters", "solver", sd.max_inner_iters, integer=True,
                                  check=lambda v: None if v >= 1 else "must be >= 1"),
        initial_step=rd.number(sol, "initial_step", "solver", sd.initial_step, check=_positive),
        shrink=rd.number(sol, "shrink", "solver", sd.shrink,
                         check=lambda v: None if 0 < v < 1 else "must be in (0, 1)"),
        armijo=rd.number(sol, "armijo", "solver", sd.armijo,
                         check=lambda v: None if 0 < v < 1 else "must be in (0, 1)"),
        warm_start=rd.boolean(sol, "warm_start", "solver", sd.warm_start),
        refresh_every=rd.number(sol, "refresh_every", "solver", sd.refresh_every, integer=True,
                                check=lambda v: None if v >= 1 else "must be >= 1"),
        max_cg_iters=rd.number(sol, "max_cg_iters", "solver", sd.max_cg_iters, integer=True,
                               check=lambda v: None if v >= 1 else "must be >= 1"),
    )

    ref = rd.section(top.get("reference", _MISSING), "reference", {"lambda", "newton_tol", "max_iter"})
    rdf = ReferenceConfig()
    reference = ReferenceConfig(
        lam=rd.number(ref, "lambda", "reference", rdf.lam, check=_positive),
        newton_tol=rd.number(ref, "newton_tol", "reference", rdf.newton_tol, check=_positive),
        max_iter=rd.number(ref, "max_iter", "reference", rdf.max_iter, integer=True,
                           check=lambda v: None if v >= 1 else "must be >= 1"),
    )

    out = rd.section(top.get("output", _MISSING), "output", {"directory", "formats"})
    odf = OutputConfig()
    directory, dpath, dgiven = rd.get(out, "directory", "output", odf.directory)
    if dgiven and not isinstance(directory, str):
        rd.fail(dpath, "must be a string")
    formats, fpath, fgiven = rd.get(out, "formats", "output", odf.formats)
    if fgiven:
        if not isinstance(formats, list) or any(f not in FORMATS for f in formats):
            rd.fail(fpath, f"must be a list drawn from {', '.join(FORMATS)}")
            formats = odf.formats
        formats = tuple(formats)

    if rd.errors:
        raise ConfigError(rd.errors)

    cfg = RunConfig(DomainConfig(dim, lengths, cells), TimeConfig(T, steps), alpha, pconf, data,
                    SolverConfig(**solver_kw), reference, OutputConfig(directory, formats),
                    defaults_applied=tuple(rd.defaults))
    # cross-field checks delegated to the domain constructors
    try:
        cfg.potential_spec()
    except ValueError as exc:
        raise ConfigError([f"potential: {exc}"]) from None
    try:
        cfg.field_presets()
    except ValueError as exc:
        raise ConfigError([f"data: {exc}"]) from None
    return cfg


def parse_config(text) -> RunConfig:
    """Parse JSON text into a validated ``RunConfig``.

    Raises
    ------
    ConfigError
        With one ``"path: message"`` entry per problem.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config: invalid JSON ({exc})"]) from None
    return _from_dict(raw)


def config_to_dict(cfg: RunConfig) -> dict:
    """Fully explicit dictionary form (defaults resolved)."""
    pc = cfg.potential
    pot = {"family": pc.family, "p": pc.p, "a": _asdict(pc.a), "a0": pc.a0}
    pot["a"]["center"] = list(pc.a.center)
    if pc.table is not None:
        pot["table"] = [list(row) for row in pc.table]

    def fld(fc):
        d = _asdict(fc)
        d["center"] = list(fc.center)
        return d

    solver = _asdict(cfg.solver)
    solver["lambda_schedule"] = list(cfg.solver.lambda_schedule)
    solver["sigma_schedule"] = list(cfg.solver.sigma_schedule)
    return {
        "domain": {"dim": cfg.domain.dim, "lengths": list(cfg.domain.lengths), "cells": list(cfg.domain.cells)},
        "time": {"T": cfg.time.T, "steps": cfg.time.steps},
        "robin_alpha": cfg.robin_alpha,
        "potential": pot,
        "data": {"f": fld(cfg.data.f), "y0": fld(cfg.data.y0),
                 "box": None if cfg.data.box is None else list(cfg.data.box)},
        "solver": solver,
        "reference": {"lambda": cfg.reference.lam, "newton_tol": cfg.reference.newton_tol,
                      "max_iter": cfg.reference.max_iter},
        "output": {"directory": cfg.output.directory, "formats": list(cfg.output.formats)},
    }


def serialize_config(cfg: RunConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True)
