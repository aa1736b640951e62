"""INI configuration files.

Example::

    [problem]
    name = gnep

    [solver]
    variant = oeg
    K = 200000
    log_every = 1000

    [schedule]
    a = 1
    b = 3
    delta = 0.5

Sections: ``problem`` (``name`` plus builder keyword arguments), ``solver``,
``schedule``, ``anchors``, ``output``, ``check`` and ``sweep``. Unknown
sections and keys are rejected with the offending line number.
"""

from __future__ import annotations

import configparser
import dataclasses
import inspect
import os
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError
from .schedules import ScheduleParams
from .solvers import VARIANTS, SolverConfig

__all__ = ["Config", "load_config", "parse_config", "config_from_report", "parse_vector", "parse_matrix", "format_value"]

SOLVER_KEYS = {
    "variant": str,
    "K": int,
    "log_every": int,
    "tol_step": float,
    "tol_gap": float,
    "z0": "vector",
    "z_ref": "vector_or_solution",
}
SCHEDULE_KEYS = {
    "a": float,
    "b": float,
    "delta": float,
    "step_mode": str,
    "mu": float,
    "L_F1": float,
    "L_F2": float,
    "explicit_t": float,
}
ANCHOR_KEYS = {"feas": str, "opt": str}
OUTPUT_KEYS = {"dir": str, "trace": str, "report": str}
CHECK_KEYS = {"seed": int, "samples": int, "energy_K": int, "inject": str, "problems": "names"}
SWEEP_KEYS = {"deltas": "floats"}
SECTIONS = {
    "problem": None,
    "solver": SOLVER_KEYS,
    "schedule": SCHEDULE_KEYS,
    "anchors": ANCHOR_KEYS,
    "output": OUTPUT_KEYS,
    "check": CHECK_KEYS,
    "sweep": SWEEP_KEYS,
}


def parse_vector(text):
    """Whitespace- or comma-separated floats."""
    parts = [p for p in re.split(r"[\s,]+", text.strip()) if p]
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise ConfigError("not a list of numbers: %r" % text) from None


def parse_matrix(text):
    """Rows separated by ``;``, entries as in :func:`parse_vector`."""
    rows = [parse_vector(r) for r in text.split(";") if r.strip()]
    if not rows or len({len(r) for r in rows}) != 1:
        raise ConfigError("anchor rows must be non-empty and of equal length")
    return np.array(rows)


def format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return " ".join(format_value(x) for x in v)
    return str(v)


def _scalar(text):
    # problem parameters: bool, int, float, else string
    low = text.strip().lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text.strip()


@dataclass
class Config:
    """Validated contents of a config file."""

    problem: str = "gnep"
    problem_params: dict = field(default_factory=dict)
    variant: str = "oeg"
    K: int = 1000
    log_every: int = 100
    tol_step: Optional[float] = None
    tol_gap: Optional[float] = None
    z0: Optional[tuple] = None
    z_ref: Optional[object] = None
    schedule: ScheduleParams = field(default_factory=ScheduleParams)
    feas_anchors: Optional[str] = None
    opt_anchors: Optional[str] = None
    out_dir: str = "hvi_out"
    trace_name: str = "trace.csv"
    report_name: str = "report.txt"
    seed: int = 0
    check_samples: int = 200
    check_energy_K: int = 2000
    check_inject: Optional[str] = None
    check_problems: Optional[tuple] = None
    deltas: Optional[tuple] = None
    base_dir: str = field(default=".", compare=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError("variant must be one of %s" % ", ".join(VARIANTS))
        if self.K < 0:
            raise ConfigError("K must be nonnegative")
        if self.log_every < 1:
            raise ConfigError("log_every must be at least 1")
        if self.deltas is not None:
            for d in self.deltas:
                if not 0 < d <= 1:
                    raise ConfigError("sweep deltas must lie in (0, 1]")
        if self.check_inject not in (None, "prox_offbyone"):
            raise ConfigError("check inject must be 'prox_offbyone'")

    # ------------------------------------------------------------------ building

    def build_problem(self):
        from .problems import build_problem

        return build_problem(self.problem, **self.problem_params)

    def _anchors(self, spec, dim):
        if spec is None:
            return None
        if spec.startswith("file:"):
            path = spec[5:].strip()
            if not os.path.isabs(path):
                path = os.path.join(self.base_dir, path)
            try:
                pts = np.loadtxt(path, ndmin=2)
            except OSError as exc:
                raise ConfigError("cannot read anchor file %s: %s" % (path, exc)) from None
        else:
            pts = parse_matrix(spec)
        if pts.shape[1] != dim:
            raise ConfigError("anchors have dimension %d, problem has %d" % (pts.shape[1], dim))
        return pts

    def solver_config(self, problem, **overrides):
        z_ref = self.z_ref
        if z_ref == "solution":
            if problem.solution is None:
                raise ConfigError("z_ref = solution but problem %s has no known solution" % problem.name)
            z_ref = problem.solution
        elif z_ref is not None:
            z_ref = np.array(z_ref)
        kwargs = dict(
            variant=self.variant,
            K=self.K,
            log_every=self.log_every,
            schedule=self.schedule,
            z0=None if self.z0 is None else np.array(self.z0),
            z_ref=z_ref,
            feas_anchors=self._anchors(self.feas_anchors, problem.dim),
            opt_anchors=self._anchors(self.opt_anchors, problem.dim),
            tol_step=self.tol_step,
            tol_gap=self.tol_gap,
        )
        kwargs.update(overrides)
        for key in ("z0", "z_ref"):
            v = kwargs[key]
            if v is not None and np.size(v) != problem.dim:
                raise ConfigError("%s has dimension %d, problem has %d" % (key, np.size(v), problem.dim))
        return SolverConfig(**kwargs)

    # ------------------------------------------------------------------ serialization

    def sections(self):
        """Section name to ``{key: text}`` mapping, omitting unset values."""
        out = {"problem": {"name": self.problem}}
        out["problem"].update({k: format_value(v) for k, v in self.problem_params.items()})
        solver = {
            "variant": self.variant,
            "K": self.K,
            "log_every": self.log_every,
            "tol_step": self.tol_step,
            "tol_gap": self.tol_gap,
            "z0": self.z0,
            "z_ref": self.z_ref,
        }
        out["solver"] = {k: format_value(v) for k, v in solver.items() if v is not None}
        sched = {f.name: getattr(self.schedule, f.name) for f in dataclasses.fields(ScheduleParams)}
        out["schedule"] = {k: format_value(v) for k, v in sched.items() if v is not None}
        anchors = {"feas": self.feas_anchors, "opt": self.opt_anchors}
        out["anchors"] = {k: v for k, v in anchors.items() if v is not None}
        out["output"] = {"dir": self.out_dir, "trace": self.trace_name, "report": self.report_name}
        check = {
            "seed": self.seed,
            "samples": self.check_samples,
            "energy_K": self.check_energy_K,
            "inject": self.check_inject,
            "problems": self.check_problems,
        }
        out["check"] = {k: format_value(v) for k, v in check.items() if v is not None}
        if self.deltas is not None:
            out["sweep"] = {"deltas": format_value(self.deltas)}
        return {k: v for k, v in out.items() if v}

    def to_ini(self, prefix=""):
        lines = []
        for sec, items in self.sections().items():
            lines.append("[%s%s]" % (prefix, sec))
            lines.extend("%s = %s" % (k, v) for k, v in items.items())
            lines.append("")
        return "\n".join(lines)


def _key_line(text, section, key):
    sec = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            sec = m.group(1).strip()
        elif sec == section and re.match(r"%s\s*[=:]" % re.escape(key), s, re.IGNORECASE):
            return i
    return None


def _section_line(text, section):
    for i, line in enumerate(text.splitlines(), 1):
        if line.strip() == "[%s]" % section:
            return i
    return None


def _convert(kind, raw):
    if kind is str:
        return raw.strip()
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    if kind == "vector":
        return parse_vector(raw)
    if kind == "vector_or_solution":
        return "solution" if raw.strip() == "solution" else parse_vector(raw)
    if kind == "floats":
        return parse_vector(raw)
    if kind == "names":
        return tuple(p for p in re.split(r"[\s,]+", raw.strip()) if p)
    raise AssertionError(kind)


def parse_config(text, source="<string>", base_dir=".", prefix=""):
    """Parse INI ``text``. Sections not starting with ``prefix`` are ignored when a prefix is given."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        detail = str(exc).splitlines()[0]
        if isinstance(exc, configparser.ParsingError) and exc.errors:
            line, bad = exc.errors[0]
            detail = "cannot parse line %r" % bad.strip()
        where = "%s:%s" % (source, line) if line else source
        raise ConfigError("%s: malformed config: %s" % (where, detail)) from None

    def fail(section, key, msg):
        line = _key_line(text, prefix + section, key) if key else _section_line(text, prefix + section)
        where = "%s:%d" % (source, line) if line else source
        raise ConfigError("%s: [%s] %s" % (where, section, msg))

    values = {}
    for full in cp.sections():
        if prefix and not full.startswith(prefix):
            continue
        sec = full[len(prefix):]
        if sec not in SECTIONS:
            fail(sec, None, "unknown section")
        values[sec] = dict(cp.items(full))

    if "problem" not in values or "name" not in values["problem"]:
        raise ConfigError("%s: missing [problem] name" % source)
    kw = {"base_dir": base_dir}
    prob = dict(values["problem"])
    kw["problem"] = prob.pop("name").strip()
    from .problems import PROBLEMS

    builder = PROBLEMS.get(kw["problem"])
    if builder is None:
        fail("problem", "name", "unknown problem %r (known: %s)" % (kw["problem"], ", ".join(sorted(PROBLEMS))))
    accepted = inspect.signature(builder).parameters
    params = {}
    for key, raw in prob.items():
        if key not in accepted:
            fail("problem", key, "unknown key %r for problem %s" % (key, kw["problem"]))
        params[key] = _scalar(raw)
    kw["problem_params"] = params

    sched = {}
    names = {
        "solver": {k: k for k in SOLVER_KEYS},
        "anchors": {"feas": "feas_anchors", "opt": "opt_anchors"},
        "output": {"dir": "out_dir", "trace": "trace_name", "report": "report_name"},
        "check": {"seed": "seed", "samples": "check_samples", "energy_K": "check_energy_K", "inject": "check_inject", "problems": "check_problems"},
        "sweep": {"deltas": "deltas"},
    }
    for sec, items in values.items():
        if sec == "problem":
            continue
        spec = SECTIONS[sec]
        for key, raw in items.items():
            if key not in spec:
                fail(sec, key, "unknown key %r" % key)
            try:
                val = _convert(spec[key], raw)
            except (ValueError, ConfigError):
                fail(sec, key, "bad value %r for %s" % (raw, key))
            if sec == "schedule":
                sched[key] = val
            else:
                kw[names[sec][key]] = val
    try:
        kw["schedule"] = ScheduleParams(**sched)
        cfg = Config(**kw)
    except ConfigError as exc:
        raise ConfigError("%s: %s" % (source, exc)) from None
    return cfg


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc)) from None
    return parse_config(text, source=str(path), base_dir=os.path.dirname(os.path.abspath(path)))


def config_from_report(path):
    """Re-parse the config echo of a report written by :func:`hvi.io.write_report`."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, source=str(path), base_dir=os.path.dirname(os.path.abspath(path)), prefix="config:")
