"""Versioned text outputs: trace CSV, sweep CSV and the INI-style report.

Every file starts with a header line naming its format and version. The
report embeds the config under ``[config:...]`` sections so that it
re-parses with :func:`hvi.config.config_from_report`.
"""

from __future__ import annotations

import configparser
import csv
import math

import numpy as np

from .config import format_value
from .errors import ConfigError
from .solvers import TRACE_COLUMNS

__all__ = [
    "TRACE_HEADER",
    "SWEEP_HEADER",
    "REPORT_HEADER",
    "write_trace_csv",
    "read_trace_csv",
    "write_sweep_csv",
    "read_sweep_csv",
    "write_report",
    "read_report",
]

TRACE_HEADER = "# hvi-trace v1"
SWEEP_HEADER = "# hvi-sweep v1"
REPORT_HEADER = "# hvi report v1"
SWEEP_COLUMNS = ("delta",) + TRACE_COLUMNS


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return "%.17g" % v


def _write_rows(path, header, meta, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(header + "\n")
        if meta:
            fh.write("# " + " ".join("%s=%s" % kv for kv in meta.items()) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _read_rows(path, header, columns):
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if first != header:
            raise ConfigError("%s: expected header %r, found %r" % (path, header, first))
        meta = {}
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            for item in line[1:].split():
                k, _, v = item.partition("=")
                meta[k] = v
        else:
            body.append(line)
    reader = csv.reader(body)
    cols = tuple(next(reader))
    if cols != tuple(columns):
        raise ConfigError("%s: column order %s does not match %s" % (path, cols, columns))
    data = np.array([[float(x) for x in row] for row in reader], dtype=float).reshape(-1, len(cols))
    return meta, cols, data


def write_trace_csv(path, trace):
    meta = {"problem": trace.problem, "variant": trace.variant, "iterations": trace.iterations}
    _write_rows(path, TRACE_HEADER, meta, TRACE_COLUMNS, (r.as_tuple() for r in trace.rows))


def read_trace_csv(path):
    """``(meta, columns, data)`` with one row per logged iteration."""
    return _read_rows(path, TRACE_HEADER, TRACE_COLUMNS)


def write_sweep_csv(path, runs, problem=""):
    """Long-format table: one row per ``(delta, logged iteration)``; ``runs`` is ``[(delta, trace)]``."""
    rows = [(d,) + r.as_tuple() for d, tr in runs for r in tr.rows]
    _write_rows(path, SWEEP_HEADER, {"problem": problem}, SWEEP_COLUMNS, rows)


def read_sweep_csv(path):
    return _read_rows(path, SWEEP_HEADER, SWEEP_COLUMNS)


def write_report(path, config, sections):
    """Write the report: header line, config echo, then ``sections`` (name to ``{key: value}``)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(REPORT_HEADER + "\n\n")
        fh.write(config.to_ini(prefix="config:"))
        for name, items in sections.items():
            fh.write("\n[%s]\n" % name)
            for k, v in items.items():
                fh.write("%s = %s\n" % (k, format_value(_plain(v))))


def _plain(v):
    if isinstance(v, np.ndarray):
        return tuple(float(x) for x in v.ravel())
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def read_report(path):
    """``(config, sections)``; section values are returned as strings."""
    from .config import config_from_report

    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        text = first + "\n" + fh.read()
    if first != REPORT_HEADER:
        raise ConfigError("%s: expected header %r, found %r" % (path, REPORT_HEADER, first))
    cfg = config_from_report(path)
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read_string(text, source=str(path))
    sections = {s: dict(cp.items(s)) for s in cp.sections() if not s.startswith("config:")}
    return cfg, sections
