"""Config-driven command line front end.

One INI-style config file describes a problem and every subcommand reads
the parts it needs, so each worked example reduces to one command:

    hjadm <subcommand> --config <path> [--out <dir>] [--format csv|json]

Subcommands: series, critical-time, characteristics, fd-solve, compare,
radius.  Outputs are written atomically and floats are printed in their
shortest round-trip form, so repeated runs are byte-identical.  Exit codes:
0 success, 1 config error, 2 numerical failure (CFL violation, non-finite
values, node-cap overflow, evaluation domain error).

The log level is taken from the HJADM_LOG environment variable
(quiet | info | debug).
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from . import symexpr as sx
from . import adomian, characteristics, fdsolve
from .adomian import ProblemSpec

log = logging.getLogger("hjadm")

SUBCOMMANDS = ("series", "critical-time", "characteristics", "fd-solve",
               "compare", "radius")


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class AdmConfig:
    n_terms: int = 4
    node_cap: int = sx.DEFAULT_NODE_CAP


@dataclass(frozen=True)
class CharacteristicsConfig:
    fan_size: int = 10_001
    scan_points: int = 10_000


@dataclass(frozen=True)
class FdConfig:
    grid_points: int = 1001
    cfl: float = 0.5
    boundary: str = "linear"
    t_end: float = 1.0
    snapshot_times: tuple[float, ...] = ()


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    format: str = "csv"


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemSpec
    hamiltonian_text: str
    u0_text: str
    adm: AdmConfig
    characteristics: CharacteristicsConfig
    fd: FdConfig
    outputs: OutputConfig

    def echo(self) -> dict:
        return {
            "problem": {
                "hamiltonian": self.hamiltonian_text,
                "u0": self.u0_text,
                "x_min": self.problem.x_min,
                "x_max": self.problem.x_max,
            },
            "adm": {"n_terms": self.adm.n_terms,
                    "node_cap": self.adm.node_cap},
            "characteristics": {
                "fan_size": self.characteristics.fan_size,
                "scan_points": self.characteristics.scan_points,
            },
            "fd": {
                "grid_points": self.fd.grid_points,
                "cfl": self.fd.cfl,
                "boundary": self.fd.boundary,
                "t_end": self.fd.t_end,
                "snapshot_times": list(self.fd.snapshot_times),
            },
            "outputs": {"directory": self.outputs.directory,
                        "format": self.outputs.format},
        }


@dataclass
class OutputRecord:
    file: str
    rows: int
    columns: list[str]


@dataclass
class RunManifest:
    subcommand: str
    version: str
    config: dict
    stages: list[dict] = field(default_factory=list)
    outputs: list[OutputRecord] = field(default_factory=list)
    error: Optional[dict] = None

    def to_dict(self) -> dict:
        return {
            "tool": "hjadm",
            "version": self.version,
            "subcommand": self.subcommand,
            "config": self.config,
            "stages": self.stages,
            "outputs": [
                {"file": o.file, "rows": o.rows, "columns": o.columns}
                for o in self.outputs
            ],
            "error": self.error,
        }


_KNOWN_KEYS = {
    "problem": {"hamiltonian", "u0", "x_min", "x_max"},
    "adm": {"n_terms", "node_cap"},
    "characteristics": {"fan_size", "scan_points"},
    "fd": {"grid_points", "cfl", "boundary", "t_end", "snapshot_times"},
    "outputs": {"directory", "format"},
}


def _strip_quotes(text: str) -> str:
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    return text


def _parse_expression(section: str, key: str, text: str, allowed: str) -> sx.Expr:
    try:
        expr = sx.parse(_strip_quotes(text))
    except sx.ParseError as err:
        raise ConfigError(f"[{section}] {key}: {err}") from err
    extra = expr.free_vars - {allowed}
    if extra:
        raise ConfigError(
            f"[{section}] {key}: unknown variable "
            f"{', '.join(sorted(extra))} (only '{allowed}' is allowed)")
    return expr


def _get_number(section, key, raw, kind=float):
    try:
        return kind(_strip_quotes(raw))
    except ValueError as err:
        raise ConfigError(f"[{section}] {key}: not a valid "
                          f"{kind.__name__}: {raw!r}") from err


def load_config(path: str | Path) -> RunConfig:
    """Read and fully validate a run configuration."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (configparser.Error, OSError) as err:
        raise ConfigError(f"{path}: {err}") from err

    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in _KNOWN_KEYS[section]:
                raise ConfigError(f"unknown key '{key}' in [{section}]")

    if "problem" not in parser:
        raise ConfigError("missing required section [problem]")
    prob = parser["problem"]
    for required in ("hamiltonian", "u0", "x_min", "x_max"):
        if required not in prob:
            raise ConfigError(f"[problem] missing required key '{required}'")

    adm_sec = parser["adm"] if "adm" in parser else {}
    n_terms = _get_number("adm", "n_terms", adm_sec.get("n_terms", "4"), int)
    node_cap = _get_number("adm", "node_cap",
                           adm_sec.get("node_cap", str(sx.DEFAULT_NODE_CAP)), int)
    if n_terms < 0:
        raise ConfigError("[adm] n_terms must be non-negative")
    if node_cap < 1:
        raise ConfigError("[adm] node_cap must be positive")

    hamiltonian = _parse_expression("problem", "hamiltonian",
                                    prob["hamiltonian"], "v")
    u0 = _parse_expression("problem", "u0", prob["u0"], "x")
    x_min = _get_number("problem", "x_min", prob["x_min"])
    x_max = _get_number("problem", "x_max", prob["x_max"])
    try:
        problem = ProblemSpec(hamiltonian, u0, x_min, x_max, node_cap)
    except ValueError as err:
        raise ConfigError(f"[problem]: {err}") from err

    char_sec = parser["characteristics"] if "characteristics" in parser else {}
    fan_size = _get_number("characteristics", "fan_size",
                           char_sec.get("fan_size", "10001"), int)
    scan_points = _get_number("characteristics", "scan_points",
                              char_sec.get("scan_points", "10000"), int)
    if fan_size < 2:
        raise ConfigError("[characteristics] fan_size must be at least 2")
    if scan_points < 3:
        raise ConfigError("[characteristics] scan_points must be at least 3")

    fd_sec = parser["fd"] if "fd" in parser else {}
    grid_points = _get_number("fd", "grid_points",
                              fd_sec.get("grid_points", "1001"), int)
    cfl = _get_number("fd", "cfl", fd_sec.get("cfl", "0.5"))
    boundary = _strip_quotes(fd_sec.get("boundary", "linear"))
    t_end = _get_number("fd", "t_end", fd_sec.get("t_end", "1.0"))
    if grid_points < 3:
        raise ConfigError("[fd] grid_points must be at least 3")
    if boundary not in fdsolve.BOUNDARY_MODES:
        raise ConfigError(f"[fd] boundary must be one of "
                          f"{', '.join(fdsolve.BOUNDARY_MODES)}")
    if t_end < 0:
        raise ConfigError("[fd] t_end must be non-negative")
    raw_times = _strip_quotes(fd_sec.get("snapshot_times", "")).strip()
    if raw_times:
        snapshot_times = tuple(
            _get_number("fd", "snapshot_times", part)
            for part in raw_times.split(",") if part.strip()
        )
    else:
        snapshot_times = (t_end,)
    for t in snapshot_times:
        if t < 0 or t > t_end:
            raise ConfigError(
                f"[fd] snapshot time {t} outside [0, {t_end}]")

    out_sec = parser["outputs"] if "outputs" in parser else {}
    directory = _strip_quotes(out_sec.get("directory", "out"))
    fmt = _strip_quotes(out_sec.get("format", "csv"))
    if fmt not in ("csv", "json"):
        raise ConfigError("[outputs] format must be csv or json")

    return RunConfig(
        problem=problem,
        hamiltonian_text=_strip_quotes(prob["hamiltonian"]),
        u0_text=_strip_quotes(prob["u0"]),
        adm=AdmConfig(n_terms, node_cap),
        characteristics=CharacteristicsConfig(fan_size, scan_points),
        fd=FdConfig(grid_points, cfl, boundary, t_end, snapshot_times),
        outputs=OutputConfig(directory, fmt),
    )


# ---------------------------------------------------------------------------
# formatting and atomic output

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return ""
    if isinstance(value, float):
        value = float(value)  # numpy scalars repr differently
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def _jsonable(value):
    if value is None or isinstance(value, (bool, str)):
        return value
    if isinstance(value, float):
        return float(value)
    if isinstance(value, int):
        return int(value)
    return value


def _atomic_write(path: Path, text: str):
    tmp = path.parent / (path.name + f".tmp.{os.getpid()}")
    tmp.write_text(text)
    os.replace(tmp, path)


def _write_table(directory: Path, stem: str, columns: list[str],
                 rows: list[tuple], fmt: str) -> OutputRecord:
    if fmt == "json":
        path = directory / f"{stem}.json"
        payload = [
            {col: _jsonable(v) for col, v in zip(columns, row)}
            for row in rows
        ]
        _atomic_write(path, json.dumps(payload, indent=1) + "\n")
    else:
        path = directory / f"{stem}.csv"
        lines = [",".join(columns)]
        lines.extend(",".join(_fmt(v) for v in row) for row in rows)
        _atomic_write(path, "\n".join(lines) + "\n")
    return OutputRecord(path.name, len(rows), columns)


# ---------------------------------------------------------------------------
# stages

def _grid_from(cfg: RunConfig) -> fdsolve.Grid:
    return fdsolve.Grid(cfg.problem.x_min, cfg.problem.x_max,
                        cfg.fd.grid_points, cfg.fd.boundary)


def _stage_series(cfg: RunConfig, fmt, directory):
    series = adomian.build_series(cfg.problem, cfg.adm.n_terms)
    xs = _grid_from(cfg).nodes()
    rows = []
    for n in range(series.n_terms + 1):
        vals = np.asarray(sx.lambdify(series.coeffs[n], ("x",))(xs), dtype=float)
        rows.extend((n, float(x), float(v)) for x, v in zip(xs, vals))
    records = [_write_table(directory, "series",
                            ["n", "x", "u_tilde_n"], rows, fmt)]
    surf = []
    for t in cfg.fd.snapshot_times:
        u = adomian.partial_sum_grid(series, series.n_terms, xs, t)
        surf.extend((float(x), float(t), float(v)) for x, v in zip(xs, u))
    records.append(_write_table(directory, "surface",
                               ["x", "t", "u_N"], surf, fmt))
    return records


def _stage_critical_time(cfg: RunConfig, fmt, directory):
    result = characteristics.critical_time(
        cfg.problem, cfg.characteristics.scan_points)
    rows = [(result.kind, result.t_star, result.x_star, result.slope_min)]
    return [_write_table(directory, "critical_time",
                         ["kind", "t_star", "x_star", "m"], rows, fmt)]


def _stage_characteristics(cfg: RunConfig, fmt, directory):
    fan = characteristics.build_fan(cfg.problem, cfg.characteristics.fan_size)
    rows = []
    for i, line in enumerate(fan.lines):
        crossing = None
        if i + 1 < len(fan.lines):
            crossing = characteristics.pairwise_crossing(line, fan.lines[i + 1])
        rows.append((line.foot, line.speed, crossing))
    return [_write_table(directory, "characteristics",
                         ["x0", "speed", "crossing_t"], rows, fmt)]


def _stage_fd_solve(cfg: RunConfig, fmt, directory):
    sol = fdsolve.solve(cfg.problem, _grid_from(cfg), cfg.fd.t_end,
                        cfg.fd.cfl, cfg.fd.snapshot_times)
    xs = sol.grid.nodes()
    rows = []
    for t, u in zip(sol.times, sol.values):
        rows.extend((float(t), float(x), float(v)) for x, v in zip(xs, u))
    return [_write_table(directory, "fd", ["t", "x", "u"], rows, fmt)]


def _stage_compare(cfg: RunConfig, fmt, directory):
    series = adomian.build_series(cfg.problem, cfg.adm.n_terms)
    sol = fdsolve.solve(cfg.problem, _grid_from(cfg), cfg.fd.t_end,
                        cfg.fd.cfl, cfg.fd.snapshot_times)
    report = fdsolve.compare(sol, series, cfg.adm.n_terms,
                             cfg.fd.snapshot_times)
    rows = [(r.time, r.order, r.sup_diff, r.rms_diff, r.past_critical)
            for r in report.rows]
    return [_write_table(directory, "compare",
                         ["t", "N", "sup_diff", "rms_diff", "past_critical"],
                         rows, fmt)]


def _stage_radius(cfg: RunConfig, fmt, directory):
    series = adomian.build_series(cfg.problem, cfg.adm.n_terms)
    span = cfg.problem.x_max - cfg.problem.x_min
    rows = []
    for q in (0.25, 0.5, 0.75):
        x = cfg.problem.x_min + q * span
        est = adomian.estimate_radius(series, x)
        if est.valid:
            for n, ratio in est.samples:
                rows.append((x, n, ratio, est.radius, est.valid,
                             est.low_order))
        else:
            rows.append((x, None, None, None, False, True))
    return [_write_table(directory, "radius",
                         ["x", "n", "ratio", "radius", "valid", "low_order"],
                         rows, fmt)]


_STAGES = {
    "series": _stage_series,
    "critical-time": _stage_critical_time,
    "characteristics": _stage_characteristics,
    "fd-solve": _stage_fd_solve,
    "compare": _stage_compare,
    "radius": _stage_radius,
}

# errors from the numerics, as opposed to bad configuration
_NUMERICAL_ERRORS = (
    sx.NodeCapExceeded,
    sx.EvalError,
    fdsolve.FdError,
    characteristics.ScanError,
    adomian.SeriesError,
    ValueError,
)


def run(subcommand: str, cfg: RunConfig, out_dir: Optional[str] = None,
        fmt: Optional[str] = None) -> RunManifest:
    """Execute one stage; outputs land atomically under the out directory.

    Numerical failures are recorded in the returned manifest rather than
    raised, so the caller decides the exit code.
    """
    if subcommand not in _STAGES:
        raise ConfigError(f"unknown subcommand '{subcommand}'")
    fmt = fmt or cfg.outputs.format
    if fmt not in ("csv", "json"):
        raise ConfigError("format must be csv or json")
    directory = Path(out_dir or cfg.outputs.directory)
    directory.mkdir(parents=True, exist_ok=True)

    manifest = RunManifest(subcommand, __version__, cfg.echo())
    started = time.perf_counter()
    try:
        records = _STAGES[subcommand](cfg, fmt, directory)
        manifest.outputs.extend(records)
    except _NUMERICAL_ERRORS as err:
        manifest.error = {
            "stage": subcommand,
            "type": type(err).__name__,
            "message": str(err),
        }
        log.error("%s failed: %s", subcommand, err)
    manifest.stages.append({
        "name": subcommand,
        "seconds": time.perf_counter() - started,
    })
    _atomic_write(directory / "manifest.json",
                  json.dumps(manifest.to_dict(), indent=1) + "\n")
    for record in manifest.outputs:
        log.info("wrote %s (%d rows)", record.file, record.rows)
    return manifest


def _setup_logging():
    level = os.environ.get("HJADM_LOG", "info").strip().lower()
    chosen = {"quiet": logging.WARNING, "info": logging.INFO,
              "debug": logging.DEBUG}.get(level, logging.INFO)
    logging.basicConfig(level=chosen, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    parser = argparse.ArgumentParser(
        prog="hjadm",
        description="Adomian series, characteristics and finite-difference "
                    "tools for u_t + H(u_x) = 0",
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="path to the INI config")
    parser.add_argument("--out", default=None, help="output directory override")
    parser.add_argument("--format", default=None, choices=("csv", "json"),
                        help="output format override")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        manifest = run(args.subcommand, cfg, args.out, args.format)
    except ConfigError as err:
        log.error("config error: %s", err)
        return 1
    if manifest.error is not None:
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
