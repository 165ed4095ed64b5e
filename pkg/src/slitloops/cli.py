"""Command-line front end for kappa scans and error budgets."""

from __future__ import annotations

import argparse
import datetime as _dt
import enum
import io
import json
import logging
import math
import os
import re
import sys
import tempfile
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from . import __version__, _kernels
from .errorbudget import STEEL, ErrorBudget, MaterialDefaults, error_budget
from .errors import BudgetError, ConfigError, ConvergenceError, DegenerateNormalizationError, DomainError
from .experiment import PRESET_NAMES, preset, read_config, setup_from_mapping, setup_to_mapping, validate
from .quadrature import DEFAULT_SPEC, QuadratureSpec
from .sorkin import SorkinScan, kappa_at_positions, kappa_scan

log = logging.getLogger("slitloops")

CSV_COLUMNS = (
    "y_detector_m", "intensity_normalized", "epsilon_full", "epsilon_linear",
    "kappa_full", "kappa_linear", "point_valid",
)
SIDECAR_SUFFIX = ".meta.json"


class ExitCode(enum.IntEnum):
    OK = 0
    USAGE = 2
    CONFIG_PARSE = 3
    VALIDATION = 4
    OUTPUT = 5
    NUMERICAL = 6


class CliError(Exception):
    def __init__(self, code: ExitCode, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class RunRequest:
    """Everything one invocation needs, after merging config file and flags."""

    setup_mapping: dict[str, Any]
    source: str
    scan: tuple[float, float, int] | None = None
    point: float | None = None
    normalization: str = "central_max"
    quadrature: QuadratureSpec = DEFAULT_SPEC
    disable_nonclassical: bool = False
    material: MaterialDefaults = STEEL
    out: Path | None = None
    fmt: str = "csv"
    report_errors: bool = False
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.scan is not None:
            y_min, y_max, n = self.scan
            if n < 2:
                raise ConfigError(f"--scan needs at least 2 points, got {n}")
            if not y_min < y_max:
                raise ConfigError(f"--scan needs YMIN < YMAX, got {y_min!r} {y_max!r}")


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="slitloops",
        description="Sorkin parameter of a multi-slit setup including looped paths.",
    )
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=PRESET_NAMES)
    src.add_argument("--config", type=Path, metavar="PATH", help="YAML/JSON setup, or a previous run's .meta.json")

    what = p.add_mutually_exclusive_group()
    what.add_argument("--scan", nargs=3, metavar=("YMIN", "YMAX", "N"), help="detector positions in metres")
    what.add_argument("--point", type=float, metavar="Y", help="single detector position in metres")

    p.add_argument("--normalization", choices=("central-max", "interference-sum"))
    p.add_argument("--out", type=Path, metavar="PATH")
    p.add_argument("--format", choices=("csv", "json"), dest="fmt")
    p.add_argument("--points-per-cycle", type=float, metavar="R")
    p.add_argument("--tolerance", type=float, metavar="T")
    p.add_argument("--max-refinements", type=int, metavar="N")
    p.add_argument("--disable-nonclassical", action="store_true", default=None)
    p.add_argument("--no-inclination-factor", action="store_true")
    p.add_argument("--include-z-factor", action="store_true")
    p.add_argument("--include-global-prefactor", action="store_true")
    p.add_argument("--errors", action="store_true", help="print the analytic error budget")
    p.add_argument("--attenuation", type=float, help="imaginary part of the plate's refractive index")
    p.add_argument("--thickness", type=float, metavar="METRES", help="plate thickness")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    # argparse's stock pattern misses exponents, so "-1.5e-3" would read as a flag
    p._negative_number_matcher = re.compile(r"^-(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?$")
    return p


def _scan_triple(raw) -> tuple[float, float, int]:
    try:
        y_min, y_max, n = raw
        n_float = float(n)
        if n_float != int(n_float):
            raise ValueError
        return float(y_min), float(y_max), int(n_float)
    except (TypeError, ValueError):
        raise ConfigError(f"scan must be YMIN YMAX N (N an integer), got {raw!r}") from None


def request_from_args(args: argparse.Namespace) -> RunRequest:
    """Merge flags over the config file (or preset); flags win."""
    if args.preset:
        mapping = setup_to_mapping(preset(args.preset))
        file_cfg: dict[str, Any] = {}
        source = f"preset:{args.preset}"
    else:
        try:
            file_cfg = read_config(args.config)
        except ConfigError as exc:
            raise CliError(ExitCode.CONFIG_PARSE, str(exc)) from exc
        mapping = {k: v for k, v in file_cfg.items() if k not in ("quadrature", "scan", "point", "normalization", "disable_nonclassical", "material")}
        source = f"config:{args.config}"

    if args.no_inclination_factor:
        mapping["apply_inclination_factor"] = False
    if args.include_z_factor:
        mapping["include_z_factor"] = True
    if args.include_global_prefactor:
        mapping["include_global_prefactor"] = True

    q = dict(DEFAULT_SPEC.as_dict(), **file_cfg.get("quadrature", {}))
    if args.points_per_cycle is not None:
        q["points_per_cycle"] = args.points_per_cycle
    if args.tolerance is not None:
        q["rel_tolerance"] = args.tolerance
    if args.max_refinements is not None:
        q["max_refinements"] = args.max_refinements
    spec = QuadratureSpec(float(q["points_per_cycle"]), float(q["rel_tolerance"]), int(q["max_refinements"]))

    mat = dict(
        {"refractive_index": STEEL.refractive_index, "attenuation": STEEL.attenuation, "thickness_m": STEEL.thickness_m},
        **file_cfg.get("material", {}),
    )
    if args.attenuation is not None:
        mat["attenuation"] = args.attenuation
    if args.thickness is not None:
        mat["thickness_m"] = args.thickness
    material = MaterialDefaults(float(mat["refractive_index"]), float(mat["attenuation"]), float(mat["thickness_m"]))

    scan = point = None
    if args.scan is not None:
        scan = _scan_triple(args.scan)
    elif args.point is not None:
        point = args.point
    elif "scan" in file_cfg:
        scan = _scan_triple(file_cfg["scan"])
    elif file_cfg.get("point") is not None:
        point = float(file_cfg["point"])

    norm = args.normalization or str(file_cfg.get("normalization", "central_max"))
    norm = norm.replace("-", "_")
    if norm not in ("central_max", "interference_sum"):
        raise ConfigError(f"unknown normalization {norm!r}")

    disable = args.disable_nonclassical
    if disable is None:
        disable = bool(file_cfg.get("disable_nonclassical", False))

    fmt = args.fmt or ("json" if args.out is not None and args.out.suffix == ".json" else "csv")
    if scan is None and point is None and not args.errors:
        raise ConfigError("nothing to do: give --scan, --point or --errors")
    return RunRequest(
        setup_mapping=mapping,
        source=source,
        scan=scan,
        point=point,
        normalization=norm,
        quadrature=spec,
        disable_nonclassical=disable,
        material=material,
        out=args.out,
        fmt=fmt,
        report_errors=args.errors,
    )


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.16e}"


def scan_to_csv(scan: SorkinScan) -> str:
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    rows = zip(
        scan.y_values, scan.intensity_normalized, scan.epsilon_full, scan.epsilon_linear,
        scan.kappa_full, scan.kappa_linear, scan.point_valid,
    )
    for *nums, valid in rows:
        buf.write(",".join(_fmt(v) for v in nums) + ("," + ("true" if valid else "false")) + "\n")
    return buf.getvalue()


def scan_to_json(scan: SorkinScan) -> str:
    return json.dumps(scan.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"


def check_writable(path: Path):
    parent = path.resolve().parent
    if not parent.is_dir():
        raise CliError(ExitCode.OUTPUT, f"output directory {parent} does not exist")
    if path.is_dir():
        raise CliError(ExitCode.OUTPUT, f"output path {path} is a directory")
    if not os.access(parent, os.W_OK) or (path.exists() and not os.access(path, os.W_OK)):
        raise CliError(ExitCode.OUTPUT, f"output path {path} is not writable")


def write_atomic(path: Path, text: str):
    try:
        fd, tmp = tempfile.mkstemp(dir=path.resolve().parent, prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise CliError(ExitCode.OUTPUT, f"cannot write {path}: {exc}") from exc


def format_budget(budget: ErrorBudget) -> str:
    lines = [
        f"{'metal transmission':<22}{budget.metal_transmission_rel:.3e}",
        f"{'stationary phase':<22}{budget.stationary_phase_rel:.3e}",
        f"{'Fraunhofer':<22}{budget.fraunhofer_rel:.3e}",
        f"{'leading kappa error':<22}{budget.kappa_rel_leading:.3e}  ({budget.leading_source})",
    ]
    return "\n".join(lines)


def format_point(scan: SorkinScan) -> str:
    names = ("y_detector_m", "intensity_normalized", "epsilon_full", "epsilon_linear", "delta", "kappa_full", "kappa_linear")
    values = (
        scan.y_values[0], scan.intensity_normalized[0], scan.epsilon_full[0], scan.epsilon_linear[0],
        scan.delta if scan.delta_per_point is None else scan.delta_per_point[0],
        scan.kappa_full[0], scan.kappa_linear[0],
    )
    lines = [f"{n:<22}{_fmt(v)}" for n, v in zip(names, values)]
    lines.append(f"{'point_valid':<22}{'true' if scan.point_valid[0] else 'false'}")
    return "\n".join(lines)


def sidecar(request: RunRequest, vs, budget: ErrorBudget, scan: SorkinScan | None, started: str, elapsed: float) -> dict:
    meta: dict[str, Any] = {
        "tool": "slitloops",
        "version": __version__,
        "backend": _kernels.BACKEND,
        "source": request.source,
        "config": setup_to_mapping(vs),
        "normalization": request.normalization,
        "disable_nonclassical": request.disable_nonclassical,
        "quadrature": request.quadrature.as_dict(),
        "material": {
            "refractive_index": request.material.refractive_index,
            "attenuation": request.material.attenuation,
            "thickness_m": request.material.thickness_m,
        },
        "error_budget": budget.as_dict(),
        "diagnostics": dict(vs.diagnostics),
        "warnings": list(vs.warnings) + budget.warnings(),
        "output_format": request.fmt,
        "started_utc": started,
        "wall_clock_s": elapsed,
    }
    if request.scan is not None:
        meta["scan"] = list(request.scan)
    if request.point is not None:
        meta["point"] = request.point
    if scan is not None:
        meta["delta"] = scan.delta
        meta["central_maximum_y_m"] = scan.metadata["central_maximum_y_m"]
        meta["invalid_points"] = scan.metadata["invalid_points"]
    return meta


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def run(request: RunRequest, stdout=None) -> ExitCode:
    stdout = stdout or sys.stdout
    started = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    t0 = time.perf_counter()

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            vs = validate(setup_from_mapping(request.setup_mapping))
    except (ConfigError, DomainError, ValueError) as exc:
        raise CliError(ExitCode.VALIDATION, str(exc)) from exc
    for w in vs.warnings:
        log.warning(w)

    budget = error_budget(vs, request.material)
    if request.report_errors:
        for w in budget.warnings():
            log.warning(w)
        print(format_budget(budget), file=stdout)

    if request.out is not None:
        check_writable(request.out)
        check_writable(Path(str(request.out) + SIDECAR_SUFFIX))

    scan = None
    k2_scale = 0.0 if request.disable_nonclassical else 1.0
    try:
        if request.scan is not None:
            y_min, y_max, n = request.scan
            scan = kappa_scan(vs, y_min, y_max, n, request.normalization, request.quadrature, k2_scale)
        elif request.point is not None:
            scan = kappa_at_positions(vs, [request.point], request.normalization, request.quadrature, k2_scale)
    except (ConvergenceError, DegenerateNormalizationError, BudgetError, DomainError) as exc:
        raise CliError(ExitCode.NUMERICAL, f"{type(exc).__name__}: {exc}") from exc
    except ConfigError as exc:
        raise CliError(ExitCode.VALIDATION, str(exc)) from exc

    if scan is not None:
        for i, msg in scan.metadata["invalid_points"].items():
            log.warning("point %s invalid: %s", i, msg)
        text = scan_to_json(scan) if request.fmt == "json" else scan_to_csv(scan)
        if request.out is None:
            stdout.write(text if request.scan is not None else format_point(scan) + "\n")
        else:
            if request.point is not None:
                print(format_point(scan), file=stdout)
            write_atomic(request.out, text)

    if request.out is not None:
        meta = sidecar(request, vs, budget, scan, started, time.perf_counter() - t0)
        write_atomic(Path(str(request.out) + SIDECAR_SUFFIX), json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return ExitCode.OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        request = request_from_args(args)
        return int(run(request))
    except CliError as exc:
        log.error(str(exc))
        return int(exc.code)
    except ConfigError as exc:
        log.error(str(exc))
        return int(ExitCode.VALIDATION)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
