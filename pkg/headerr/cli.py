"""
Command-line entry point ``headerr``.

  headerr <subcommand> --config <path> [--sweep key=start:stop:step]...
          [--format csv|json] [--out <path>] [--threads N]

Exit status: 0 when every sweep point succeeded, 2 when some failed (their
rows carry the message in the ``error`` column), 1 on fatal errors.
"""

import argparse
import csv
import io
import itertools
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from typing import List

import numpy as np

from .analysis import (
    PIPELINE_ERRORS,
    CurveError,
    GridError,
    PairingError,
    auxiliary_field_curve,
    dual_helicity_average,
    effect_decomposition,
    flattening_angle,
    heading_error_curve,
)
from .config import (
    SWEEP_AXES,
    VERSION,
    ConfigError,
    apply_sweep_value,
    config_fingerprint,
    parse_config,
)
from .units import UnitError, format_sig, parse_quantity
from .validation import CHECK_ERRORS, run_checks

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("heading", "decompose", "dual", "auxfield", "validate")
BASE_COLUMNS = ["theta_deg", "omega0_hz", "heading_error_hz", "geometry", "helicity"]
EXTRA_COLUMNS = {
    "heading": [],
    "decompose": ["effect", "offset_hz"],
    "dual": ["row_type", "pairing", "residual_hz"],
    "auxfield": ["row_type", "ba_t", "deviation_hz", "theta0_deg"],
    "validate": ["check", "passed", "value", "threshold", "detail"],
}
UNITS = dict(
    theta_deg="deg",
    omega0_hz="Hz",
    heading_error_hz="Hz",
    offset_hz="Hz",
    residual_hz="Hz",
    deviation_hz="Hz",
    theta0_deg="deg",
    ba_t="T",
    detuning="Hz",
    B0="T",
    Ba="T",
    pump_power="W",
    theta="deg",
)
POINT_ERRORS = CHECK_ERRORS + (GridError, PairingError, UnitError)
THETA_MAX_DEG = 90.0

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2


@dataclass
class RunManifest:
    fingerprint: str
    subcommand: str
    sweep_axes: List[str]
    outputs: List[str] = field(default_factory=list)
    wall_time: float = 0.0
    version: str = VERSION

    def table_header(self):
        "Manifest as embedded in tables: no wall time, so reruns are byte-identical."
        data = asdict(self)
        data.pop("wall_time")
        return data


def parse_sweep(text):
    """
    Parse ``key=start:stop:step`` (inclusive stop, unit suffixes allowed) or
    ``key=v1,v2,...``.

    Args:
        text (str): sweep specification

    Returns:
        tuple : (axis, list of values in base units or labels)

    Raises:
        ConfigError: unknown axis or malformed range, or theta outside [0, 90] deg
    """
    axis, sep, spec = text.partition("=")
    axis = axis.strip()
    if not sep or axis not in SWEEP_AXES:
        raise ConfigError(
            "bad sweep %r (axes: %s)" % (text, ", ".join(sorted(SWEEP_AXES)))
        )
    kind = SWEEP_AXES[axis]
    try:
        if kind is None:
            return axis, [v.strip() for v in spec.split(",") if v.strip()]
        if ":" in spec:
            start, stop, step = (parse_quantity(v, kind) for v in spec.split(":"))
            if step <= 0 or stop < start:
                raise ConfigError("sweep %r needs step > 0 and stop >= start" % text)
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            values = [start + i * step for i in range(count)]
        else:
            values = [parse_quantity(v, kind) for v in spec.split(",")]
    except UnitError as err:
        raise ConfigError("sweep %r: %s" % (text, err)) from err
    if axis == "theta":
        check_theta_sweep(values)
    return axis, values


def check_theta_sweep(values):
    """
    Raises:
        ConfigError: a tilt outside [0, 90] deg
    """
    outside = [v for v in values if not 0.0 <= v <= THETA_MAX_DEG]
    if outside:
        raise ConfigError("theta sweep must lie in [0, 90] deg (got %s)" % outside)


def _grid(sweeps):
    if "theta" in sweeps:
        check_theta_sweep(sweeps["theta"])
        return np.radians(sweeps["theta"])
    return None


def _point_rows(subcommand, config, thetas, threads, quick):
    if subcommand == "heading":
        curve = heading_error_curve(config, thetas, workers=threads)
        return [
            dict(row, geometry=curve.geometry, helicity=curve.helicity) for row in curve.rows()
        ]

    if subcommand == "decompose":
        decomposition = effect_decomposition(config, thetas, workers=threads)
        origin = int(np.argmin(np.abs(decomposition.thetas)))
        rows = []
        for key, shift in decomposition.curves.items():
            effect, helicity = key
            errors = decomposition.errors.get(key) or (None,) * len(shift)
            for i, (theta, value) in enumerate(zip(decomposition.thetas, shift)):
                error = errors[i]
                if error is None and errors[origin] is not None:
                    error = "reference: %s" % errors[origin]
                rows.append(
                    dict(
                        theta_deg=np.degrees(theta),
                        omega0_hz=decomposition.larmor + value,
                        heading_error_hz=value - shift[origin],
                        geometry=decomposition.geometry,
                        helicity="+" if helicity > 0 else "-",
                        effect=effect,
                        offset_hz=value,
                        error=error,
                    )
                )
        return rows

    if subcommand == "dual":
        dual = dual_helicity_average(config, thetas, workers=threads)
        rows = []
        for row_type, curve in (("curve", dual.curve), ("mirror", dual.mirror)):
            if curve is None:
                continue
            for row in curve.rows():
                rows.append(
                    dict(
                        row,
                        geometry=curve.geometry,
                        helicity=curve.helicity,
                        row_type=row_type,
                        pairing=dual.pairing,
                    )
                )
        rows.append(
            dict(
                geometry=dual.curve.geometry,
                helicity=dual.curve.helicity,
                row_type="summary",
                pairing=dual.pairing,
                residual_hz=dual.residual,
            )
        )
        return rows

    if subcommand == "auxfield":
        aux = auxiliary_field_curve(config, thetas=thetas, workers=threads)
        rows = []
        for (Ba, helicity), curve in aux.curves.items():
            for row in curve.rows():
                rows.append(
                    dict(
                        row,
                        geometry=curve.geometry,
                        helicity=curve.helicity,
                        row_type="curve",
                        ba_t=Ba,
                        deviation_hz=aux.deviation[(Ba, helicity)],
                    )
                )
        for Ba in config.analysis.ba_list:
            row = dict(
                geometry=config.geometry,
                helicity=config.pump.helicity_label,
                row_type="flattening",
                ba_t=Ba,
            )
            try:
                theta0 = flattening_angle(config, Ba, thetas, workers=threads)
                row["theta0_deg"] = np.degrees(theta0)
            except CurveError as err:
                row.update(theta_deg=np.degrees(err.theta), error="CurveError: %s" % err)
            rows.append(row)
        return rows

    if subcommand == "validate":
        return [
            dict(
                check=result.name,
                passed=result.passed,
                value=result.value,
                threshold=result.threshold,
                detail=result.detail,
                error="" if result.passed else result.detail,
            )
            for result in run_checks(config, quick=quick)
        ]
    raise ConfigError("unknown subcommand %r" % (subcommand,))


def run(subcommand, config, sweeps=None, threads=1, quick=False):
    """
    Evaluate a subcommand over the Cartesian product of the sweep axes.

    A ``theta`` sweep becomes the angle grid of the curves instead of an axis.

    Args:
        subcommand (str): one of :data:`SUBCOMMANDS`
        config (:class:`SimulationConfig`): base configuration
        sweeps (dict): axis -> list of values, in command-line order
        threads (int): worker processes per curve
        quick (bool): skip slow validation checks

    Returns:
        tuple : (columns, rows, failures), failures counting rows with an error

    Raises:
        ConfigError: theta sweep outside [0, 90] deg
    """
    sweeps = dict(sweeps or {})
    thetas = _grid(sweeps)
    axes = [axis for axis in sweeps if axis != "theta"]
    columns = BASE_COLUMNS + axes + EXTRA_COLUMNS[subcommand] + ["error"]
    rows, failures = [], 0
    for values in itertools.product(*(sweeps[axis] for axis in axes)):
        point = dict(zip(axes, values))
        try:
            point_config = config
            for axis, value in point.items():
                point_config = apply_sweep_value(point_config, axis, value)
            point_rows = _point_rows(subcommand, point_config, thetas, threads, quick)
        except POINT_ERRORS as err:
            theta = getattr(err, "theta", None)
            logger.error("sweep point %s failed: %s", point or "(base)", err)
            point_rows = [
                dict(
                    theta_deg=None if theta is None else np.degrees(theta),
                    error="%s: %s" % (type(err).__name__, err),
                )
            ]
        for row in point_rows:
            row.update(point)
            if row.get("error") or row.get("passed") is False:
                failures += 1
        rows.extend(point_rows)
    return columns, rows, failures


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format_sig(float(value))
    return str(value)


def _json_value(value):
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.integer):
        return int(value)
    return value


def emit(columns, rows, fmt, manifest, stream):
    """
    Write a result table.

    CSV starts with a ``# headerr <version> fingerprint=<sha>`` line and
    prints floats with 6 significant digits. JSON holds the manifest, the
    column units and full-precision rows.

    Args:
        columns (list): column order
        rows (list of dict): table rows
        fmt (str): ``csv`` or ``json``
        manifest (:class:`RunManifest`): run metadata
        stream (file): text output
    """
    if fmt == "json":
        payload = dict(
            manifest=manifest.table_header(),
            units={c: UNITS[c] for c in columns if c in UNITS},
            rows=[{c: _json_value(row.get(c)) for c in columns} for row in rows],
        )
        json.dump(payload, stream, indent=1, sort_keys=True)
        stream.write("\n")
        return
    stream.write("# headerr %s fingerprint=%s\n" % (manifest.version, manifest.fingerprint))
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])


def build_parser():
    parser = argparse.ArgumentParser(
        prog="headerr", description="Heading-error simulator for alkali scalar magnetometers"
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", default="rb85_55uT", help="config file or bundled name")
    parser.add_argument(
        "--sweep", action="append", default=[], help="key=start:stop:step or key=v1,v2"
    )
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--out", default=None, help="output path (stdout if omitted)")
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--log-level", default="WARNING")
    parser.add_argument("--quick", action="store_true", help="validate without the oracle")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper(), logging.WARNING),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    start = time.monotonic()
    try:
        config = parse_config(args.config)
        sweeps = dict(parse_sweep(text) for text in args.sweep)
    except ConfigError as err:
        logger.error("%s", err)
        return EXIT_FATAL

    try:
        columns, rows, failures = run(
            args.subcommand, config, sweeps, threads=args.threads, quick=args.quick
        )
    except PIPELINE_ERRORS + (CurveError,) as err:
        logger.error("%s", err)
        return EXIT_FATAL

    manifest = RunManifest(
        fingerprint=config_fingerprint(config),
        subcommand=args.subcommand,
        sweep_axes=list(sweeps),
        outputs=[args.out] if args.out else [],
    )
    try:
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="") as handle:
                emit(columns, rows, args.format, manifest, handle)
            manifest.wall_time = time.monotonic() - start
            with open(args.out + ".manifest.json", "w", encoding="utf-8") as handle:
                json.dump(asdict(manifest), handle, indent=1, sort_keys=True)
        else:
            buffer = io.StringIO()
            emit(columns, rows, args.format, manifest, buffer)
            sys.stdout.write(buffer.getvalue())
    except OSError as err:
        logger.error("cannot write output: %s", err)
        return EXIT_FATAL
    return EXIT_PARTIAL if failures else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
