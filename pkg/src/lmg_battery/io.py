"""CSV tables, JSON run manifests and optional SVG plots."""

import csv
from dataclasses import asdict
import io as _io
import json
import math
import os
import platform

import numpy as np

from . import _kernels, model, observables, propagator
from .analysis import MaximaRecord, SweepRow, SweepTable, worker_count

TIME_SERIES_COLUMNS = observables.COLUMNS
SWEEP_COLUMNS = ("protocol", "parameter", "value", "C_max", "t_C_max", "P_max", "t_P_max",
                 "dW_max", "t_dW_max", "cost_max", "t_cost_max", "error")
_MAXIMA_FIELDS = ("c_max", "t_c_max", "p_max", "t_p_max", "dw_max", "t_dw_max",
                  "cost_max", "t_cost_max")


class NonFiniteError(ValueError):
    pass


def _version():
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:
        return "unknown"


def fmt(x):
    x = float(x)
    if not math.isfinite(x):
        raise NonFiniteError(f"refusing to write non-finite value {x!r}")
    return f"{x:.12g}"


def time_series_csv(series) -> str:
    cols = series.as_columns()
    data = np.column_stack([cols[c] for c in TIME_SERIES_COLUMNS])
    if not np.all(np.isfinite(data)):
        bad = TIME_SERIES_COLUMNS[int(np.argwhere(~np.isfinite(data))[0, 1])]
        raise NonFiniteError(f"non-finite values in column {bad!r}")
    buf = _io.StringIO()
    buf.write(",".join(TIME_SERIES_COLUMNS) + "\n")
    for row in data:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def sweep_csv(table: SweepTable) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    order = {p: i for i, p in enumerate(model.PROTOCOLS)}
    rows = sorted(table.rows, key=lambda r: (order.get(r.protocol, 99), r.value))
    for r in rows:
        if r.maxima is None:
            numbers = [""] * len(_MAXIMA_FIELDS)
        else:
            numbers = [fmt(getattr(r.maxima, f)) for f in _MAXIMA_FIELDS]
        writer.writerow([r.protocol, r.parameter, fmt(r.value), *numbers, r.error])
    return buf.getvalue()


def read_sweep_csv(path) -> SweepTable:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(SWEEP_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: not a sweep table (missing {sorted(missing)})")
        rows = []
        for rec in reader:
            maxima = None
            if not rec["error"]:
                maxima = MaximaRecord(*(float(rec[c]) for c in SWEEP_COLUMNS[3:11]))
            rows.append(SweepRow(rec["protocol"], rec["parameter"], float(rec["value"]),
                                 maxima, rec["error"]))
    parameter = rows[0].parameter if rows else "N"
    return SweepTable(parameter, rows)


def build_manifest(config_dict, kind, duration_s, extra=None):
    """Parameters plus every default that influenced the numbers."""
    manifest = {
        "tool": "lmg-battery",
        "version": _version(),
        "kind": kind,
        "config": config_dict,
        "defaults": {
            "gap_tol_default": model.GAP_TOL,
            "cd_coupling_tol": model.COUPLING_TOL,
            "cross_block_tol": model.CROSS_BLOCK_TOL,
            "norm_tol": propagator.NORM_TOL,
            "steps_per_period_default": propagator.STEPS_PER_PERIOD,
            "constant_dt_default": propagator.CONSTANT_DT,
            "driven_window_periods_default": propagator.DRIVEN_WINDOW_PERIODS,
            "constant_window_default": propagator.CONSTANT_WINDOW,
            "sample_stride_default": propagator.SAMPLE_STRIDE,
            "scheme_default": propagator.DEFAULT_SCHEME,
            "initial_state": "|S,-N/2>",
            "constant_protocol": "quench: lambda = A for t > 0",
            "maxima": "grid argmax over (0, t_end], refined by 3-point parabola",
            "entropy_cutoff": observables.ENTROPY_CUTOFF,
            "entropy_log_base": 2,
            "entropy_subsystem_default": "floor(N/2)",
            "cost_norm": "Frobenius",
            "cost_integration": "trapezoid over samples",
            "cost_rescale_duration": observables.COST_RESCALE_DURATION,
            "csv_significant_digits": 12,
        },
        "runtime": {
            "numba": _kernels.USING_NUMBA,
            "workers": worker_count(),
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "wall_clock_s": duration_s,
    }
    if extra:
        manifest.update(extra)
    return manifest


def maxima_dict(rec):
    return {k: float(v) for k, v in asdict(rec).items()}


def write_outputs(result, manifest, directory, stem, plot=False):
    """Write ``<stem>.csv`` and ``<stem>.manifest.json`` (plus ``<stem>.svg``).

    ``result`` is a Trajectory with observables or a SweepTable.
    """
    os.makedirs(directory, exist_ok=True)
    if isinstance(result, SweepTable):
        text = sweep_csv(result)
    else:
        series = result.observables or observables.annotate(result)
        text = time_series_csv(series)
    paths = []
    table_path = os.path.join(directory, f"{stem}.csv")
    manifest_path = os.path.join(directory, f"{stem}.manifest.json")
    try:
        with open(table_path, "w", newline="") as fh:
            fh.write(text)
        paths.append(table_path)
        with open(manifest_path, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        paths.append(manifest_path)
    except OSError as exc:
        raise OSError(f"could not write outputs in {directory!r}: {exc}") from exc
    if plot:
        svg = os.path.join(directory, f"{stem}.svg")
        if _plot(result, svg):
            paths.append(svg)
    return paths


def _plot(result, path):
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return False
    if isinstance(result, SweepTable):
        fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
        for proto in model.PROTOCOLS:
            for ax, q, label in ((axes[0], "C_max", r"$C_{max}$"), (axes[1], "P_max", r"$P_{max}$")):
                x, y = result.series(proto, q)
                if len(x):
                    ax.plot(x, y, marker="o", ms=3, label=proto)
                    ax.set_ylabel(label)
        for ax in axes:
            ax.set_xlabel(result.parameter)
            ax.legend()
    else:
        obs = result.observables
        panels = (("stored", "$C(t)$"), ("power", "$P(t)$"), ("entropy", "$S(t)$"),
                  ("fluctuation", r"$\Delta W(t)$"), ("inst_cost", r"$\partial_t \mathbb{C}_0$"))
        fig, axes = plt.subplots(len(panels), 1, figsize=(6, 10), sharex=True)
        for ax, (attr, label) in zip(axes, panels):
            ax.plot(obs.t, getattr(obs, attr), lw=1)
            ax.set_ylabel(label)
        axes[-1].set_xlabel("$t$")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return True
