"""Render wflow CSV traces as static plots.

Consumes only the trace-file contract: CSVs with the documented column set,
optional JSON sidecars (same stem) for series labels and stage times. Output
images are deterministic for identical inputs: fixed style, fixed dpi, no
embedded timestamps or software tags, so re-rendering is byte-idempotent.
"""

from __future__ import annotations

import glob as globmod
import json
import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

BASE_COLUMNS = ["t", "dist_rel", "alpha", "beta", "ratio", "loss",
                "grad_norm", "incoherence"]
BUNDLE_COLUMNS = BASE_COLUMNS + ["d_loo", "d_loo_par", "d_sgn", "d_double"]

# Expected CSV header per figure family.
EXPECTED_COLUMNS = {
    "fig1": BASE_COLUMNS,
    "fig2a": BASE_COLUMNS,
    "fig2b": BASE_COLUMNS,
    "fig3a": BASE_COLUMNS,
    "fig3b": BASE_COLUMNS,
    "population": BASE_COLUMNS,
    "fig4a": BUNDLE_COLUMNS,
    "fig4b": BUNDLE_COLUMNS,
    "fig5": BASE_COLUMNS,
    "custom": BASE_COLUMNS,
}

_SADDLE_BETA = 1.0 / math.sqrt(3.0)

_RC = {
    "figure.figsize": (6.0, 4.5),
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "wflow-figures",
}


class ValidationError(ValueError):
    """An input CSV is missing, empty, or has the wrong header."""


@dataclass
class PlotSpec:
    figure_id: str
    inputs: str          # glob pattern over trace CSVs
    out_path: Path
    arrows: bool = False  # direction-of-time arrows on phase plots

    def __post_init__(self):
        if self.figure_id not in EXPECTED_COLUMNS:
            raise ValidationError(f"unknown figure id {self.figure_id!r}")
        self.out_path = Path(self.out_path)


@dataclass
class Trace:
    path: Path
    columns: dict
    sidecar: dict

    @property
    def label(self) -> str:
        return self.sidecar.get("label", self.path.stem)


def load_traces(spec: PlotSpec) -> list:
    """Expand the glob and validate every matched CSV against the schema."""
    paths = sorted(Path(p) for p in globmod.glob(spec.inputs))
    if not paths:
        raise ValidationError(f"no CSV matches pattern {spec.inputs!r}")
    expected = EXPECTED_COLUMNS[spec.figure_id]
    traces = []
    for path in paths:
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            if header != expected:
                raise ValidationError(
                    f"{path}: header {header} does not match the "
                    f"{spec.figure_id} schema {expected}")
            data = np.genfromtxt(fh, delimiter=",")
        if data.size == 0:
            raise ValidationError(f"{path}: no data rows")
        if data.ndim == 1:
            data = data[None, :]
        sidecar_path = path.with_suffix(".json")
        sidecar = {}
        if sidecar_path.exists():
            sidecar = json.loads(sidecar_path.read_text())
        traces.append(Trace(path=path,
                            columns={name: data[:, i]
                                     for i, name in enumerate(header)},
                            sidecar=sidecar))
    return traces


def _series_label(trace: Trace, key: str) -> str:
    config = trace.sidecar.get("config", {})
    if key in config:
        return f"{key} = {config[key]}"
    return trace.label


def _semilog_lines(ax, traces, column, label_key, ylabel, take_abs=False):
    for trace in traces:
        y = trace.columns[column]
        if take_abs:
            y = np.abs(y)
        y = np.where(y > 0, y, np.nan)  # semilog: drop exact zeros
        ax.semilogy(trace.columns["t"], y, label=_series_label(trace, label_key))
    ax.set_xlabel("iteration")
    ax.set_ylabel(ylabel)
    ax.legend()


def _phase_plot(ax, traces, arrows):
    for trace in traces:
        a = np.abs(trace.columns["alpha"])
        b = trace.columns["beta"]
        ax.plot(a, b, label=_series_label(trace, "eta"))
        if arrows and len(a) > 2:
            mid = len(a) // 3
            ax.annotate("", xy=(a[mid + 1], b[mid + 1]), xytext=(a[mid], b[mid]),
                        arrowprops={"arrowstyle": "->", "color": "tab:orange"})
    ax.plot([0.0], [_SADDLE_BETA], "o", color="tab:blue", markersize=8,
            label="saddle (0, 1/sqrt 3)")
    ax.plot([1.0], [0.0], "*", color="tab:green", markersize=10,
            label="minimizer (1, 0)")
    ax.set_xlabel("signal strength")
    ax.set_ylabel("orthogonal strength")
    ax.legend()


def _difference_plot(ax, traces, stage_one_only):
    names = ["d_loo", "d_loo_par", "d_sgn", "d_double"]
    for trace in traces:
        t = trace.columns["t"]
        upto = len(t)
        if stage_one_only:
            tg = (trace.sidecar.get("stage_times") or {}).get("t_gamma")
            if tg is not None:
                upto = int(np.searchsorted(t, tg)) + 1
        for name in names:
            y = trace.columns[name][:upto]
            y = np.where(y > 0, y, np.nan)
            label = name if len(traces) == 1 else f"{trace.label}:{name}"
            ax.semilogy(t[:upto], y, label=label)
    ax.set_xlabel("iteration")
    ax.set_ylabel("sequence difference")
    ax.legend()


def render(spec: PlotSpec) -> Path:
    """Render one figure; returns the image path written.

    Raises ValidationError (and writes nothing) when the glob is empty or any
    matched CSV fails schema validation.
    """
    traces = load_traces(spec)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        fid = spec.figure_id
        if fid in ("fig1", "fig5", "custom"):
            _semilog_lines(ax, traces, "dist_rel", "n", "relative error")
        elif fid == "fig2a":
            _semilog_lines(ax, traces, "ratio", "n",
                           "signal / orthogonal ratio", take_abs=True)
        elif fid == "fig2b":
            for trace in traces:
                t = trace.columns["t"]
                ax.semilogy(t, np.abs(trace.columns["alpha"]),
                            label=f"{_series_label(trace, 'n')} signal size")
                ax.semilogy(t, np.where(trace.columns["dist_rel"] > 0,
                                        trace.columns["dist_rel"], np.nan),
                            linestyle="--",
                            label=f"{_series_label(trace, 'n')} relative error")
            ax.set_xlabel("iteration")
            ax.set_ylabel("size")
            ax.legend()
        elif fid in ("fig3a", "fig3b", "population"):
            _phase_plot(ax, traces, spec.arrows)
        elif fid == "fig4a":
            _difference_plot(ax, traces, stage_one_only=True)
        elif fid == "fig4b":
            _difference_plot(ax, traces, stage_one_only=False)
        fig.tight_layout()
        spec.out_path.parent.mkdir(parents=True, exist_ok=True)
        # metadata pinned so the bytes depend only on the inputs
        fig.savefig(spec.out_path, metadata=_stable_metadata(spec.out_path))
        plt.close(fig)
    return spec.out_path


def _stable_metadata(out_path: Path) -> dict:
    suffix = out_path.suffix.lower()
    if suffix == ".png":
        return {"Software": None}
    if suffix == ".svg":
        return {"Date": None}
    return {}
