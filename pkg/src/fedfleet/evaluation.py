"""Result artifacts: MAE evaluation in physical units, the cross-client loss
matrix, normalized per-client convergence traces, prediction-vs-truth traces,
and CSV/SVG export. All losses are reported in unscaled Wh so traces remain
comparable across scaling configs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import ScalingSpec, TripRecord, WindowedSample, to_arrays, trip_windows, unscale_label
from .nn import ModelParameters, forward


def evaluate_arrays(
    params: ModelParameters, x_scaled: np.ndarray, y_wh: np.ndarray, scaling: ScalingSpec
) -> float:
    """Mean |prediction - label| in Wh over pre-scaled feature windows."""
    if len(x_scaled) == 0:
        raise ValueError("cannot evaluate on an empty sample list")
    pred, _ = forward(params, x_scaled, mode="eval", dtype=np.float64)
    return float(np.mean(np.abs(pred * scaling.label_scale - y_wh)))


def evaluate(params: ModelParameters, samples: list[WindowedSample], scaling: ScalingSpec) -> float:
    """Mean absolute error in Wh of eval-mode predictions over samples."""
    if not samples:
        raise ValueError("cannot evaluate on an empty sample list")
    x, _ = to_arrays(samples, scaling)
    y_wh = np.array([s.label for s in samples])
    return evaluate_arrays(params, x, y_wh, scaling)


def loss_matrix(
    models: list[ModelParameters],
    val_sets: list[list[WindowedSample]],
    scaling: ScalingSpec,
) -> np.ndarray:
    """Entry (i, j): MAE in Wh of model i on client j's validation set."""
    if len(models) != len(val_sets):
        raise ValueError(f"{len(models)} models but {len(val_sets)} validation sets")
    n = len(models)
    out = np.empty((n, n))
    arrays = []
    for samples in val_sets:
        x, _ = to_arrays(samples, scaling)
        arrays.append((x, np.array([s.label for s in samples])))
    for i, params in enumerate(models):
        for j, (x, y_wh) in enumerate(arrays):
            out[i, j] = evaluate_arrays(params, x, y_wh, scaling)
    return out


@dataclass
class ConvergenceTrace:
    """Per-round losses of one federation run."""

    rounds: list[int]
    train_loss: list[float]               # mean over that round's participants
    val_loss_wh: dict[int, list[float]]   # client id -> per-round validation MAE
    tag: str = ""

    @classmethod
    def from_reports(cls, reports, tag: str = "") -> "ConvergenceTrace":
        if not reports:
            raise ValueError("no round reports")
        ids = sorted(reports[0].val_loss_wh)
        return cls(
            rounds=[r.round_index for r in reports],
            train_loss=[
                float(np.mean(list(r.train_loss.values()))) if r.train_loss else float("nan")
                for r in reports
            ],
            val_loss_wh={i: [r.val_loss_wh[i] for r in reports] for i in ids},
            tag=tag,
        )


@dataclass
class NormalizedTrace:
    """Validation traces divided by each client's round-1 value; clients whose
    round-1 loss is zero are passed through unnormalized and flagged."""

    values: dict[int, np.ndarray]
    unnormalized: set[int]


def normalized_validation_trace(trace: ConvergenceTrace) -> NormalizedTrace:
    if not trace.rounds:
        raise ValueError("empty convergence trace")
    values = {}
    unnormalized = set()
    for client, series in trace.val_loss_wh.items():
        series = np.asarray(series, dtype=float)
        if series[0] == 0.0:
            values[client] = series
            unnormalized.add(client)
        else:
            values[client] = series / series[0]
    return NormalizedTrace(values=values, unnormalized=unnormalized)


@dataclass
class PredictionTrace:
    """Ground truth and model predictions per window end index of one trip."""

    k: np.ndarray
    truth_wh: np.ndarray
    fed_wh: np.ndarray
    local_wh: np.ndarray

    def mae(self, column: str) -> float:
        preds = getattr(self, column)
        return float(np.mean(np.abs(preds - self.truth_wh)))


def prediction_trace(
    fed_params: ModelParameters,
    local_params: ModelParameters,
    trip: TripRecord,
    m: int,
    scaling: ScalingSpec,
) -> PredictionTrace:
    """Eval-mode window-energy predictions of both models along one trip."""
    if len(trip) < m:
        raise ValueError(f"trip {trip.trip_id} (length {len(trip)}) is shorter than the window {m}")
    samples = trip_windows(trip, m)
    x, _ = to_arrays(samples, scaling)
    truth = np.array([s.label for s in samples])
    fed_pred, _ = forward(fed_params, x, mode="eval", dtype=np.float64)
    local_pred, _ = forward(local_params, x, mode="eval", dtype=np.float64)
    return PredictionTrace(
        k=np.array([s.origin[1] for s in samples]),
        truth_wh=truth,
        fed_wh=np.array([unscale_label(p, scaling) for p in fed_pred]),
        local_wh=np.array([unscale_label(p, scaling) for p in local_pred]),
    )


# ---------------------------------------------------------------------------
# export: CSV carries the data, SVG is a cosmetic rendering of the same CSV

def write_matrix_csv(matrix: np.ndarray, client_ids: list[int], path) -> None:
    matrix = np.asarray(matrix)
    if matrix.size == 0:
        raise ValueError("refusing to export an empty matrix")
    if matrix.shape != (len(client_ids), len(client_ids)):
        raise ValueError(f"matrix shape {matrix.shape} does not match {len(client_ids)} clients")
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(",".join(str(i) for i in client_ids) + "\n")
        for row in matrix:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_matrix_csv(path):
    with open(path, encoding="utf-8") as fh:
        ids = [int(v) for v in fh.readline().strip().split(",")]
        rows = [[float(v) for v in line.strip().split(",")] for line in fh if line.strip()]
    return np.array(rows), ids


def write_convergence_csv(trace: ConvergenceTrace, path) -> None:
    if not trace.rounds:
        raise ValueError("refusing to export an empty trace")
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("round,client,val_loss_wh\n")
        for client in sorted(trace.val_loss_wh):
            for r, v in zip(trace.rounds, trace.val_loss_wh[client]):
                fh.write(f"{r},{client},{float(v)!r}\n")


def read_convergence_csv(path) -> dict[int, list[float]]:
    out: dict[int, list[float]] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "round,client,val_loss_wh":
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in fh:
            if not line.strip():
                continue
            _, client, v = line.strip().split(",")
            out.setdefault(int(client), []).append(float(v))
    return out


def write_prediction_csv(trace: PredictionTrace, path) -> None:
    if len(trace.k) == 0:
        raise ValueError("refusing to export an empty prediction trace")
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("k,truth_wh,fed_wh,local_wh\n")
        for k, t, f, lo in zip(trace.k, trace.truth_wh, trace.fed_wh, trace.local_wh):
            fh.write(f"{int(k)},{float(t)!r},{float(f)!r},{float(lo)!r}\n")


def _matplotlib():
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "fedfleet"
    import matplotlib.pyplot as plt

    return plt


def render_matrix_svg(matrix: np.ndarray, client_ids: list[int], path, title: str = "") -> None:
    plt = _matplotlib()
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(np.asarray(matrix), cmap="viridis")
    ax.set_xticks(range(len(client_ids)), [str(i) for i in client_ids])
    ax.set_yticks(range(len(client_ids)), [str(i) for i in client_ids])
    ax.set_xlabel("validation set (client)")
    ax.set_ylabel("local model (client)")
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, label="MAE (Wh)")
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def render_lines_svg(series: dict, path, xlabel: str, ylabel: str, title: str = "") -> None:
    plt = _matplotlib()
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, (xs, ys) in series.items():
        ax.plot(xs, ys, label=str(label), linewidth=1.2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(series) <= 12:
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
