"""Reproducible experiment driver.

Subcommands compose a full pipeline from one JSON config:

  gen-data     synthesize trips, attach energy labels, persist per-vehicle datasets
  train-local  train one standalone model per vehicle on its own data
  train-fed    run federated averaging across the fleet
  report       emit the loss matrix, convergence/normalized traces and the
               prediction trace, as CSV plus SVG renderings

Every randomized stage derives its seed from the config's master seed, so two
runs from the same config produce byte-identical artifacts. Commands validate
their prerequisites instead of regenerating them.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import evaluation
from .config import ConfigError, RunConfig, default_config_dict, load_config
from .dataset import (
    DatasetFormatError,
    LocalDataset,
    build_windows,
    load_dataset,
    save_dataset,
    split,
    to_arrays,
)
from .drivecycle import build_cycle
from .fed import ClientHandle, FedConfig, run_federated, read_round_log, write_round_log
from .nn import init_params, load_params, save_params, train_local, write_loss_trace
from .powertrain import simulate_trip
from .seeds import child_seed

CORPUS_FORMAT = "fedfleet-corpus"
CORPUS_VERSION = 1


class PipelineError(RuntimeError):
    """A failed prerequisite or invalid state; reported as machine-readable JSON."""


def _corpus_path(out: Path) -> Path:
    return out / "corpus.json"


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise PipelineError(f"{path} is missing; run `{hint}` first")
    return path


def cmd_gen_data(cfg: RunConfig, out: Path) -> dict:
    """Generate and persist the fleet corpus; returns the corpus manifest."""
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for client_id, spec in enumerate(cfg.vehicles):
        vehicle = cfg.vehicle_params(spec)
        trips = []
        for j in range(spec.trips):
            cycle = build_cycle(
                spec.driver,
                spec.terrain,
                spec.trip_duration_s,
                seed=child_seed(cfg.master_seed, f"trip:{spec.vehicle_id}", j),
                trip_id=f"{spec.vehicle_id}-t{j:02d}",
                vehicle_id=spec.vehicle_id,
            )
            trips.append(simulate_trip(cycle, vehicle, cfg.controller, soc0=cfg.soc0))
        ds = LocalDataset(vehicle_id=spec.vehicle_id, trips=trips)
        windows = build_windows(ds, cfg.model.window)
        if not windows:
            raise PipelineError(
                f"vehicle {spec.vehicle_id}: no windows (trips shorter than {cfg.model.window} s)"
            )
        to_arrays(windows, cfg.scaling)  # corpus-time label-scale check
        ds_dir = out / "datasets" / spec.vehicle_id
        save_dataset(ds, ds_dir, cfg.scaling)
        entries.append(
            {
                "client_id": client_id,
                "vehicle_id": spec.vehicle_id,
                "path": str(ds_dir.relative_to(out)),
                "trips": len(trips),
                "window_count": len(windows),
            }
        )
    manifest = {
        "format": CORPUS_FORMAT,
        "version": CORPUS_VERSION,
        "master_seed": cfg.master_seed,
        "window": cfg.model.window,
        "vehicles": entries,
    }
    with open(_corpus_path(out), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def _load_corpus(cfg: RunConfig, out: Path) -> dict:
    path = _require(_corpus_path(out), "fedfleet gen-data")
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format") != CORPUS_FORMAT or manifest.get("version") != CORPUS_VERSION:
        raise PipelineError(f"{path}: not a version-{CORPUS_VERSION} {CORPUS_FORMAT} manifest")
    if len(manifest["vehicles"]) != cfg.n_clients:
        raise PipelineError(
            f"{path}: corpus has {len(manifest['vehicles'])} vehicles, config has {cfg.n_clients}"
        )
    return manifest


def _client_sets(cfg: RunConfig, out: Path, manifest: dict):
    """Deterministic per-client (train, val) sample lists, shared by the
    local-baseline and federated commands."""
    sets = []
    for entry in manifest["vehicles"]:
        ds, _ = load_dataset(out / entry["path"])
        windows = build_windows(ds, cfg.model.window)
        train, val = split(
            windows, cfg.val_fraction, seed=child_seed(cfg.master_seed, f"split:{ds.vehicle_id}")
        )
        sets.append((entry, train, val))
    return sets


def cmd_train_local(cfg: RunConfig, out: Path) -> list[Path]:
    """Train one standalone checkpoint per vehicle on its local data only."""
    manifest = _load_corpus(cfg, out)
    local_dir = out / "local"
    local_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for entry, train, _val in _client_sets(cfg, out, manifest):
        vid = entry["vehicle_id"]
        model = dataclasses.replace(cfg.model, seed=child_seed(cfg.master_seed, f"local-init:{vid}"))
        params = init_params(model)
        x, y = to_arrays(train, cfg.scaling)
        trained, trace = train_local(
            params, x, y, cfg.local_hyper,
            optimizer=cfg.optimizer,
            seed=child_seed(cfg.master_seed, f"local-train:{vid}"),
        )
        ckpt = local_dir / f"{vid}.params"
        save_params(trained, ckpt)
        write_loss_trace(trace, local_dir / f"{vid}_loss.csv")
        written.append(ckpt)
    return written


def cmd_train_fed(cfg: RunConfig, out: Path):
    """Run FedAvg and write the global checkpoint, round log and convergence CSV."""
    manifest = _load_corpus(cfg, out)
    clients = [
        ClientHandle(entry["client_id"], train, val, cfg.scaling)
        for entry, train, val in _client_sets(cfg, out, manifest)
    ]
    fed_cfg = FedConfig(
        clients=cfg.n_clients,
        participation=cfg.participation,
        rounds=cfg.rounds,
        model=dataclasses.replace(cfg.model, seed=child_seed(cfg.master_seed, "fed-init")),
        hyper=dataclasses.replace(cfg.local_hyper, epochs=cfg.fed_epochs),
        optimizer=cfg.optimizer,
        seed=child_seed(cfg.master_seed, "fed"),
        workers=cfg.workers,
    )
    params, reports = run_federated(clients, fed_cfg)
    fed_dir = out / "fed"
    fed_dir.mkdir(parents=True, exist_ok=True)
    save_params(params, fed_dir / "global.params")
    if reports:
        write_round_log(reports, fed_dir / "rounds.jsonl")
        trace = evaluation.ConvergenceTrace.from_reports(reports, tag=cfg.optimizer)
        evaluation.write_convergence_csv(trace, fed_dir / "convergence.csv")
    return params, reports


def cmd_report(cfg: RunConfig, out: Path) -> dict:
    """Produce the four artifact families from existing checkpoints."""
    manifest = _load_corpus(cfg, out)
    fed_ckpt = _require(out / "fed" / "global.params", "fedfleet train-fed")
    rounds_path = _require(out / "fed" / "rounds.jsonl", "fedfleet train-fed")
    missing = [
        str(out / "local" / f"{e['vehicle_id']}.params")
        for e in manifest["vehicles"]
        if not (out / "local" / f"{e['vehicle_id']}.params").exists()
    ]
    if missing:
        raise PipelineError("missing local checkpoints: " + ", ".join(missing) +
                            "; run `fedfleet train-local` first")

    fed_params = load_params(fed_ckpt)
    local_params = [load_params(out / "local" / f"{e['vehicle_id']}.params") for e in manifest["vehicles"]]
    sets = _client_sets(cfg, out, manifest)
    val_sets = [val for _, _, val in sets]
    client_ids = [entry["client_id"] for entry, _, _ in sets]

    report_dir = out / "report"
    report_dir.mkdir(parents=True, exist_ok=True)

    matrix = evaluation.loss_matrix(local_params, val_sets, cfg.scaling)
    evaluation.write_matrix_csv(matrix, client_ids, report_dir / "matrix.csv")
    evaluation.render_matrix_svg(matrix, client_ids, report_dir / "matrix.svg",
                                 title="local models vs validation sets")

    reports = read_round_log(rounds_path)
    trace = evaluation.ConvergenceTrace.from_reports(reports, tag=cfg.optimizer)
    evaluation.write_convergence_csv(trace, report_dir / "convergence.csv")
    evaluation.render_lines_svg(
        {c: (trace.rounds, trace.val_loss_wh[c]) for c in sorted(trace.val_loss_wh)},
        report_dir / "convergence.svg", xlabel="round", ylabel="validation MAE (Wh)",
        title="federated convergence",
    )

    normalized = evaluation.normalized_validation_trace(trace)
    with open(report_dir / "normalized.csv", "w", newline="\n", encoding="utf-8") as fh:
        fh.write("round,client,normalized_val_loss\n")
        for client in sorted(normalized.values):
            for r, v in zip(trace.rounds, normalized.values[client]):
                fh.write(f"{r},{client},{float(v)!r}\n")
    evaluation.render_lines_svg(
        {c: (trace.rounds, normalized.values[c]) for c in sorted(normalized.values)},
        report_dir / "normalized.svg", xlabel="round", ylabel="validation loss / round-1 loss",
        title="normalized validation loss",
    )

    holdout_spec = cfg.vehicles[cfg.report_holdout_vehicle]
    cycle = build_cycle(
        holdout_spec.driver,
        holdout_spec.terrain,
        holdout_spec.trip_duration_s,
        seed=child_seed(cfg.master_seed, f"holdout:{holdout_spec.vehicle_id}"),
        trip_id=f"{holdout_spec.vehicle_id}-holdout",
        vehicle_id=holdout_spec.vehicle_id,
    )
    trip = simulate_trip(cycle, cfg.vehicle_params(holdout_spec), cfg.controller, soc0=cfg.soc0)
    ptrace = evaluation.prediction_trace(
        fed_params, local_params[cfg.report_local_model], trip, cfg.model.window, cfg.scaling
    )
    evaluation.write_prediction_csv(ptrace, report_dir / "trace.csv")
    evaluation.render_lines_svg(
        {
            "ground truth": (ptrace.k, ptrace.truth_wh),
            "federated": (ptrace.k, ptrace.fed_wh),
            f"local ({cfg.vehicles[cfg.report_local_model].vehicle_id})": (ptrace.k, ptrace.local_wh),
        },
        report_dir / "trace.svg", xlabel="window end (s)", ylabel="window energy (Wh)",
        title=f"prediction on held-out trip of {holdout_spec.vehicle_id}",
    )
    return {
        "matrix": str(report_dir / "matrix.csv"),
        "convergence": str(report_dir / "convergence.csv"),
        "normalized": str(report_dir / "normalized.csv"),
        "trace": str(report_dir / "trace.csv"),
        "fed_trace_mae_wh": ptrace.mae("fed_wh"),
        "local_trace_mae_wh": ptrace.mae("local_wh"),
    }


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedfleet",
        description="Simulated BEV fleet with federated energy-model training.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("gen-data", "generate the fleet corpus"),
        ("train-local", "train per-vehicle baseline models"),
        ("train-fed", "run federated averaging"),
        ("report", "emit evaluation artifacts"),
    ):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", required=True, help="path to the run config JSON")
        p.add_argument("--out", required=True, help="output directory of the run")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
    init = sub.add_parser("init-config", help="write a default config file")
    init.add_argument("--out", required=True, help="where to write the config JSON")
    init.add_argument("--vehicles", type=int, default=10)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "init-config":
            path = Path(args.out)
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(default_config_dict(n_vehicles=args.vehicles), fh, indent=2)
                fh.write("\n")
            print(path)
            return 0
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.master_seed = args.seed
        out = Path(args.out)
        if args.command == "gen-data":
            manifest = cmd_gen_data(cfg, out)
            counts = {e["vehicle_id"]: e["window_count"] for e in manifest["vehicles"]}
            print(json.dumps({"corpus": str(_corpus_path(out)), "window_counts": counts}))
        elif args.command == "train-local":
            written = cmd_train_local(cfg, out)
            print(json.dumps({"checkpoints": [str(p) for p in written]}))
        elif args.command == "train-fed":
            _, reports = cmd_train_fed(cfg, out)
            print(json.dumps({
                "checkpoint": str(out / "fed" / "global.params"),
                "rounds": len(reports),
            }))
        elif args.command == "report":
            print(json.dumps(cmd_report(cfg, out)))
        return 0
    except (ConfigError, PipelineError, DatasetFormatError, ValueError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
