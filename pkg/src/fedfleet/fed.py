"""FedAvg orchestration: client registry, per-round sampling, local updates,
data-size-weighted aggregation and round reporting.

The server loop is sequential across rounds; within a round the selected
clients' local updates are independent and may run in worker processes. Each
client receives a value copy of the global parameters; aggregation sums in
ascending client-id order for bit-reproducibility. A client raising during
its update is excluded from that round's aggregation and recorded as failed.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dataset import ScalingSpec, WindowedSample, to_arrays
from .evaluation import evaluate_arrays
from .nn import Hyperparams, ModelConfig, ModelParameters, init_params, train_local
from .seeds import child_seed


@dataclass(frozen=True)
class FedConfig:
    """Federation knobs: N clients, participation fraction C, rounds T, the
    shared model/hyperparameters, and the seed all round-level randomness
    (sampling, local shuffles, dropout) derives from."""

    clients: int = 10
    participation: float = 1.0
    rounds: int = 25
    model: ModelConfig = field(default_factory=ModelConfig)
    hyper: Hyperparams = field(default_factory=Hyperparams)
    optimizer: str = "adam"
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.clients < 1:
            raise ValueError("clients must be >= 1")
        if not 0.0 < self.participation <= 1.0:
            raise ValueError("participation must lie in (0, 1]")
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


class ClientHandle:
    """One vehicle's training/validation data plus its local-update behaviour.

    Sample arrays are prepared once at construction; ``local_update`` runs the
    shared training loop on the client's own data and returns the trained
    parameters together with the sample count used as aggregation weight.
    """

    def __init__(
        self,
        client_id: int,
        train_samples: list[WindowedSample],
        val_samples: list[WindowedSample],
        scaling: ScalingSpec,
    ):
        if not train_samples:
            raise ValueError(f"client {client_id} has an empty training set")
        if not val_samples:
            raise ValueError(f"client {client_id} has an empty validation set")
        self.client_id = int(client_id)
        self.scaling = scaling
        self.train_x, self.train_y = to_arrays(train_samples, scaling)
        self.val_x, _ = to_arrays(val_samples, scaling)
        self.val_y_wh = np.array([s.label for s in val_samples])

    @property
    def num_samples(self) -> int:
        return len(self.train_x)

    def local_update(
        self, params: ModelParameters, hyper: Hyperparams, optimizer: str, seed: int
    ) -> "ClientUpdate":
        trained, trace = train_local(
            params, self.train_x, self.train_y, hyper, optimizer=optimizer, seed=seed
        )
        return ClientUpdate(
            client_id=self.client_id,
            params=trained,
            num_samples=self.num_samples,
            train_loss=trace[-1] if trace else math.nan,
        )


@dataclass
class ClientUpdate:
    client_id: int
    params: ModelParameters
    num_samples: int
    train_loss: float


@dataclass
class RoundReport:
    """Outcome of one federation round."""

    round_index: int
    selected: list[int]
    failed: dict[int, str]
    train_loss: dict[int, float]
    num_samples: dict[int, int]
    val_loss_wh: dict[int, float]
    wall_clock_s: float = 0.0


def sample_clients(n_clients: int, participation: float, round_index: int, seed: int) -> list[int]:
    """Uniform random s-subset of {0..N-1}, s = max(floor(C*N), 1), sorted
    ascending; deterministic in (seed, round_index)."""
    if n_clients < 1:
        raise ValueError("n_clients must be >= 1")
    if not 0.0 < participation <= 1.0:
        raise ValueError("participation must lie in (0, 1]")
    s = max(int(math.floor(participation * n_clients + 1e-9)), 1)
    rng = np.random.default_rng(child_seed(seed, "client-sample", round_index))
    return sorted(int(i) for i in rng.choice(n_clients, size=s, replace=False))


def aggregate(updates: list[ClientUpdate]) -> ModelParameters:
    """Coordinatewise mean weighted by each client's sample count.

    Summation runs in ascending client-id order; all updates must share one
    shape descriptor and carry positive counts.
    """
    if not updates:
        raise ValueError("cannot aggregate an empty update list")
    updates = sorted(updates, key=lambda u: u.client_id)
    config = updates[0].params.config
    for u in updates:
        if u.params.config != config:
            raise ValueError(
                f"client {u.client_id} has a mismatched shape descriptor: "
                f"{u.params.config} != {config}"
            )
        if u.num_samples <= 0:
            raise ValueError(f"client {u.client_id} reports a non-positive sample count")
    total = float(sum(u.num_samples for u in updates))
    out = np.zeros_like(updates[0].params.flat)
    for u in updates:
        out += (u.num_samples / total) * u.params.flat
    return ModelParameters(config, out)


def _run_update(args):
    handle, params, hyper, optimizer, seed = args
    return handle.local_update(params, hyper, optimizer, seed)


def run_federated(
    clients: list[ClientHandle], cfg: FedConfig
) -> tuple[ModelParameters, list[RoundReport]]:
    """FedAvg main loop; returns the final global parameters and one report
    per round. Deterministic in (clients' data, cfg)."""
    if not clients:
        raise ValueError("need at least one client")
    if len(clients) != cfg.clients:
        raise ValueError(f"config says {cfg.clients} clients, got {len(clients)}")
    handles = sorted(clients, key=lambda h: h.client_id)
    ids = [h.client_id for h in handles]
    if len(set(ids)) != len(ids):
        raise ValueError("client ids must be unique")

    params = init_params(cfg.model)
    reports: list[RoundReport] = []
    pool = ProcessPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    try:
        for t in range(1, cfg.rounds + 1):
            started = time.perf_counter()
            selected_pos = sample_clients(cfg.clients, cfg.participation, t, cfg.seed)
            selected = [handles[p] for p in selected_pos]
            jobs = [
                (h, params.copy(), cfg.hyper, cfg.optimizer,
                 child_seed(cfg.seed, f"local-train-round-{t}", h.client_id))
                for h in selected
            ]
            updates: list[ClientUpdate] = []
            failed: dict[int, str] = {}
            if pool is not None:
                futures = [(h, pool.submit(_run_update, job)) for h, job in zip(selected, jobs)]
                for h, fut in futures:
                    try:
                        updates.append(fut.result())
                    except Exception as exc:  # fail-stop client, rejoins next round
                        failed[h.client_id] = str(exc)
            else:
                for h, job in zip(selected, jobs):
                    try:
                        updates.append(_run_update(job))
                    except Exception as exc:
                        failed[h.client_id] = str(exc)
            if updates:
                params = aggregate(updates)
            val_loss = {
                h.client_id: evaluate_arrays(params, h.val_x, h.val_y_wh, h.scaling)
                for h in handles
            }
            reports.append(
                RoundReport(
                    round_index=t,
                    selected=[h.client_id for h in selected],
                    failed=failed,
                    train_loss={u.client_id: u.train_loss for u in updates},
                    num_samples={u.client_id: u.num_samples for u in updates},
                    val_loss_wh=val_loss,
                    wall_clock_s=time.perf_counter() - started,
                )
            )
    finally:
        if pool is not None:
            pool.shutdown()
    return params, reports


def serialize_round(report: RoundReport) -> str:
    """One canonical JSON line per round.

    Wall-clock duration is a non-reproducible diagnostic and is deliberately
    left out so round logs are byte-identical across replays.
    """
    if not report.selected:
        raise ValueError("refusing to serialize a report with an empty selection")
    payload = {
        "round": report.round_index,
        "selected": list(report.selected),
        "failed": {str(k): v for k, v in sorted(report.failed.items())},
        "train_loss": {str(k): v for k, v in sorted(report.train_loss.items())},
        "num_samples": {str(k): v for k, v in sorted(report.num_samples.items())},
        "val_loss_wh": {str(k): v for k, v in sorted(report.val_loss_wh.items())},
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def parse_round(line: str) -> RoundReport:
    """Inverse of :func:`serialize_round` (wall clock comes back as 0)."""
    payload = json.loads(line)
    return RoundReport(
        round_index=payload["round"],
        selected=[int(i) for i in payload["selected"]],
        failed={int(k): v for k, v in payload["failed"].items()},
        train_loss={int(k): float(v) for k, v in payload["train_loss"].items()},
        num_samples={int(k): int(v) for k, v in payload["num_samples"].items()},
        val_loss_wh={int(k): float(v) for k, v in payload["val_loss_wh"].items()},
    )


def write_round_log(reports: list[RoundReport], path) -> None:
    """Append-only JSONL round log."""
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        for report in reports:
            fh.write(serialize_round(report) + "\n")


def read_round_log(path) -> list[RoundReport]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(parse_round(line))
    return out
