"""Epoch loop, metrics and experiment sweeps.

One epoch ``j`` runs in this order:

1. every MU already holds the task admitted at the start of ``j``;
2. each MU picks ``(z, X, R)`` and, when ``z = 1``, submits a bid;
3. the auction picks winners and VCG payments;
4. MUs schedule and transmit according to the auction outcome;
5. local CPUs and the UAV's VMs advance;
6. AoI, utility and payoff are computed;
7. UAV and MUs move, and the arrival for ``j + 1`` is drawn;
8. learning agents store ``(S, (phi, X, R), payoff, S', S~)``, train both
   networks and periodically sync the target network.

Random streams are split per purpose (maps, initial placement, UAV motion,
and per MU: motion, arrivals, agent) so a scheme change or a different
channel count leaves mobility and arrivals untouched.
"""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import agent as agent_mod
from . import baselines
from .auction import run_auction
from .config import ConfigError, RunConfig
from .system import Decision, Dynamics, MobileUser, execute_epoch
from .world import MobilityModel, Topology, sample_arrival_and_admit, step_mobility

SCHEMES = ("deeprl",) + baselines.SCHEMES
PER_MU_FIELDS = ("aoi", "energy", "utility", "payoff", "payment", "loss_q", "loss_post",
                 "discounted_return")
MEAN_FIELDS = PER_MU_FIELDS
AVERAGED = ("aoi", "energy", "utility", "payoff", "payment")


@dataclass
class MetricsRecord:
    epoch: int
    aoi: list            # AoI at the start of the epoch (the one the utility uses)
    energy: list
    utility: list
    payoff: list
    payment: list
    loss_q: list         # NaN when the agent did not train this epoch
    loss_post: list
    discounted_return: list
    winners: int
    revenue: float

    def mean(self, name: str) -> float:
        vals = [v for v in getattr(self, name) if not math.isnan(v)]
        return math.fsum(vals) / len(vals) if vals else math.nan


def csv_header(num_mus: int) -> list[str]:
    cols = ["epoch"] + [f"mean_{f}" for f in MEAN_FIELDS] + ["winners", "revenue"]
    for k in range(num_mus):
        cols += [f"{f}_{k}" for f in PER_MU_FIELDS]
    return cols


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def csv_row(rec: MetricsRecord) -> list[str]:
    row = [str(rec.epoch)] + [_fmt(rec.mean(f)) for f in MEAN_FIELDS]
    row += [str(rec.winners), _fmt(rec.revenue)]
    for k in range(len(rec.aoi)):
        row += [_fmt(getattr(rec, f)[k]) for f in PER_MU_FIELDS]
    return row


class Simulation:
    """A running system with a fixed scheme (``deeprl`` or a baseline)."""

    def __init__(self, config: RunConfig, scheme: str = "deeprl", epochs: int | None = None):
        if scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {scheme!r}; choose from {', '.join(SCHEMES)}")
        config.validate()
        self.config = config
        self.scheme = scheme
        cfg = self.cfg = config.world
        self.total_epochs = epochs if epochs is not None else config.learn.epochs
        self.topo = Topology(cfg)
        self.dyn = Dynamics(cfg, self.topo)
        K = cfg.num_mus

        root = np.random.SeedSequence(cfg.seed)
        s_map, s_place, s_uav, s_mus = root.spawn(4)
        map_rng = np.random.default_rng(s_map)
        self.uav_model = MobilityModel.random_walk(self.topo, map_rng, static=cfg.uav_static)
        self.mu_models = [MobilityModel.random_walk(self.topo, map_rng) for _ in range(K)]
        place = np.random.default_rng(s_place)
        self.uav_cell = int(place.integers(self.topo.n_cells))
        cells = place.integers(self.topo.n_cells, size=K)
        self.uav_rng = np.random.default_rng(s_uav)
        streams = [s.spawn(3) for s in s_mus.spawn(K)]
        self.move_rng = [np.random.default_rng(s[0]) for s in streams]
        self.arrive_rng = [np.random.default_rng(s[1]) for s in streams]

        self.mus = [MobileUser(cell=int(c), assoc=self.topo.serving_bs(int(c))) for c in cells]
        self.j = 1
        for k, mu in enumerate(self.mus):
            mu.buffer = sample_arrival_and_admit(mu.buffer, 1, self.arrive_rng[k], cfg.arrival_prob)
        self.plans = [self.dyn.plans(mu, self.uav_cell) for mu in self.mus]
        self.agents = None
        if scheme == "deeprl":
            self.agents = [agent_mod.DeepAgent(k, self.dyn, config.learn, cfg.discount,
                                               np.random.default_rng(s[2]))
                           for k, s in enumerate(streams)]
        self.returns = [0.0] * K

    def states(self):
        return [agent_mod.local_state(mu, self.uav_cell) for mu in self.mus]

    def run_epoch(self) -> MetricsRecord:
        cfg, dyn, j = self.cfg, self.dyn, self.j
        K = len(self.mus)
        states = self.states()
        eps = agent_mod.epsilon(j, self.total_epochs, self.config.learn)

        actions, bids = [], []
        for k in range(K):
            if self.agents is not None:
                action, bid = self.agents[k].act(states[k], self.plans[k], eps)
            else:
                action = baselines.baseline_action(self.scheme, states[k], self.plans[k])
                bid = baselines.baseline_bid(k, states[k], action, self.plans[k][action.x], dyn)
            actions.append(action)
            if bid is not None:
                bids.append(bid)

        result = run_auction(bids, cfg.num_channels, self.topo.adjacency)
        decisions = []
        for k, action in enumerate(actions):
            phi = result.phi(k) if action.z else 0
            decisions.append(Decision(self.plans[k][action.x], action.r, phi, result.tau(k)))
        outcomes, _ = execute_epoch(dyn, self.mus, decisions, j)

        self.uav_cell = step_mobility(self.uav_model, self.uav_cell, self.uav_rng)
        for k, mu in enumerate(self.mus):
            mu.cell = step_mobility(self.mu_models[k], mu.cell, self.move_rng[k])
            mu.buffer = sample_arrival_and_admit(mu.buffer, j + 1, self.arrive_rng[k],
                                                 cfg.arrival_prob)
        self.plans = [dyn.plans(mu, self.uav_cell) for mu in self.mus]

        loss_q, loss_post = [math.nan] * K, [math.nan] * K
        if self.agents is not None:
            next_states = self.states()
            for k, ag in enumerate(self.agents):
                ag.observe_payment(outcomes[k].payment)
                ag.remember(states[k], actions[k], decisions[k].phi, outcomes[k].payoff,
                            next_states[k], self.plans[k])
                losses = ag.train()
                if losses is not None:
                    loss_q[k], loss_post[k] = losses
                ag.sync(j)

        g = cfg.discount
        for k, out in enumerate(outcomes):
            self.returns[k] = g * self.returns[k] + (1.0 - g) * out.payoff
        self.j += 1
        return MetricsRecord(
            epoch=j,
            aoi=[o.aoi_before for o in outcomes],
            energy=[o.energy for o in outcomes],
            utility=[o.utility for o in outcomes],
            payoff=[o.payoff for o in outcomes],
            payment=[o.payment for o in outcomes],
            loss_q=loss_q, loss_post=loss_post,
            discounted_return=list(self.returns),
            winners=len(result.winners), revenue=result.revenue)

    def run(self, epochs: int | None = None, on_record=None) -> list[MetricsRecord]:
        n = self.total_epochs if epochs is None else epochs
        records = []
        for _ in range(n):
            rec = self.run_epoch()
            if on_record is not None:
                on_record(rec)
            records.append(rec)
        return records


# --------------------------------------------------------------------------
# summaries and files


def summarize(records: list[MetricsRecord]) -> dict:
    """Per-epoch means averaged over the whole run (``avg_*``) and over its
    second half (``tail_*``)."""
    out = {}
    tail = records[len(records) // 2:]
    for prefix, recs in (("avg", records), ("tail", tail)):
        for f in AVERAGED:
            vals = [r.mean(f) for r in recs]
            out[f"{prefix}_{f}"] = math.fsum(vals) / len(vals) if vals else math.nan
    out["avg_revenue"] = math.fsum(r.revenue for r in records) / max(len(records), 1)
    out["final_discounted_return"] = records[-1].mean("discounted_return") if records else math.nan
    return out


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    return out


def _write_csv(path: Path, header: list[str], rows) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from None


def write_summary(out: Path, meta: dict) -> Path:
    path = out / "summary.json"
    try:
        path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from None
    return path


def emit_metrics(records: list[MetricsRecord], out_dir, name: str = "metrics.csv") -> Path:
    out = _out_dir(out_dir)
    num_mus = len(records[0].aoi) if records else 0
    path = out / name
    _write_csv(path, csv_header(num_mus), (csv_row(r) for r in records))
    return path


def simulate(config: RunConfig, scheme: str, out_dir, epochs: int | None = None) -> dict:
    """Run one scheme and write ``metrics.csv`` plus ``summary.json``."""
    out = _out_dir(out_dir)
    start = time.perf_counter()
    sim = Simulation(config, scheme, epochs)
    records = sim.run()
    path = emit_metrics(records, out)
    meta = {"command": "simulate", "scheme": scheme, "seed": config.world.seed,
            "config_hash": config.digest(), "epochs": len(records),
            "wall_time_s": round(time.perf_counter() - start, 3),
            "metrics_file": path.name, **summarize(records)}
    write_summary(out, meta)
    return meta


# --------------------------------------------------------------------------
# experiments

EXPERIMENTS = ("convergence", "lambda", "channels")
SWEEP_COLUMNS = ("value", "scheme", "seed", "avg_aoi", "avg_energy", "avg_utility",
                 "avg_payoff", "avg_payment", "tail_aoi", "tail_energy", "tail_utility",
                 "tail_payoff", "tail_payment", "avg_revenue", "final_discounted_return")
DEFAULT_GRIDS = {"lambda": (0.1, 0.3, 0.5, 0.7, 0.9), "channels": (1, 2, 4, 8)}


def check_grid(kind: str, grid) -> tuple:
    grid = tuple(grid)
    if not grid:
        raise ConfigError(f"{kind} grid is empty")
    for v in grid:
        if kind == "lambda" and not (isinstance(v, (int, float)) and 0.0 <= v <= 1.0):
            raise ConfigError(f"arrival probability {v!r} outside [0, 1]")
        if kind in ("channels", "convergence") and not (
                isinstance(v, (int, np.integer)) and not isinstance(v, bool) and v >= 1):
            raise ConfigError(f"{kind} grid value {v!r} must be a positive integer")
    if len(set(grid)) != len(grid):
        raise ConfigError(f"{kind} grid has duplicates")
    return grid


def run_experiment(kind: str, config: RunConfig, out_dir, grid=None, schemes=None,
                   epochs: int | None = None) -> dict:
    """Run a sweep and write ``<kind>.csv`` and ``summary.json`` into ``out_dir``.

    * ``convergence``: the learning scheme for each mini-batch size in ``grid``;
      one row per (batch size, epoch) with the mean losses.
    * ``lambda`` / ``channels``: every scheme at every grid point; one row per
      (point, scheme) with run averages.
    """
    if kind not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {kind!r}; choose from {', '.join(EXPERIMENTS)}")
    out = _out_dir(out_dir)
    start = time.perf_counter()
    seed = config.world.seed
    if kind == "convergence":
        b = config.learn.batch_size
        grid = check_grid(kind, grid if grid is not None else (max(b // 2, 1), b, 2 * b))
        rows, finals = [], {}
        for size in grid:
            records = Simulation(config.replace(batch_size=size), "deeprl", epochs).run()
            rows += [[str(size), str(r.epoch), _fmt(r.mean("loss_q")), _fmt(r.mean("loss_post"))]
                     for r in records]
            finals[str(size)] = summarize(records)
        _write_csv(out / "convergence.csv",
                   ["batch_size", "epoch", "mean_loss_q", "mean_loss_post"], rows)
        runs = finals
    else:
        grid = check_grid(kind, grid if grid is not None else DEFAULT_GRIDS[kind])
        schemes = tuple(schemes) if schemes is not None else SCHEMES
        for s in schemes:
            if s not in SCHEMES:
                raise ConfigError(f"unknown scheme {s!r}")
        key = "arrival_prob" if kind == "lambda" else "num_channels"
        rows, runs = [], {}
        for value in grid:
            for scheme in schemes:
                records = Simulation(config.replace(**{key: value}), scheme, epochs).run()
                summary = summarize(records)
                runs[f"{value}/{scheme}"] = summary
                rows.append([_fmt(value), scheme, str(seed)]
                            + [_fmt(summary[c]) for c in SWEEP_COLUMNS[3:]])
        _write_csv(out / f"{kind}.csv", list(SWEEP_COLUMNS), rows)
    meta = {"command": "experiment", "kind": kind, "seed": seed,
            "config_hash": config.digest(), "grid": list(grid),
            "wall_time_s": round(time.perf_counter() - start, 3), "runs": runs}
    write_summary(out, meta)
    return meta
