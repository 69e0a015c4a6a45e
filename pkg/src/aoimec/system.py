"""Per-MU state and the mechanics of one decision epoch.

The harness drives many MUs through :func:`execute_epoch`; the tabular
oracle drives a single MU through the same function, so both see identical
dynamics.  Within an epoch the order is: schedule the buffered task, update
the association, transmit ``phi * R`` packets, advance the local CPU, run the
UAV's VMs (shared by all MUs with remote backlog), then update AoI and the
payoff.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import compute, link
from .config import WorldConfig
from .link import LOCAL, NO_TASK, SERVER, UAV
from .world import Topology, channel_gain


@dataclass
class MobileUser:
    cell: int
    assoc: int
    buffer: int = 0         # arrival epoch of the buffered task, 0 = empty
    w_m: int = 0            # local CPU epochs remaining
    w_v: float = 0.0        # bits left at the UAV VM
    d: int = 0              # packets left at the transmitter
    aoi: float = 0.0
    t_m: int = 0            # arrival epochs of tasks in each pipeline, 0 = none
    t_s: int = 0
    t_v: int = 0
    last_tau: float = 0.0   # conjecture: last payment, last observed VM rate
    last_chi: float = 0.0

    def copy(self) -> "MobileUser":
        return replace(self)


@dataclass(frozen=True)
class Plan:
    """What choosing offloading decision ``x`` would mean this epoch."""

    x: int
    feasible: bool
    backlog: int            # packets at the transmitter after scheduling
    assoc: int
    handover: bool
    dt: float               # transmission time
    dest: int | None        # upload destination (BS index or the UAV), None if no backlog
    gain: float             # gain toward dest (or toward the would-be destination of x)
    rmax: int               # packets sendable this epoch, already capped by backlog
    local_energy: float


@dataclass
class Decision:
    plan: Plan
    packets: int = 0        # R
    phi: int = 0            # channel won
    payment: float = 0.0


@dataclass
class Outcome:
    energy: float
    utility: float
    payoff: float
    payment: float
    sent: int
    events: list = field(default_factory=list)
    aoi_before: float = 0.0


class Dynamics:
    """Configuration-bound helpers with cached channel gains."""

    def __init__(self, cfg: WorldConfig, topo: Topology):
        self.cfg = cfg
        self.topo = topo
        self.n_local = compute.local_epochs_required(cfg)
        self.ground_gain = np.array([channel_gain(cfg, topo, c, topo.serving_bs(c), 0)
                                     for c in range(topo.n_cells)])
        self._uav_gain: dict[tuple[int, int], float] = {}

    def uav_gain(self, cell: int, uav_cell: int) -> float:
        key = (cell, uav_cell)
        g = self._uav_gain.get(key)
        if g is None:
            g = self._uav_gain[key] = channel_gain(self.cfg, self.topo, cell, self.topo.uav, uav_cell)
        return g

    def gain_to(self, dest: int, cell: int, uav_cell: int) -> float:
        if dest == self.topo.uav:
            return self.uav_gain(cell, uav_cell)
        if dest == self.topo.serving_bs(cell):
            return float(self.ground_gain[cell])
        return channel_gain(self.cfg, self.topo, cell, dest, uav_cell)

    def feasible(self, mu: MobileUser, x: int) -> bool:
        if x == NO_TASK:
            return True
        if mu.buffer == 0:
            return False
        if x == LOCAL:
            return mu.w_m == 0
        if x == SERVER:
            return mu.d == 0
        return mu.d == 0 and mu.w_v == 0

    def plan(self, mu: MobileUser, uav_cell: int, x: int) -> Plan:
        cfg, topo = self.cfg, self.topo
        ok = self.feasible(mu, x)
        backlog = cfg.packets_per_task if x in (SERVER, UAV) else mu.d
        serving = topo.serving_bs(mu.cell)
        assoc = link.update_association(mu.assoc, serving, x, topo.uav)
        handover = assoc != mu.assoc
        dt = link.transmission_time(cfg.delta, cfg.handover_delay, handover)
        dest = assoc if backlog > 0 else None
        if dest is not None:
            gain = self.gain_to(dest, mu.cell, uav_cell)
        elif x == UAV:
            gain = self.uav_gain(mu.cell, uav_cell)
        else:
            gain = float(self.ground_gain[mu.cell])
        rmax = 0
        if dest is not None:
            rmax = link.max_packets(gain, dt, cfg.bandwidth, cfg.noise_density, cfg.p_max,
                                    cfg.bits_per_packet, backlog)
        w_m = self.n_local if x == LOCAL else mu.w_m
        return Plan(x, ok, backlog, assoc, handover, dt, dest, gain, rmax,
                    compute.local_cpu_energy(w_m, cfg, self.n_local))

    def plans(self, mu: MobileUser, uav_cell: int) -> list[Plan]:
        return [self.plan(mu, uav_cell, x) for x in range(4)]

    def tx_energy(self, plan: Plan, packets: int) -> float:
        cfg = self.cfg
        return link.tx_energy(plan.gain, plan.dt, cfg.bandwidth, cfg.noise_density,
                              packets, cfg.bits_per_packet)

    def hypothetical_utility(self, aoi: float, plan: Plan, packets: int) -> float:
        """Utility this epoch if ``packets`` packets go out (i.e. the channel is won)."""
        energy = plan.local_energy + self.tx_energy(plan, packets)
        return compute.utility(aoi, energy, self.cfg.aoi_weight, self.cfg.energy_weight)


def execute_epoch(dyn: Dynamics, mus: list[MobileUser], decisions: list[Decision],
                  j: int) -> tuple[list[Outcome], float]:
    """Apply one epoch to every MU in place; returns outcomes and the VM rate."""
    cfg = dyn.cfg
    uav = dyn.topo.uav
    partial = []
    for mu, dec in zip(mus, decisions):
        plan = dec.plan
        if not plan.feasible:
            raise ValueError(f"infeasible offloading decision {plan.x}")
        if plan.x == LOCAL:
            mu.w_m, mu.t_m = dyn.n_local, mu.buffer
        elif plan.x == SERVER:
            mu.d, mu.t_s = plan.backlog, mu.buffer
        elif plan.x == UAV:
            mu.d, mu.t_v = plan.backlog, mu.buffer
        if plan.x != NO_TASK:
            mu.buffer = 0
        mu.assoc = plan.assoc
        sent = dec.phi * dec.packets
        if sent < 0 or sent > plan.rmax:
            raise ValueError(f"cannot send {sent} packets (capacity {plan.rmax})")
        e_tx = dyn.tx_energy(plan, sent)
        mu.d -= sent
        upload_done = sent > 0 and mu.d == 0
        t_m = mu.t_m
        mu.w_m, e_m, local_done = compute.local_cpu_step(mu.w_m, cfg, dyn.n_local)
        events = []
        if local_done:
            events.append(compute.Completion("local", t_m))
            mu.t_m = 0
        new_vm = False
        if upload_done and plan.dest == uav:
            new_vm = True
        elif upload_done:
            events.append(compute.Completion("server", mu.t_s))
            mu.t_s = 0
        partial.append((e_m + e_tx, sent, events, new_vm))

    had_vm = [mu.w_v > 0 for mu in mus]
    remaining, done, residual, chi = compute.uav_processing_step(
        [mu.w_v for mu in mus], cfg.vm_rate, cfg.vm_interference, cfg.delta)

    outcomes = []
    for i, (mu, dec) in enumerate(zip(mus, decisions)):
        energy, sent, events, new_vm = partial[i]
        mu.w_v = float(remaining[i])
        if done[i]:
            events.append(compute.Completion("uav", mu.t_v, float(residual[i])))
            mu.t_v = 0
        if new_vm:
            mu.w_v = cfg.packets_per_task * cfg.bits_per_packet
        aoi_before = mu.aoi
        u, ell = compute.payoff(aoi_before, energy, dec.payment, cfg.aoi_weight, cfg.energy_weight)
        mu.aoi = compute.aoi_step(aoi_before, events, j, cfg, dyn.n_local)
        mu.last_tau = dec.payment
        if had_vm[i]:
            mu.last_chi = chi
        outcomes.append(Outcome(energy, u, ell, dec.payment, sent, events, aoi_before))
    return outcomes, chi
