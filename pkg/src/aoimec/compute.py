"""Local CPU, UAV virtual machines, AoI evolution and the per-epoch payoff."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .config import WorldConfig


def task_cycles(cfg: WorldConfig) -> float:
    return cfg.packets_per_task * cfg.bits_per_packet * cfg.cycles_per_bit


def local_epochs_required(cfg: WorldConfig) -> int:
    """Epochs the local CPU needs for one task, ceil(D*mu*theta / (delta*f))."""
    work = Fraction(cfg.packets_per_task) * Fraction(cfg.bits_per_packet) * Fraction(cfg.cycles_per_bit)
    per_epoch = Fraction(cfg.delta) * Fraction(cfg.cpu_freq)
    return math.ceil(work / per_epoch)


def local_cpu_energy(w_m: int, cfg: WorldConfig, n_epochs: int) -> float:
    if w_m <= 0:
        return 0.0
    f = cfg.cpu_freq
    if w_m == 1:
        return cfg.capacitance * (task_cycles(cfg) - (n_epochs - 1) * cfg.delta * f) * f * f
    return cfg.capacitance * cfg.delta * f * f * f


def local_cpu_step(w_m: int, cfg: WorldConfig, n_epochs: int) -> tuple[int, float, bool]:
    """Advance the local CPU by one epoch.

    Returns ``(remaining epochs, energy in J, task completed this epoch)``.
    """
    if not 0 <= w_m <= n_epochs:
        raise ValueError(f"local CPU state {w_m} outside [0, {n_epochs}]")
    energy = local_cpu_energy(w_m, cfg, n_epochs)
    if w_m == 0:
        return 0, energy, False
    return w_m - 1, energy, w_m == 1


def vm_service_rate(chi0: float, interference: float, n_vms: int) -> float:
    """Per-VM rate when ``n_vms`` VMs share the UAV."""
    if n_vms < 1:
        raise ValueError("service rate is only defined for at least one active VM")
    return chi0 * (1.0 + interference) ** (1 - n_vms)


def uav_processing_step(remaining: np.ndarray, chi0: float, interference: float,
                        delta: float):
    """One epoch of parallel VM execution at the UAV.

    ``remaining`` holds the bits left per MU at the start of the epoch (0 for
    MUs without a VM).  Returns ``(new remaining, completed mask, residual
    seconds of completed tasks, service rate or 0.0 if idle)``.
    """
    remaining = np.asarray(remaining, dtype=float)
    active = remaining > 0
    n = int(active.sum())
    if n == 0:
        return remaining.copy(), np.zeros_like(active), np.zeros_like(remaining), 0.0
    chi = vm_service_rate(chi0, interference, n)
    served = chi * delta
    done = active & (remaining <= served)
    residual = np.where(done, remaining / chi, 0.0)
    new = np.where(active, np.maximum(remaining - served, 0.0), remaining)
    return new, done, residual, chi


@dataclass(frozen=True)
class Completion:
    """A computation outcome delivered to the MU during the epoch."""

    kind: str          # "local", "server" or "uav"
    arrival: int       # arrival epoch index of the finished task
    residual: float = 0.0   # UAV only: seconds of the epoch used to finish


def completion_aoi(event: Completion, j: int, cfg: WorldConfig, n_epochs: int) -> float:
    d = cfg.delta
    if event.kind == "local":
        return (j - event.arrival - n_epochs + 1) * d + task_cycles(cfg) / cfg.cpu_freq
    if event.kind == "server":
        return (j - event.arrival + 1) * d
    if event.kind == "uav":
        return (j - event.arrival) * d + event.residual
    raise ValueError(f"unknown completion kind {event.kind!r}")


def aoi_step(aoi: float, events, j: int, cfg: WorldConfig, n_epochs: int) -> float:
    """AoI at the start of epoch ``j + 1``.

    Without outcomes the age grows by one epoch.  Otherwise the outcome of
    the freshest task (largest arrival index) sets the new age.  The result is
    clamped to ``[0, aoi_max]``.
    """
    events = list(events)
    kinds = [e.kind for e in events]
    if len(set(kinds)) != len(kinds) or len(events) > 3:
        raise RuntimeError(f"inconsistent completion events {kinds}")
    if not events:
        return min(aoi + cfg.delta, cfg.aoi_max)
    for e in events:
        if e.arrival < 1 or e.arrival > j:
            raise RuntimeError(f"completion {e} has no matching task in the pipeline")
    freshest = max(events, key=lambda e: e.arrival)
    return min(max(completion_aoi(freshest, j, cfg, n_epochs), 0.0), cfg.aoi_max)


def utility(aoi: float, energy: float, aoi_weight: float, energy_weight: float) -> float:
    return aoi_weight * math.exp(-aoi) + energy_weight * math.exp(-energy)


def payoff(aoi: float, energy: float, payment: float, aoi_weight: float,
           energy_weight: float) -> tuple[float, float]:
    """Return ``(utility, payoff)`` where payoff = utility - payment."""
    u = utility(aoi, energy, aoi_weight, energy_weight)
    return u, u - payment
