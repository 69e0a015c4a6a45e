"""Association/handover, effective transmission time, per-epoch packet
capacity and uplink energy."""
from __future__ import annotations

import math

NO_TASK, LOCAL, SERVER, UAV = 0, 1, 2, 3


def update_association(prev: int, serving_bs: int, offload: int, uav: int) -> int:
    """Association for the current epoch.

    ``prev`` is last epoch's association, ``serving_bs`` the BS covering the
    MU's current cell and ``uav`` the UAV's association index (``B``).
    Scheduling a task to the server (2) or the UAV (3) retargets the
    association; otherwise a UAV association is kept and a BS association
    follows the MU's coverage area.
    """
    if offload == SERVER:
        return serving_bs
    if offload == UAV:
        return uav
    return uav if prev == uav else serving_bs


def transmission_time(delta: float, handover_delay: float, handover: bool) -> float:
    return delta - handover_delay if handover else delta


def max_packets(gain: float, dt: float, bandwidth: float, noise_density: float,
                p_max: float, bits_per_packet: float, backlog: int) -> int:
    """Largest packet count deliverable in ``dt`` seconds at transmit power <= ``p_max``."""
    if gain <= 0.0 or backlog <= 0:
        return 0
    snr = p_max * gain / (bandwidth * noise_density)
    r = int(math.floor(bandwidth * dt / bits_per_packet * math.log2(1.0 + snr)))
    r = max(min(r, backlog), 0)
    # guard the floor against round-off at the power limit
    while r > 0 and tx_energy(gain, dt, bandwidth, noise_density, r,
                              bits_per_packet) > p_max * dt * (1.0 + 1e-12):
        r -= 1
    return r


def tx_energy(gain: float, dt: float, bandwidth: float, noise_density: float,
              packets: int, bits_per_packet: float) -> float:
    """Energy in Joules to push ``packets`` packets through the link in ``dt`` seconds."""
    if packets <= 0:
        return 0.0
    return (dt * bandwidth * noise_density / gain) * (
        2.0 ** (bits_per_packet * packets / (bandwidth * dt)) - 1.0)
