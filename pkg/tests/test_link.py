import math

import pytest
from hypothesis import given, settings, strategies as st

from aoimec.config import DEFAULT_NOISE_DENSITY as N0
from aoimec.link import (LOCAL, NO_TASK, SERVER, UAV, max_packets, transmission_time,
                         tx_energy, update_association)

B = 4          # BSs 0..3, UAV index 4


def test_association_examples():
    assert update_association(B, 1, NO_TASK, B) == B      # stays on the UAV
    assert update_association(1, 2, NO_TASK, B) == 2      # follows coverage (handover)
    assert update_association(0, 0, UAV, B) == B          # scheduling to the UAV retargets
    assert update_association(B, 3, SERVER, B) == 3
    assert update_association(2, 2, LOCAL, B) == 2


def test_transmission_time():
    assert transmission_time(1.0, 0.01, False) == 1.0
    assert transmission_time(1.0, 0.01, True) == 0.99
    assert transmission_time(1.0, 0.0, True) == 1.0


def test_max_packets_example():
    # (1e6 / 5e5) * log2(1 + 3e-10 / 3.98e-12) = 12.51..., capped by the backlog
    assert max_packets(1e-10, 1.0, 1e6, N0, 3.0, 5e5, 10) == 10
    assert max_packets(1e-10, 1.0, 1e6, N0, 3.0, 5e5, 20) == 12
    assert max_packets(0.0, 1.0, 1e6, N0, 3.0, 5e5, 10) == 0
    assert max_packets(1e-30, 1.0, 1e6, N0, 3.0, 5e5, 10) == 0


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-14, 1e-7), st.sampled_from([1.0, 0.99]), st.integers(1, 30))
def test_max_packets_is_power_limited(gain, dt, backlog):
    r = max_packets(gain, dt, 1e6, N0, 3.0, 5e5, backlog)
    budget = 3.0 * dt
    assert 0 <= r <= backlog
    assert tx_energy(gain, dt, 1e6, N0, r, 5e5) <= budget + 1e-12
    if r < backlog:
        # brute force: the next packet would break the power limit
        assert tx_energy(gain, dt, 1e6, N0, r + 1, 5e5) > budget


def test_tx_energy_examples():
    assert tx_energy(1e-10, 1.0, 1e6, N0, 0, 5e5) == 0.0
    assert tx_energy(1e-10, 1.0, 1e6, N0, 2, 5e5) == pytest.approx(0.0398107, rel=1e-4)


def test_tx_energy_increasing_and_convex():
    e = [tx_energy(1e-10, 0.99, 1e6, N0, r, 5e5) for r in range(11)]
    assert e[0] == 0.0
    steps = [b - a for a, b in zip(e, e[1:])]
    assert all(s > 0 for s in steps)
    assert all(b > a for a, b in zip(steps, steps[1:]))
    for r in range(1, 6):
        assert e[2 * r] > 2 * e[r]
