import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aoimec.compute import (Completion, aoi_step, completion_aoi, local_cpu_energy,
                            local_cpu_step, local_epochs_required, payoff,
                            uav_processing_step, utility, vm_service_rate)
from aoimec.config import WorldConfig


def test_local_epochs(table2):
    assert local_epochs_required(table2) == 7
    assert local_epochs_required(WorldConfig(cycles_per_bit=1000.0)) == 5
    for theta in (700.0, 1000.0, 1300.0, 1777.0):
        cfg = WorldConfig(cycles_per_bit=theta)
        n = local_epochs_required(cfg)
        work = cfg.packets_per_task * cfg.bits_per_packet * theta
        assert n * cfg.delta * cfg.cpu_freq >= work > (n - 1) * cfg.delta * cfg.cpu_freq


def test_cpu_energy_branches(table2):
    assert local_cpu_step(0, table2, 7) == (0, 0.0, False)
    assert local_cpu_step(5, table2, 7) == (4, 1.0, False)
    assert local_cpu_step(1, table2, 7) == (0, 0.5, True)


def test_local_pipeline_total_energy(table2):
    w, total, done_at = 7, 0.0, None
    for epoch in range(1, 8):
        w, e, done = local_cpu_step(w, table2, 7)
        total += e
        if done:
            done_at = epoch
    assert done_at == 7
    assert total == pytest.approx(1e-27 * 6.5e9 * 1e18, rel=1e-12)


def test_vm_rates():
    assert vm_service_rate(2e7, 0.2, 1) == 2e7
    assert vm_service_rate(2e7, 0.2, 2) == pytest.approx(1.66667e7, rel=1e-5)
    assert vm_service_rate(2e7, 0.2, 3) == pytest.approx(2e7 / 1.44, rel=1e-12)
    for n in range(1, 10):
        ratio = vm_service_rate(2e7, 0.2, n) / vm_service_rate(2e7, 0.2, n + 1)
        assert abs(ratio - 1.2) < 1e-12
    with pytest.raises(ValueError):
        vm_service_rate(2e7, 0.2, 0)


def test_uav_step_examples():
    new, done, residual, chi = uav_processing_step([5e6], 2e7, 0.2, 1.0)
    assert new[0] == 0.0 and done[0] and residual[0] == 0.25 and chi == 2e7
    new, done, residual, chi = uav_processing_step([0.0, 2e7, 2e7], 2e7, 0.2, 1.0)
    assert new[0] == 0.0 and not done[0]
    assert np.allclose(new[1:], 2e7 - 2e7 / 1.2) and not done.any()
    new, done, _, chi = uav_processing_step([0.0, 0.0], 2e7, 0.2, 1.0)
    assert chi == 0.0 and not done.any()


def test_aoi_linear_growth_and_cap(table2):
    assert aoi_step(3.0, [], 10, table2, 7) == 4.0
    a = 0.0
    for j in range(1, 40):
        a = aoi_step(a, [], j, table2, 7)
    assert a == 30.0


def test_aoi_single_completion_examples(table2):
    j = 20
    local = Completion("local", j - 7 + 1)
    assert abs(aoi_step(9.0, [local], j, table2, 7) - 6.5) <= 1e-9
    server = Completion("server", j - 3)
    assert abs(aoi_step(9.0, [server], j, table2, 7) - 4.0) <= 1e-9
    uav = Completion("uav", j - 5, 1e6 / 2e7)
    assert abs(aoi_step(9.0, [uav], j, table2, 7) - 5.05) <= 1e-9


def _hand_aoi(kind, arrival, j, residual=0.05):
    # independent restatement of the three branches under full-size constants
    if kind == "local":
        return (j - arrival - 7 + 1) + 6.5
    if kind == "server":
        return j - arrival + 1.0
    return (j - arrival) + residual


def test_two_completion_truth_table(table2):
    j = 40
    kinds = ("local", "server", "uav")
    for k1, k2 in itertools.combinations(kinds, 2):
        for t1, t2 in itertools.product(range(j - 12, j - 5), repeat=2):
            if t1 == t2:
                continue
            events = [Completion(k1, t1, 0.05 if k1 == "uav" else 0.0),
                      Completion(k2, t2, 0.05 if k2 == "uav" else 0.0)]
            fresher = (k1, t1) if t1 > t2 else (k2, t2)
            want = min(max(_hand_aoi(*fresher, j), 0.0), 30.0)
            assert abs(aoi_step(25.0, events, j, table2, 7) - want) <= 1e-9


def test_inconsistent_events_raise(table2):
    with pytest.raises(RuntimeError):
        aoi_step(1.0, [Completion("server", 3), Completion("server", 4)], 10, table2, 7)
    with pytest.raises(RuntimeError):
        aoi_step(1.0, [Completion("server", 0)], 10, table2, 7)
    with pytest.raises(RuntimeError):
        aoi_step(1.0, [Completion("local", 11)], 10, table2, 7)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 30), st.integers(1, 200), st.integers(0, 60),
       st.sampled_from(["local", "server", "uav", None]))
def test_aoi_stays_in_range(aoi, j, lag, kind):
    cfg = WorldConfig()
    events = [] if kind is None or lag >= j else [Completion(kind, j - lag, 0.3)]
    out = aoi_step(aoi, events, j, cfg, 7)
    assert 0.0 <= out <= cfg.aoi_max
    if not events:
        assert out == min(aoi + 1.0, 30.0)


def test_payoff_examples():
    assert payoff(0.0, 0.0, 0.0, 10, 2) == (12.0, 12.0)
    assert payoff(0.0, 0.0, 2.5, 10, 2) == (12.0, 9.5)
    assert utility(6.5, 1.0, 10, 2) == pytest.approx(10 * math.exp(-6.5) + 2 * math.exp(-1), rel=1e-15)
    assert utility(6.5, 1.0, 10, 2) == pytest.approx(0.7508, abs=1e-4)


def test_completion_kind_checked(table2):
    with pytest.raises(ValueError):
        completion_aoi(Completion("cloud", 1), 3, table2, 7)
