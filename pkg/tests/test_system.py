import math

import pytest

from aoimec.config import WorldConfig
from aoimec.link import LOCAL, NO_TASK, SERVER, UAV
from aoimec.system import Decision, Dynamics, MobileUser, execute_epoch
from aoimec.world import Topology


@pytest.fixture
def dyn():
    cfg = WorldConfig(grid_cells=8, num_mus=2, packets_per_task=4)
    return Dynamics(cfg, Topology(cfg))


def user(dyn, cell=0, **kw):
    kw.setdefault("assoc", dyn.topo.serving_bs(cell))
    return MobileUser(cell=cell, **kw)


def idle(dyn, mu):
    return Decision(dyn.plan(mu, 0, NO_TASK))


def test_server_upload_completes_same_epoch(dyn):
    mu = user(dyn, buffer=5)
    plan = dyn.plan(mu, 0, SERVER)
    assert plan.feasible and not plan.handover and plan.rmax == 4
    outcomes, chi = execute_epoch(dyn, [mu], [Decision(plan, 4, 1, 0.25)], 5)
    assert chi == 0.0 and mu.d == 0 and mu.buffer == 0
    assert mu.aoi == 1.0                       # one epoch after arrival
    out = outcomes[0]
    assert out.sent == 4 and out.payment == 0.25
    assert out.payoff == pytest.approx(out.utility - 0.25)
    assert mu.last_tau == 0.25


def test_lost_channel_keeps_backlog(dyn):
    mu = user(dyn, buffer=5, aoi=3.0)
    outcomes, _ = execute_epoch(dyn, [mu], [Decision(dyn.plan(mu, 0, SERVER), 4, 0)], 5)
    assert mu.d == 4 and mu.t_s == 5 and mu.aoi == 4.0
    assert outcomes[0].energy == 0.0 and outcomes[0].aoi_before == 3.0


def test_shared_vms_slow_down(dyn):
    a = user(dyn, w_v=1e7, t_v=3, assoc=dyn.topo.uav)
    b = user(dyn, cell=9, w_v=1e7, t_v=4, assoc=dyn.topo.uav)
    _, chi = execute_epoch(dyn, [a, b], [idle(dyn, a), idle(dyn, b)], 4)
    assert chi == pytest.approx(2e7 / 1.2, rel=1e-12)
    # both finish: 1e7 bits at chi take 0.6 s
    assert a.w_v == b.w_v == 0.0
    assert a.aoi == pytest.approx(1.0 + 0.6) and b.aoi == pytest.approx(0.6)
    assert a.last_chi == b.last_chi == chi


def test_new_vm_starts_next_epoch(dyn):
    a = user(dyn, buffer=2)
    b = user(dyn, cell=9, w_v=1e8, t_v=1, assoc=dyn.topo.uav, last_chi=5.0)
    plan = dyn.plan(a, 0, UAV)
    assert plan.handover and plan.dest == dyn.topo.uav
    assert plan.rmax >= 1
    r = plan.rmax
    _, chi = execute_epoch(dyn, [a, b], [Decision(plan, r, 1), idle(dyn, b)], 2)
    assert chi == 2e7                           # the fresh upload is not yet running
    assert b.w_v == pytest.approx(1e8 - 2e7)
    if r == 4:
        assert a.w_v == 4 * dyn.cfg.bits_per_packet
    assert a.last_chi == 0.0 and b.last_chi == 2e7


def test_local_task_runs_on_cpu(dyn):
    mu = user(dyn, buffer=1)
    n = dyn.n_local
    for j in range(1, n + 1):
        plan = dyn.plan(mu, 0, LOCAL if j == 1 else NO_TASK)
        outcomes, _ = execute_epoch(dyn, [mu], [Decision(plan)], j)
        assert outcomes[0].energy > 0
    assert mu.w_m == 0 and mu.t_m == 0
    assert 0 < mu.aoi <= n * dyn.cfg.delta


def test_rejects_bad_decisions(dyn):
    mu = user(dyn, buffer=0)
    with pytest.raises(ValueError, match="infeasible"):
        execute_epoch(dyn, [mu], [Decision(dyn.plan(mu, 0, SERVER))], 1)
    mu = user(dyn, buffer=1)
    plan = dyn.plan(mu, 0, SERVER)
    with pytest.raises(ValueError, match="cannot send"):
        execute_epoch(dyn, [mu], [Decision(plan, plan.rmax + 1, 1)], 1)


def test_hypothetical_utility_matches_realised(dyn):
    mu = user(dyn, buffer=3, aoi=2.0)
    plan = dyn.plan(mu, 0, SERVER)
    predicted = dyn.hypothetical_utility(2.0, plan, plan.rmax)
    outcomes, _ = execute_epoch(dyn, [mu], [Decision(plan, plan.rmax, 1)], 3)
    assert outcomes[0].utility == predicted
    assert predicted == pytest.approx(10 * math.exp(-2.0) + 2 * math.exp(-outcomes[0].energy))
