"""Fixed comparison policies.

* ``local``: run every task on the MU's CPU; never bids.
* ``server`` / ``uav``: always offload to the edge server / the UAV and try
  to push the largest possible number of packets each epoch.
* ``greedy``: on arrival use whichever processor is free, preferring the
  better of the two radio links for remote execution (ties go to the ground
  server).

Valuations are the utility the MU would obtain this epoch if it won a
channel and sent ``R_max'`` packets.
"""
from __future__ import annotations

from .agent import Action, LocalState
from .auction import Bid
from .link import LOCAL, NO_TASK, SERVER, UAV
from .system import Dynamics, Plan

SCHEMES = ("local", "server", "uav", "greedy")


def _offload(plans: list[Plan], x: int) -> int:
    return x if plans[x].feasible else NO_TASK


def baseline_action(scheme: str, s: LocalState, plans: list[Plan]) -> Action:
    if scheme == "local":
        return Action(0, _offload(plans, LOCAL), 0)
    if scheme == "server":
        x = _offload(plans, SERVER)
    elif scheme == "uav":
        x = _offload(plans, UAV)
    elif scheme == "greedy":
        x = NO_TASK
        if s.has_task:
            remote = UAV if plans[UAV].gain > plans[SERVER].gain else SERVER
            if plans[remote].feasible:
                x = remote
            elif plans[LOCAL].feasible:
                x = LOCAL
    else:
        raise ValueError(f"unknown baseline scheme {scheme!r}")
    plan = plans[x]
    if plan.dest is not None and plan.rmax > 0:
        return Action(1, x, plan.rmax)
    return Action(0, x, 0)


def baseline_valuation(s: LocalState, plan: Plan, dyn: Dynamics) -> float | None:
    """Hypothetical-win utility with ``R_max'`` packets; ``None`` if nothing can be sent."""
    if plan.dest is None or plan.rmax < 1:
        return None
    return max(dyn.hypothetical_utility(s.aoi, plan, plan.rmax), 0.0)


def baseline_bid(mu: int, s: LocalState, action: Action, plan: Plan,
                 dyn: Dynamics) -> Bid | None:
    if action.z == 0:
        return None
    nu = baseline_valuation(s, plan, dyn)
    if nu is None:
        return None
    if plan.dest == dyn.topo.uav:
        return Bid(mu, nu, n_uav=1)
    return Bid(mu, nu, n_server=1, bs=plan.dest)
