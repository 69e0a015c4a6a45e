"""VCG channel auction with interference-constrained winner determination.

Channel reuse rules (per channel): ground-server transmitters at adjacent BSs
may not share it, at most one server transmitter per BS, at most one UAV
transmitter, and server and UAV transmissions never share a channel.  Every
MU gets at most one channel.

Given those rules a winner set is feasible iff

    (#UAV winners) + (multicolouring number of the BS graph under the
    per-BS server-winner counts)  <=  |C|

so winner determination reduces to choosing how many winners to take from
each group (UAV, BS 0, BS 1, ...); within a group the highest bids win.

All welfare values are computed with :func:`math.fsum` over the winners'
valuations, which is exact-rounded and therefore independent of summation
order.  Ties between optimal winner sets go to the lexicographically
smallest sorted tuple of MU ids.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np


class AuctionTooLarge(ValueError):
    """The enumeration oracle refuses instances beyond its size limits."""


@dataclass(frozen=True)
class Bid:
    mu: int
    valuation: float
    n_server: int = 0
    n_uav: int = 0
    bs: int = 0

    def __post_init__(self):
        if self.n_server not in (0, 1) or self.n_uav not in (0, 1):
            raise ValueError("channel demands must be 0 or 1")
        if self.n_server + self.n_uav > 1:
            raise ValueError("a bid demands at most one channel")
        if not self.valuation >= 0.0:
            raise ValueError(f"valuation must be non-negative, got {self.valuation}")

    @property
    def demand(self) -> int:
        return self.n_server + self.n_uav


@dataclass
class AllocationResult:
    winners: frozenset
    channel: dict = field(default_factory=dict)    # mu -> channel index
    payment: dict = field(default_factory=dict)    # mu -> payment (winners only)
    welfare: float = 0.0

    def phi(self, mu: int) -> int:
        return int(mu in self.winners)

    def tau(self, mu: int) -> float:
        return self.payment.get(mu, 0.0)

    @property
    def revenue(self) -> float:
        return math.fsum(self.payment.values())


def _adjacency_key(adjacency) -> tuple:
    adj = np.asarray(adjacency, dtype=bool)
    return tuple(tuple(bool(x) for x in row) for row in adj)


# --------------------------------------------------------------------------
# feasibility


def check_feasible_allocation(assignment: Mapping[int, int | Sequence[int]],
                              bids: Iterable[Bid], adjacency,
                              num_channels: int | None = None) -> bool:
    """Check a channel assignment (``mu -> channel`` or ``mu -> [channels]``)."""
    by_mu = {b.mu: b for b in bids}
    adj = np.asarray(adjacency, dtype=bool)
    server_at: dict[int, list[int]] = {}   # channel -> BSs of server users
    uav_on: dict[int, int] = {}
    for mu, chans in assignment.items():
        chans = [chans] if isinstance(chans, (int, np.integer)) else list(chans)
        if not chans:
            continue
        if len(chans) > 1:
            return False                                  # at most one channel per MU
        bid = by_mu.get(mu)
        if bid is None or bid.demand == 0:
            return False
        c = int(chans[0])
        if c < 0 or (num_channels is not None and c >= num_channels):
            return False
        if bid.n_uav:
            uav_on[c] = uav_on.get(c, 0) + 1
        else:
            server_at.setdefault(c, []).append(bid.bs)
    for c, count in uav_on.items():
        if count > 1 or c in server_at:                   # one UAV user, no server sharing
            return False
    for bss in server_at.values():
        if len(set(bss)) != len(bss):                     # one user per BS per channel
            return False
        for a, b in itertools.combinations(bss, 2):
            if adj[a, b]:                                 # no reuse across adjacent BSs
                return False
    return True


@lru_cache(maxsize=None)
def _maximal_independent_sets(adj_key: tuple, support: tuple) -> tuple:
    nodes = [b for b, s in enumerate(support) if s]
    indep = []
    for r in range(len(nodes), 0, -1):
        for combo in itertools.combinations(nodes, r):
            if any(adj_key[a][b] for a, b in itertools.combinations(combo, 2)):
                continue
            if any(set(combo) < set(other) for other in indep):
                continue
            indep.append(combo)
    return tuple(indep)


@lru_cache(maxsize=None)
def _multicolor(adj_key: tuple, demand: tuple) -> tuple[int, tuple]:
    """Minimum channels giving BS ``b`` ``demand[b]`` channels, adjacent BSs disjoint.

    Returns ``(count, classes)`` where ``classes`` lists the BS set per channel.
    """
    if not any(demand):
        return 0, ()
    best = None
    for iset in _maximal_independent_sets(adj_key, tuple(d > 0 for d in demand)):
        rest = list(demand)
        for b in iset:
            rest[b] -= 1
        n, classes = _multicolor(adj_key, tuple(rest))
        if best is None or n + 1 < best[0]:
            best = (n + 1, (iset,) + classes)
    return best


def channels_needed(n_uav: int, server_counts: Sequence[int], adjacency) -> int:
    return n_uav + _multicolor(_adjacency_key(adjacency), tuple(server_counts))[0]


# --------------------------------------------------------------------------
# exact winner determination


def _groups(bids: Sequence[Bid], num_bs: int):
    """Bidders per group (index 0 = UAV, 1+b = BS b), sorted by valuation desc."""
    groups = [[] for _ in range(num_bs + 1)]
    for bid in bids:
        if bid.demand == 0:
            continue
        g = 0 if bid.n_uav else 1 + bid.bs
        groups[g].append(bid)
    for g in groups:
        g.sort(key=lambda b: (-b.valuation, b.mu))
    return groups


def _best(bids: Sequence[Bid], num_channels: int, adjacency,
          forced_in=frozenset(), forced_out=frozenset()):
    """Maximum welfare over feasible winner sets respecting forced decisions.

    Returns ``(welfare, winners)`` or ``(None, None)`` when infeasible.
    """
    adj_key = _adjacency_key(adjacency)
    num_bs = len(adj_key)
    options = []
    for members in _groups(bids, num_bs):
        fixed = [b for b in members if b.mu in forced_in]
        free = [b for b in members if b.mu not in forced_in and b.mu not in forced_out]
        lo = len(fixed)
        hi = min(len(fixed) + len(free), num_channels)
        if lo > hi:
            return None, None
        options.append([fixed + free[:m - lo] for m in range(lo, hi + 1)])
    best_w, best_set = None, None
    for choice in itertools.product(*options):
        n_uav = len(choice[0])
        counts = tuple(len(c) for c in choice[1:])
        if n_uav + _multicolor(adj_key, counts)[0] > num_channels:
            continue
        w = math.fsum(b.valuation for c in choice for b in c)
        if best_w is None or w > best_w:
            best_w, best_set = w, frozenset(b.mu for c in choice for b in c)
    return best_w, best_set


def _assign_channels(bids: Sequence[Bid], winners: frozenset, adjacency) -> dict:
    adj_key = _adjacency_key(adjacency)
    num_bs = len(adj_key)
    won = sorted((b for b in bids if b.mu in winners), key=lambda b: b.mu)
    channel = {}
    uav = [b.mu for b in won if b.n_uav]
    for c, mu in enumerate(uav):
        channel[mu] = c
    per_bs = [[b.mu for b in won if b.n_server and b.bs == k] for k in range(num_bs)]
    _, classes = _multicolor(adj_key, tuple(len(x) for x in per_bs))
    queues = [list(x) for x in per_bs]
    for offset, iset in enumerate(classes):
        for b in iset:
            channel[queues[b].pop(0)] = len(uav) + offset
    return channel


def determine_winners(bids: Sequence[Bid], num_channels: int, adjacency) -> AllocationResult:
    """Welfare-maximizing feasible winner set (payments left empty).

    Among optimal sets the lexicographically smallest sorted id tuple wins,
    built one id at a time: stop if the current prefix is already optimal,
    otherwise append the smallest id that keeps optimality reachable.
    """
    bids = list(bids)
    if len({b.mu for b in bids}) != len(bids):
        raise ValueError("one bid per MU")
    welfare, _ = _best(bids, num_channels, adjacency)
    rest = sorted(b.mu for b in bids if b.demand)
    chosen, skipped = set(), set()
    while True:
        w, _ = _best(bids, num_channels, adjacency, frozenset(chosen),
                     frozenset(skipped | set(rest)))
        if w is not None and w == welfare:
            break
        for i, mu in enumerate(rest):
            w, _ = _best(bids, num_channels, adjacency, frozenset(chosen | {mu}),
                         frozenset(skipped | set(rest[:i])))
            if w is not None and w == welfare:
                chosen.add(mu)
                skipped |= set(rest[:i])
                rest = rest[i + 1:]
                break
        else:
            raise RuntimeError("winner determination lost the optimum")
    winners = frozenset(chosen)
    return AllocationResult(winners, _assign_channels(bids, winners, adjacency), {},
                            math.fsum(b.valuation for b in bids if b.mu in winners))


def compute_payments(bids: Sequence[Bid], result: AllocationResult, num_channels: int,
                     adjacency) -> dict:
    """Clarke pivot payments: others' best welfare without k minus others' welfare now."""
    bids = list(bids)
    payments = {}
    for k in sorted(result.winners):
        without_k, _ = _best(bids, num_channels, adjacency, forced_out=frozenset({k}))
        others_now = math.fsum(b.valuation for b in bids
                               if b.mu in result.winners and b.mu != k)
        payments[k] = (without_k or 0.0) - others_now
    return payments


def run_auction(bids: Sequence[Bid], num_channels: int, adjacency) -> AllocationResult:
    result = determine_winners(bids, num_channels, adjacency)
    result.payment = compute_payments(bids, result, num_channels, adjacency)
    return result


# --------------------------------------------------------------------------
# brute-force oracle


def _tie_key(winners: frozenset) -> tuple:
    return tuple(sorted(winners))


def oracle_enumerate(bids: Sequence[Bid], num_channels: int, adjacency,
                     max_bidders: int = 8, max_channels: int = 4) -> AllocationResult:
    """Exhaustive search over channel assignments; payments by direct re-solve.

    Channels are interchangeable, so assignments are enumerated up to channel
    relabelling (restricted-growth labelling).  Every assignment is checked
    with :func:`check_feasible_allocation`.
    """
    bids = list(bids)
    if len(bids) > max_bidders or num_channels > max_channels:
        raise AuctionTooLarge(f"oracle limited to {max_bidders} bidders and "
                              f"{max_channels} channels")
    active = sorted(b.mu for b in bids if b.demand)
    value = {b.mu: b.valuation for b in bids}
    feasible: dict[frozenset, dict] = {frozenset(): {}}

    def extend(i: int, assignment: dict, used: int):
        if i == len(active):
            winners = frozenset(assignment)
            if winners not in feasible and check_feasible_allocation(
                    assignment, bids, adjacency, num_channels):
                feasible[winners] = dict(assignment)
            return
        mu = active[i]
        extend(i + 1, assignment, used)
        for c in range(min(used + 1, num_channels)):
            assignment[mu] = c
            extend(i + 1, assignment, max(used, c + 1))
            del assignment[mu]

    extend(0, {}, 0)
    welfare = {s: math.fsum(value[mu] for mu in s) for s in feasible}
    best_w = max(welfare.values())
    winners = min((s for s, w in welfare.items() if w == best_w), key=_tie_key)
    payments = {}
    for k in sorted(winners):
        without_k = max(w for s, w in welfare.items() if k not in s)
        payments[k] = without_k - math.fsum(value[mu] for mu in winners if mu != k)
    return AllocationResult(winners, feasible[winners], payments, best_w)
