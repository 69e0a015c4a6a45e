import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aoimec.auction import (AuctionTooLarge, Bid, channels_needed, check_feasible_allocation,
                            compute_payments, determine_winners, oracle_enumerate, run_auction)

LINE = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=bool)   # BS0 - BS1 - BS2


def random_instance(rng, max_bidders=6, max_channels=4, max_bs=4):
    B = int(rng.integers(1, max_bs + 1))
    adj = np.zeros((B, B), dtype=bool)
    for a in range(B):
        for b in range(a + 1, B):
            if rng.random() < 0.5:
                adj[a, b] = adj[b, a] = True
    bids = []
    for k in range(int(rng.integers(0, max_bidders + 1))):
        v = float(rng.integers(0, 4)) if rng.random() < 0.5 else float(rng.uniform(0, 10))
        kind = int(rng.integers(3))
        bids.append(Bid(k, v, n_server=int(kind == 0), n_uav=int(kind == 1),
                        bs=int(rng.integers(B))))
    return bids, int(rng.integers(1, max_channels + 1)), adj


def test_feasibility_rules():
    bids = [Bid(0, 1, n_server=1, bs=0), Bid(1, 1, n_server=1, bs=1),
            Bid(2, 1, n_server=1, bs=2), Bid(3, 1, n_uav=1), Bid(4, 1, n_uav=1),
            Bid(5, 1, n_server=1, bs=0)]
    assert check_feasible_allocation({}, bids, LINE)
    assert not check_feasible_allocation({0: 0, 1: 0}, bids, LINE)       # adjacent BSs
    assert check_feasible_allocation({0: 0, 2: 0}, bids, LINE)           # spatial reuse
    assert not check_feasible_allocation({0: 0, 3: 0}, bids, LINE)       # server + UAV
    assert not check_feasible_allocation({0: 0, 5: 0}, bids, LINE)       # same BS
    assert not check_feasible_allocation({3: 1, 4: 1}, bids, LINE)       # two UAV users
    assert not check_feasible_allocation({0: [0, 1]}, bids, LINE)        # two channels
    assert not check_feasible_allocation({0: 2}, bids, LINE, num_channels=2)


def test_winner_examples():
    assert determine_winners([Bid(0, 5, n_server=1, bs=0)], 1, LINE).winners == {0}
    two = [Bid(0, 5, n_server=1, bs=0), Bid(1, 3, n_server=1, bs=2)]
    res = run_auction(two, 1, LINE)
    assert res.winners == {0, 1} and res.channel == {0: 0, 1: 0}
    uav = [Bid(0, 5, n_uav=1), Bid(1, 3, n_uav=1)]
    assert determine_winners(uav, 1, LINE).winners == {0}


def test_payment_examples():
    assert run_auction([Bid(0, 5, n_server=1, bs=1)], 1, LINE).payment == {0: 0.0}
    same = [Bid(0, 5, n_server=1, bs=1), Bid(1, 3, n_server=1, bs=1)]
    res = run_auction(same, 1, LINE)
    assert res.winners == {0} and res.payment == {0: 3.0}
    apart = [Bid(0, 5, n_server=1, bs=0), Bid(1, 3, n_server=1, bs=2)]
    assert run_auction(apart, 2, LINE).payment == {0: 0.0, 1: 0.0}


def test_ties_pick_smallest_id_tuple():
    bids = [Bid(0, 2, n_uav=1), Bid(1, 2, n_uav=1), Bid(2, 0.0, n_server=1, bs=0)]
    res = run_auction(bids, 1, LINE)
    assert res.winners == {0}
    # a zero bid never displaces anyone and is left out of a tie
    res = run_auction([Bid(0, 4, n_server=1, bs=0), Bid(1, 0.0, n_server=1, bs=2)], 1, LINE)
    assert res.winners == {0}


def test_zero_demand_never_wins():
    res = run_auction([Bid(0, 9.0), Bid(1, 1.0, n_uav=1)], 1, LINE)
    assert res.winners == {1}


def test_multicolouring():
    assert channels_needed(0, (1, 1, 1), LINE) == 2
    assert channels_needed(1, (2, 0, 2), LINE) == 3
    triangle = ~np.eye(3, dtype=bool)
    assert channels_needed(0, (1, 1, 1), triangle) == 3


def test_bid_validation():
    with pytest.raises(ValueError):
        Bid(0, 1.0, n_server=1, n_uav=1)
    with pytest.raises(ValueError):
        Bid(0, -1.0, n_uav=1)
    with pytest.raises(ValueError):
        determine_winners([Bid(0, 1.0, n_uav=1), Bid(0, 2.0, n_uav=1)], 1, LINE)


def test_oracle_refuses_large_instances():
    bids = [Bid(k, 1.0, n_uav=1) for k in range(9)]
    with pytest.raises(AuctionTooLarge):
        oracle_enumerate(bids, 2, LINE)
    with pytest.raises(AuctionTooLarge):
        oracle_enumerate(bids[:2], 5, LINE)


def test_matches_oracle_on_small_random_instances():
    rng = np.random.default_rng(99)
    for _ in range(200):
        bids, C, adj = random_instance(rng)
        ours, ref = run_auction(bids, C, adj), oracle_enumerate(bids, C, adj)
        assert ours.welfare == ref.welfare
        assert ours.winners == ref.winners
        assert ours.payment == ref.payment
        assert check_feasible_allocation(ours.channel, bids, adj, C)


def test_single_bidder_equals_oracle():
    for bid in (Bid(0, 3.0, n_uav=1), Bid(0, 0.0, n_server=1, bs=2), Bid(0, 1.0)):
        assert run_auction([bid], 1, LINE).winners == oracle_enumerate([bid], 1, LINE).winners


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**31))
def test_individual_rationality_and_nonnegative_payments(seed):
    bids, C, adj = random_instance(np.random.default_rng(seed))
    res = run_auction(bids, C, adj)
    by_mu = {b.mu: b for b in bids}
    for mu, tau in res.payment.items():
        assert tau >= 0.0
        assert by_mu[mu].valuation >= tau
    assert set(res.payment) == set(res.winners)
    assert res.revenue == pytest.approx(sum(res.payment.values()))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.floats(0, 20))
def test_raising_a_bid_never_loses_the_channel(seed, bump):
    bids, C, adj = random_instance(np.random.default_rng(seed))
    if not bids:
        return
    k = bids[0]
    base = run_auction(bids, C, adj).phi(k.mu)
    raised = [Bid(k.mu, k.valuation + bump, k.n_server, k.n_uav, k.bs)] + bids[1:]
    assert run_auction(raised, C, adj).phi(k.mu) >= base
