"""Status-exchange bookkeeping and distributed coordinator self-election."""

from __future__ import annotations

import copy

import numpy as np
import pytest

from mcwave.coordination import (
    Bsm,
    Cfib,
    ClusterView,
    average_distance_to_sch,
    duplicates_by_target,
    elect_coordinators,
    set_own_averages,
    update_cfib,
)

from helpers import complete_cfibs, elect_all_clusters, random_channel_scenario
from oracles import oracle_elect


def test_average_distance_requires_an_audience():
    peers = [((3.0, 4.0), 2), ((0.0, 8.0), 2), ((1.0, 1.0), 3)]
    assert average_distance_to_sch((0.0, 0.0), peers, 2) == pytest.approx((5.0 + 8.0) / 2)
    assert average_distance_to_sch((0.0, 0.0), peers, 5) is None


def test_update_requires_an_averages_broadcast():
    cfib = Cfib(owner_id=1, owner_sch=1)
    bare = Bsm(sender_id=2, position=(0.0, 0.0), selected_sch=2, timestamp_us=0)
    with pytest.raises(ValueError, match="avg_distances"):
        update_cfib(cfib, bare)


def test_update_is_idempotent_and_freshest_wins():
    cfib = Cfib(owner_id=1, owner_sch=1)
    set_own_averages(cfib, {2: 40.0})
    early = Bsm(sender_id=2, position=(0.0, 0.0), selected_sch=1,
                timestamp_us=10, avg_distances={2: 50.0})
    update_cfib(cfib, early)
    once = copy.deepcopy(cfib)
    update_cfib(cfib, early)  # replaying the same broadcast changes nothing
    assert cfib == once
    late = Bsm(sender_id=2, position=(0.0, 0.0), selected_sch=1,
               timestamp_us=20, avg_distances={2: 30.0})
    update_cfib(cfib, late)
    assert cfib.entries[2].peer_avgs[2] == 30.0
    update_cfib(cfib, early)  # stale rebroadcast must not roll the table back
    assert cfib.entries[2].peer_avgs[2] == 30.0


def test_own_channel_never_enters_the_table():
    cfib = Cfib(owner_id=7, owner_sch=2)
    set_own_averages(cfib, {1: 12.0, 2: 99.0, 3: 15.0})
    assert 2 not in cfib.entries
    assert cfib.entries[1].own_avg == 12.0


def test_rank_one_goes_to_the_smallest_average():
    # two cluster-1 vehicles compete to reach channel 2
    a = Cfib(owner_id=1, owner_sch=1)
    b = Cfib(owner_id=2, owner_sch=1)
    set_own_averages(a, {2: 10.0})
    set_own_averages(b, {2: 20.0})
    update_cfib(a, Bsm(2, (0.0, 0.0), 1, 0, {2: 20.0}))
    update_cfib(b, Bsm(1, (0.0, 0.0), 1, 0, {2: 10.0}))
    assert a.entries[2].fitness == 1
    assert b.entries[2].fitness == 2
    view = ClusterView(sch=1, members=(1, 2), advertised_y=2)
    winners = elect_coordinators(view, {1: a, 2: b})
    assert [(w.coordinator, w.to_sch) for w in winners] == [(1, 2)]


def test_equal_averages_tie_break_on_the_lower_id():
    a = Cfib(owner_id=4, owner_sch=1)
    b = Cfib(owner_id=9, owner_sch=1)
    set_own_averages(a, {2: 25.0})
    set_own_averages(b, {2: 25.0})
    update_cfib(a, Bsm(9, (0.0, 0.0), 1, 0, {2: 25.0}))
    update_cfib(b, Bsm(4, (0.0, 0.0), 1, 0, {2: 25.0}))
    winners = elect_coordinators(ClusterView(1, (4, 9), 2), {4: a, 9: b})
    assert [(w.coordinator, w.to_sch) for w in winners] == [(4, 2)]


def test_lost_broadcasts_can_produce_duplicate_self_elections():
    # vehicle 2 never hears vehicle 1, so both believe they rank first
    a = Cfib(owner_id=1, owner_sch=1)
    b = Cfib(owner_id=2, owner_sch=1)
    set_own_averages(a, {2: 10.0})
    set_own_averages(b, {2: 20.0})
    update_cfib(a, Bsm(2, (0.0, 0.0), 1, 0, {2: 20.0}))
    winners = elect_coordinators(ClusterView(1, (1, 2), 2), {1: a, 2: b})
    assert sorted(w.coordinator for w in winners) == [1, 2]
    assert duplicates_by_target(winners) == {(1, 2): 1}


def test_foreign_cluster_reports_do_not_affect_the_rank():
    a = Cfib(owner_id=1, owner_sch=1)
    set_own_averages(a, {2: 50.0})
    # a cluster-3 vehicle is closer to channel 2, but competes elsewhere
    update_cfib(a, Bsm(6, (0.0, 0.0), 3, 0, {2: 5.0}))
    assert a.entries[2].fitness == 1


def test_cluster_view_validates_channel_count():
    with pytest.raises(ValueError, match="advertised_y"):
        ClusterView(sch=1, members=(1,), advertised_y=0)
    with pytest.raises(ValueError, match="advertised_y"):
        ClusterView(sch=1, members=(1,), advertised_y=7)


def test_lossless_exchange_elects_the_exhaustive_minimizer():
    rng = np.random.default_rng(42)
    for _ in range(10):
        positions, selected = random_channel_scenario(rng, n_vehicles=12, y=3)
        winners = elect_all_clusters(positions, selected, 3)
        for k in range(1, 4):
            for z in range(1, 4):
                if k == z:
                    continue
                best = oracle_elect(positions, selected, k, z)
                got = winners.get((k, z))
                if best is None:
                    assert got is None
                else:
                    assert got is not None and len(got) == 1
                    vid, avg = got[0]
                    assert vid == best[0]
                    assert avg == pytest.approx(best[1])


def test_complete_tables_agree_across_the_cluster():
    rng = np.random.default_rng(7)
    positions, selected = random_channel_scenario(rng, n_vehicles=8, y=3)
    cfibs = complete_cfibs(positions, selected, 3)
    members = [v for v, sch in selected.items() if sch == 1]
    for z in (2, 3):
        views = {
            frozenset({**cfibs[m].entries[z].peer_avgs,
                       m: cfibs[m].entries[z].own_avg}.items())
            for m in members
            if cfibs[m].entries.get(z) and cfibs[m].entries[z].own_avg is not None
        }
        assert len(views) <= 1  # everyone reconstructs the same average table
