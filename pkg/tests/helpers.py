"""Shared scenario builders for the test suite.

These helpers construct the lossless-exchange coordination state used by
both the unit tests and the acceptance suite: every vehicle hears every
other vehicle's broadcasts, so all fitness tables are complete and
identical in content.
"""

from __future__ import annotations

import numpy as np

from mcwave.coordination import (
    Bsm,
    Cfib,
    ClusterView,
    average_distance_to_sch,
    elect_coordinators,
    set_own_averages,
    update_cfib,
)


def random_channel_scenario(
    rng: np.random.Generator,
    n_vehicles: int = 20,
    y: int = 3,
    extent: float = 1500.0,
) -> tuple[dict[int, tuple[float, float]], dict[int, int]]:
    """Random positions in a square and uniform channel choices over 1..y."""
    positions = {
        v: (float(rng.uniform(0.0, extent)), float(rng.uniform(0.0, extent)))
        for v in range(n_vehicles)
    }
    selected = {v: int(rng.integers(1, y + 1)) for v in range(n_vehicles)}
    return positions, selected


def own_average_tables(
    positions: dict[int, tuple[float, float]],
    selected: dict[int, int],
    y: int,
) -> dict[int, dict[int, float | None]]:
    """Each vehicle's mean distance to every other channel's members."""
    tables: dict[int, dict[int, float | None]] = {}
    for v, pos in positions.items():
        peers = [(positions[u], selected[u]) for u in positions if u != v]
        tables[v] = {
            z: average_distance_to_sch(pos, peers, z)
            for z in range(1, y + 1)
            if z != selected[v]
        }
    return tables


def complete_cfibs(
    positions: dict[int, tuple[float, float]],
    selected: dict[int, int],
    y: int,
) -> dict[int, Cfib]:
    """Every vehicle's fitness table after a lossless status exchange."""
    own = own_average_tables(positions, selected, y)
    cfibs: dict[int, Cfib] = {}
    for v in positions:
        cfib = Cfib(owner_id=v, owner_sch=selected[v])
        set_own_averages(cfib, own[v])
        for u in positions:
            if u == v:
                continue
            reported = {z: a for z, a in own[u].items() if a is not None}
            update_cfib(
                cfib,
                Bsm(
                    sender_id=u,
                    position=positions[u],
                    selected_sch=selected[u],
                    timestamp_us=0,
                    avg_distances=reported,
                ),
            )
        cfibs[v] = cfib
    return cfibs


def elect_all_clusters(
    positions: dict[int, tuple[float, float]],
    selected: dict[int, int],
    y: int,
) -> dict[tuple[int, int], list[tuple[int, float]]]:
    """Run the self-election of every cluster; map (cluster, target) to winners."""
    cfibs = complete_cfibs(positions, selected, y)
    winners: dict[tuple[int, int], list[tuple[int, float]]] = {}
    for k in range(1, y + 1):
        members = tuple(sorted(v for v, sch in selected.items() if sch == k))
        if not members:
            continue
        view = ClusterView(sch=k, members=members, advertised_y=y)
        for a in elect_coordinators(view, cfibs):
            winners.setdefault((a.from_sch, a.to_sch), []).append((a.coordinator, a.lad))
    return winners
