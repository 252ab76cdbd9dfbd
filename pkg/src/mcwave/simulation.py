"""Per-channel broadcast contention and the multi-interval vehicular world.

ContentionArena resolves one channel's broadcast contention inside one time
window: slotted back-off countdown with spatial carrier sensing (hidden
nodes keep counting), freeze-and-resume around sensed bursts, post-burst
DIFS/EIFS spacing, interference-based reception, and optional single-hop
blind flooding.  World strings arenas together across synchronization
intervals: mobility advances once per interval, vehicles re-pick a service
channel, broadcast their status in the first control sub-window, exchange
per-channel averages in the third, and elect relay coordinators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .coordination import (
    Bsm,
    Cfib,
    ClusterView,
    CoordinatorAssignment,
    average_distance_to_sch,
    elect_coordinators,
    set_own_averages,
)
from .engine import Engine, Phase, SyncIntervalConfig, phase_window
from .mac import MODE_EMERGENCY, MODE_STANDARD, MacParams, draw_backoff, frame_airtime
from .mobility import MobilityConfig, MobilityModel, RoadNetwork
from .radio import RadioParams, reception_range, sensing_range

#: channel id of the shared control channel; service channels are 1..Y
CCH = 0


@dataclass(slots=True)
class Frame:
    """One queued transmission attempt of a message copy."""

    msg_id: str
    kind: str                  # "bsm" | "avg" | "emergency"
    origin_id: int
    sender_id: int
    payload_bytes: int
    ready_us: int
    is_rebroadcast: bool = False


@dataclass(slots=True)
class TxRecord:
    sender_id: int
    channel: int
    start_us: int
    end_us: int
    frame: Frame
    concurrent: list["TxRecord"] = field(default_factory=list)
    in_range_count: int = 0
    received_by: list[int] = field(default_factory=list)


@dataclass(slots=True)
class _Node:
    nid: int
    queue: list[Frame] = field(default_factory=list)   # kept sorted by (ready, msg)
    head: Optional[Frame] = None
    remaining: Optional[int] = None
    anchor: Optional[int] = None
    resume_us: int = 0
    busy_until: int = -1
    busy_count: int = 0
    tx_until: int = -1
    tx_intervals: list[tuple[int, int]] = field(default_factory=list)

    def transmitting_during(self, start: int, end: int) -> bool:
        return any(s < end and e > start for s, e in self.tx_intervals)


@dataclass(slots=True)
class ArenaResult:
    channel: int
    window: tuple[int, int]
    transmissions: list[TxRecord]
    first_delivery: dict[tuple[str, int], int]
    reached: dict[str, set[int]]
    prr_samples: list[float]
    ptr: Optional[float]
    successful_senders: set[int]
    pending_senders: set[int]

    def deliveries_of(self, msg_id: str) -> dict[int, int]:
        return {
            receiver: t
            for (mid, receiver), t in self.first_delivery.items()
            if mid == msg_id
        }


def adjacency(
    ids: Sequence[int],
    positions: dict[int, tuple[float, float]],
    radius: float,
) -> dict[int, frozenset[int]]:
    """Symmetric within-radius neighbour sets over a static snapshot."""
    if not ids:
        return {}
    order = sorted(ids)
    coords = np.array([positions[i] for i in order], dtype=float)
    d2 = ((coords[:, None, :] - coords[None, :, :]) ** 2).sum(axis=2)
    within = d2 <= radius * radius
    np.fill_diagonal(within, False)
    return {
        vid: frozenset(order[j] for j in np.nonzero(within[i])[0])
        for i, vid in enumerate(order)
    }


class ContentionArena:
    """Broadcast contention on one channel over one window.

    Timing model: a node with a pending frame anchors its countdown at the
    latest of window start, frame readiness, and its post-burst spacing,
    then transmits after `counter` unhindered slots.  Sensing a burst inside
    the countdown freezes the counter mid-slot; the node resumes one
    inter-frame spacing after the burst ends — DIFS when it sensed a single
    frame, EIFS when frames overlapped.  A frame that cannot finish before
    the window closes is never started (it stays pending).  Broadcast frames
    are never retried.
    """

    def __init__(
        self,
        *,
        channel: int,
        window: tuple[int, int],
        mac: MacParams,
        chain_mode: str,
        positions: dict[int, tuple[float, float]],
        listeners: Iterable[int],
        cs_adj: dict[int, frozenset[int]],
        rx_adj: dict[int, frozenset[int]],
        rng: np.random.Generator,
        flooding: bool = False,
        flood_exclude: Iterable[int] = (),
        engine: Optional[Engine] = None,
    ) -> None:
        self.channel = channel
        self.window_start, self.window_end = window
        if self.window_end < self.window_start:
            raise ValueError("arena window must not be inverted")
        self.mac = mac
        self.chain_mode = chain_mode
        self.positions = positions
        self.listeners = frozenset(listeners)
        self.cs_adj = cs_adj
        self.rx_adj = rx_adj
        self.rng = rng
        self.flooding = flooding
        self.flood_exclude = frozenset(flood_exclude)
        self.engine = engine
        self.sigma = mac.sigma
        self.difs = mac.difs
        self.eifs = int(round(mac.eifs_us))
        self._nodes: dict[int, _Node] = {
            nid: _Node(nid=nid, resume_us=self.window_start)
            for nid in sorted(self.listeners)
        }
        self._order = sorted(self._nodes)
        self._rebroadcast_done: set[tuple[int, str]] = set()
        self._all_tx: list[TxRecord] = []
        self._first_delivery: dict[tuple[str, int], int] = {}

    # -- frame intake -----------------------------------------------------

    def add_frame(self, frame: Frame) -> None:
        if frame.sender_id not in self._nodes:
            raise ValueError(f"sender {frame.sender_id} is not tuned to channel {self.channel}")
        node = self._nodes[frame.sender_id]
        node.queue.append(frame)
        node.queue.sort(key=lambda f: (f.ready_us, f.msg_id))

    def _airtime_us(self, frame: Frame) -> int:
        return max(1, int(round(frame_airtime(self.mac, frame.payload_bytes))))

    def _draw_slots(self) -> int:
        counter = draw_backoff(self.chain_mode, self.mac, self.rng).counter_k
        if self.chain_mode == MODE_EMERGENCY:
            return (counter + 1) // 2
        return counter

    # -- main loop --------------------------------------------------------

    def run(self) -> ArenaResult:
        inf = math.inf
        active: list[TxRecord] = []
        t = self.window_start
        while True:
            fires: dict[int, int] = {}
            next_ready = inf
            for nid in self._order:
                node = self._nodes[nid]
                if node.head is None and node.queue:
                    node.head = node.queue.pop(0)
                    node.remaining = None
                    node.anchor = None
                if node.head is None or node.tx_until > t:
                    continue
                ready_at = max(node.head.ready_us, self.window_start)
                if ready_at > t:
                    next_ready = min(next_ready, ready_at)
                    continue
                if any(rec.sender_id in self.cs_adj[nid] for rec in active):
                    continue  # blocked; re-examined when a burst ends
                if node.remaining is None:
                    node.remaining = self._draw_slots()
                if node.anchor is None:
                    node.anchor = max(t, node.resume_us, ready_at)
                fire = node.anchor + node.remaining * self.sigma
                if fire + self._airtime_us(node.head) > self.window_end:
                    continue  # cannot complete inside the window
                fires[nid] = fire
            next_end = min((rec.end_us for rec in active), default=inf)
            t_next = min(min(fires.values(), default=inf), next_ready, next_end)
            if t_next > self.window_end or t_next == inf:
                break
            t = int(t_next)

            ended = [rec for rec in active if rec.end_us == t]
            if ended:
                active = [rec for rec in active if rec.end_us > t]
                for rec in sorted(ended, key=lambda r: (r.sender_id, r.frame.msg_id)):
                    self._resolve_reception(rec)
                    self._after_own_tx(rec, active, t)
                for nid in self._order:
                    node = self._nodes[nid]
                    if node.tx_until > t or node.busy_until != t:
                        continue
                    spacing = self.difs if node.busy_count == 1 else self.eifs
                    node.resume_us = t + spacing
                    node.anchor = None

            starters = sorted(nid for nid, f in fires.items() if f == t)
            starters = [nid for nid in starters if self._nodes[nid].tx_until <= t]
            if starters:
                self._start_transmissions(starters, active, t)

        pending = {
            nid
            for nid, node in self._nodes.items()
            if (node.head is not None and node.head.ready_us < self.window_end)
            or any(f.ready_us < self.window_end for f in node.queue)
        }
        return self._build_result(pending)

    def _start_transmissions(self, starters: list[int], active: list[TxRecord], t: int) -> None:
        new_recs: list[TxRecord] = []
        for nid in starters:
            node = self._nodes[nid]
            frame = node.head
            end = t + self._airtime_us(frame)
            rec = TxRecord(sender_id=nid, channel=self.channel,
                           start_us=t, end_us=end, frame=frame)
            rec.in_range_count = len(self.rx_adj[nid] & self.listeners)
            new_recs.append(rec)
            node.head = None
            node.remaining = None
            node.anchor = None
            node.tx_until = end
            node.tx_intervals.append((t, end))
            if self.engine is not None:
                self.engine.record(t, "tx_start", nid, self.channel)
                self.engine.record(end, "tx_end", nid, self.channel)
        for rec in new_recs:
            for other in active:
                other.concurrent.append(rec)
                rec.concurrent.append(other)
        for i, first in enumerate(new_recs):
            for second in new_recs[i + 1:]:
                first.concurrent.append(second)
                second.concurrent.append(first)
        active.extend(new_recs)
        self._all_tx.extend(new_recs)

        for nid in self._order:
            node = self._nodes[nid]
            if nid in starters or node.tx_until > t:
                continue
            sensed = [rec for rec in new_recs if rec.sender_id in self.cs_adj[nid]]
            if not sensed:
                continue
            if node.anchor is not None:
                done = (t - node.anchor) // self.sigma
                node.remaining = max(0, node.remaining - done)
                node.anchor = None
            if t <= node.busy_until:
                node.busy_count += len(sensed)
            else:
                node.busy_count = len(sensed)
            node.busy_until = max(node.busy_until, max(rec.end_us for rec in sensed))

    def _after_own_tx(self, rec: TxRecord, active: list[TxRecord], t: int) -> None:
        """Re-seed the sender's sensing state once its own frame ends."""
        node = self._nodes[rec.sender_id]
        ongoing = [a for a in active if a.sender_id in self.cs_adj[node.nid]]
        if ongoing:
            # it missed those frames' headers while transmitting, so the
            # tail it now senses is undecodable
            node.busy_until = max(a.end_us for a in ongoing)
            node.busy_count = 2
        else:
            node.busy_until = t
            node.busy_count = 1

    def _resolve_reception(self, rec: TxRecord) -> None:
        sender = rec.sender_id
        frame = rec.frame
        for receiver in sorted(self.rx_adj[sender] & self.listeners):
            node = self._nodes[receiver]
            if node.transmitting_during(rec.start_us, rec.end_us):
                continue
            garbled = any(
                other.sender_id != sender and other.sender_id in self.cs_adj[receiver]
                for other in rec.concurrent
            )
            if garbled:
                continue
            rec.received_by.append(receiver)
            key = (frame.msg_id, receiver)
            if key not in self._first_delivery:
                self._first_delivery[key] = rec.end_us
                self._maybe_flood(frame, receiver, rec.end_us)

    def _maybe_flood(self, frame: Frame, receiver: int, now: int) -> None:
        if not self.flooding or frame.is_rebroadcast:
            return
        if receiver in self.flood_exclude:
            return
        mark = (receiver, frame.msg_id)
        if mark in self._rebroadcast_done:
            return
        self._rebroadcast_done.add(mark)
        copy = Frame(
            msg_id=frame.msg_id,
            kind=frame.kind,
            origin_id=frame.origin_id,
            sender_id=receiver,
            payload_bytes=frame.payload_bytes,
            ready_us=now,
            is_rebroadcast=True,
        )
        self.add_frame(copy)

    def _build_result(self, pending: set[int]) -> ArenaResult:
        reached: dict[str, set[int]] = {}
        for (msg_id, receiver) in self._first_delivery:
            reached.setdefault(msg_id, set()).add(receiver)
        prr_samples = [
            len(rec.received_by) / rec.in_range_count
            for rec in self._all_tx
            if rec.in_range_count > 0
        ]
        own_senders = {
            nid for nid, node in self._nodes.items()
            if any(not f.is_rebroadcast for f in self._frames_of(node))
        }
        eligible = {
            nid for nid in own_senders if len(self.rx_adj[nid] & self.listeners) > 0
        }
        successful = {
            rec.sender_id
            for rec in self._all_tx
            if not rec.frame.is_rebroadcast and rec.received_by
        }
        ptr = len(successful & eligible) / len(eligible) if eligible else None
        return ArenaResult(
            channel=self.channel,
            window=(self.window_start, self.window_end),
            transmissions=self._all_tx,
            first_delivery=dict(self._first_delivery),
            reached=reached,
            prr_samples=prr_samples,
            ptr=ptr,
            successful_senders=successful & eligible,
            pending_senders=pending,
        )

    def _frames_of(self, node: _Node) -> list[Frame]:
        frames = [rec.frame for rec in self._all_tx if rec.sender_id == node.nid]
        if node.head is not None:
            frames.append(node.head)
        frames.extend(node.queue)
        return frames


# -- the multi-interval world ---------------------------------------------


@dataclass(slots=True)
class ElectionRow:
    si_index: int
    cluster_k: int
    target_z: int
    coordinator_id: int
    lad_m: float
    duplicates_count: int


@dataclass(slots=True)
class SiSnapshot:
    """Everything the dissemination schemes need about one interval."""

    si_index: int
    ids: list[int]
    positions: dict[int, tuple[float, float]]
    sch: dict[int, int]
    cs_adj: dict[int, frozenset[int]]
    rx_adj: dict[int, frozenset[int]]
    assignments: list[CoordinatorAssignment]
    neighbor_counts: dict[int, dict[int, int]]

    def members_of(self, channel: int) -> list[int]:
        return sorted(v for v in self.ids if self.sch[v] == channel)


class World:
    """Drives mobility, per-interval coordination, and the emergency scheme.

    All randomness flows through named streams keyed by (seed, interval,
    channel, purpose) so that identical configurations replay identically
    regardless of host or process.
    """

    MOBILITY_STREAM = 101
    SCH_STREAM = 201
    EMERGENCY_STREAM = 301
    E1_TAG = 1
    E3_TAG = 3
    SCHI_TAG = 5

    def __init__(
        self,
        *,
        net: RoadNetwork,
        si: SyncIntervalConfig,
        mobility: MobilityConfig,
        radio: RadioParams,
        mac: MacParams,
        queue_mu: float,
        y: int,
        seed: int,
        warmup_sis: int = 5,
        measured_sis: int = 20,
        emergency_si_offset: int = 10,
        flooding: bool = False,
        engine: Optional[Engine] = None,
    ) -> None:
        if y < 1 or y > 6:
            raise ValueError("y must lie in [1, 6]")
        self.net = net
        self.si = si
        self.mobility_cfg = mobility
        self.radio = radio
        self.mac = mac
        self.queue_mu = queue_mu
        self.y = y
        self.seed = seed
        self.warmup_sis = warmup_sis
        self.measured_sis = measured_sis
        self.total_sis = warmup_sis + measured_sis
        self.emergency_si = warmup_sis + emergency_si_offset
        if not warmup_sis <= self.emergency_si < self.total_sis:
            raise ValueError("emergency interval must fall inside the measured range")
        self.flooding = flooding
        self.engine = engine if engine is not None else Engine()
        self.rx_range = reception_range(radio)
        self.cs_range = sensing_range(radio)
        self._mobility_rng = np.random.default_rng([seed, self.MOBILITY_STREAM])
        self.model = MobilityModel(net, mobility, self._mobility_rng,
                                   tick_us=si.si_length)

    # -- random streams ----------------------------------------------------

    def stream(self, si_index: int, channel: int, tag: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, si_index, channel, tag])

    def _handoff_us(self, rng: np.random.Generator) -> int:
        return max(0, int(round(rng.exponential(1.0 / self.queue_mu) * 1_000_000)))

    # -- per-interval building blocks ---------------------------------------

    def snapshot(self, si_index: int) -> tuple[list[int], dict[int, tuple[float, float]]]:
        t0 = si_index * self.si.si_length
        self.model.advance_to(t0)
        rows = self.model.positions_at(t0)
        ids = sorted(vid for vid, _ in rows)
        positions = {vid: pos for vid, pos in rows}
        return ids, positions

    def pick_channels(self, si_index: int, ids: Sequence[int]) -> dict[int, int]:
        rng = self.stream(si_index, CCH, self.SCH_STREAM)
        draws = rng.integers(0, self.y, size=len(ids))
        return {vid: 1 + int(d) for vid, d in zip(sorted(ids), draws)}

    def build_arena(
        self,
        *,
        si_index: int,
        phase_tag: int,
        channel: int,
        window: tuple[int, int],
        listeners: Iterable[int],
        positions: dict[int, tuple[float, float]],
        cs_adj: dict[int, frozenset[int]],
        rx_adj: dict[int, frozenset[int]],
        chain_mode: str,
        flooding: bool,
        flood_exclude: Iterable[int] = (),
    ) -> ContentionArena:
        return ContentionArena(
            channel=channel,
            window=window,
            mac=self.mac,
            chain_mode=chain_mode,
            positions=positions,
            listeners=listeners,
            cs_adj=cs_adj,
            rx_adj=rx_adj,
            rng=self.stream(si_index, channel, phase_tag),
            flooding=flooding,
            flood_exclude=flood_exclude,
            engine=self.engine,
        )

    def _broadcast_storm(
        self,
        si_index: int,
        phase: Phase,
        phase_tag: int,
        kind: str,
        ids: Sequence[int],
        positions: dict[int, tuple[float, float]],
        cs_adj: dict[int, frozenset[int]],
        rx_adj: dict[int, frozenset[int]],
        flooding: bool,
        extra_frames: Sequence[Frame] = (),
    ) -> ArenaResult:
        window = phase_window(si_index, phase, self.si)
        arena = self.build_arena(
            si_index=si_index, phase_tag=phase_tag, channel=CCH, window=window,
            listeners=ids, positions=positions, cs_adj=cs_adj, rx_adj=rx_adj,
            chain_mode=MODE_STANDARD, flooding=flooding,
        )
        rng = arena.rng
        senders_with_extra = {f.sender_id for f in extra_frames}
        for frame in extra_frames:
            arena.add_frame(frame)
        for vid in sorted(ids):
            ready = window[0] + self._handoff_us(rng)
            if vid in senders_with_extra:
                ahead = max(f.ready_us for f in extra_frames if f.sender_id == vid)
                ready = max(ready, ahead + 1)
            arena.add_frame(Frame(
                msg_id=f"{kind}-{si_index}-{vid}",
                kind=kind,
                origin_id=vid,
                sender_id=vid,
                payload_bytes=self.mac.payload_s,
                ready_us=ready,
            ))
        return arena.run()

    def run_interval(
        self,
        si_index: int,
        legacy_frames: Sequence[Frame] = (),
    ) -> tuple[SiSnapshot, ArenaResult, ArenaResult, list[ElectionRow]]:
        """One full control-interval cycle: status storm, averages, election."""
        ids, positions = self.snapshot(si_index)
        cs_adj = adjacency(ids, positions, self.cs_range)
        rx_adj = adjacency(ids, positions, self.rx_range)
        sch = self.pick_channels(si_index, ids)
        for vid in ids:
            if vid in self.model.vehicles:
                self.model.vehicles[vid].selected_sch = sch[vid]

        e1_result = self._broadcast_storm(
            si_index, Phase.E1, self.E1_TAG, "bsm", ids, positions,
            cs_adj, rx_adj, self.flooding, extra_frames=legacy_frames,
        )

        # receivers fold heard status broadcasts into per-vehicle tables
        tables: dict[int, dict[int, tuple[tuple[float, float], int]]] = {v: {} for v in ids}
        for msg_id, receivers in e1_result.reached.items():
            if not msg_id.startswith("bsm-"):
                continue
            sender = int(msg_id.rsplit("-", 1)[1])
            for r in receivers:
                tables[r][sender] = (positions[sender], sch[sender])

        # averages toward every foreign channel, from each vehicle's own table
        own_avgs: dict[int, dict[int, Optional[float]]] = {}
        for vid in ids:
            peers = list(tables[vid].values())
            own_avgs[vid] = {
                z: average_distance_to_sch(positions[vid], peers, z)
                for z in range(1, self.y + 1)
                if z != sch[vid]
            }

        e3_result = self._broadcast_storm(
            si_index, Phase.E3, self.E3_TAG, "avg", ids, positions,
            cs_adj, rx_adj, flooding=False,
        )

        cfibs: dict[int, Cfib] = {}
        for vid in ids:
            cfib = Cfib(owner_id=vid, owner_sch=sch[vid])
            for msg_id, receivers in e3_result.reached.items():
                if vid not in receivers:
                    continue
                sender = int(msg_id.rsplit("-", 1)[1])
                avgs = {
                    z: d for z, d in own_avgs[sender].items() if d is not None
                }
                cfib.peer_reports[sender] = (
                    e3_result.first_delivery[(msg_id, vid)], sch[sender], avgs,
                )
            set_own_averages(cfib, own_avgs[vid])
            cfibs[vid] = cfib

        assignments: list[CoordinatorAssignment] = []
        rows: list[ElectionRow] = []
        for k in range(1, self.y + 1):
            members = tuple(v for v in ids if sch[v] == k)
            if not members:
                continue
            view = ClusterView(sch=k, members=members, advertised_y=self.y)
            elected = elect_coordinators(view, cfibs)
            assignments.extend(elected)
            by_target: dict[int, list[CoordinatorAssignment]] = {}
            for a in elected:
                by_target.setdefault(a.to_sch, []).append(a)
            for z in sorted(by_target):
                dups = len(by_target[z]) - 1
                for a in sorted(by_target[z], key=lambda a: a.coordinator):
                    rows.append(ElectionRow(
                        si_index=si_index, cluster_k=k, target_z=z,
                        coordinator_id=a.coordinator, lad_m=a.lad,
                        duplicates_count=dups,
                    ))

        neighbor_counts = {
            vid: self._count_by_channel(tables[vid]) for vid in ids
        }
        snap = SiSnapshot(
            si_index=si_index, ids=ids, positions=positions, sch=sch,
            cs_adj=cs_adj, rx_adj=rx_adj, assignments=assignments,
            neighbor_counts=neighbor_counts,
        )
        return snap, e1_result, e3_result, rows

    @staticmethod
    def _count_by_channel(table: dict[int, tuple[tuple[float, float], int]]) -> dict[int, int]:
        counts: dict[int, int] = {}
        for _, (_pos, z) in sorted(table.items()):
            counts[z] = counts.get(z, 0) + 1
        return counts

    # -- metric helpers ------------------------------------------------------

    @staticmethod
    def reachability_samples(result: ArenaResult, ids: Sequence[int], si_index: int) -> list[float]:
        others = len(ids) - 1
        if others < 1:
            return []
        samples = []
        for vid in sorted(ids):
            msg_id = f"bsm-{si_index}-{vid}"
            samples.append(len(result.reached.get(msg_id, ())) / others)
        return samples
