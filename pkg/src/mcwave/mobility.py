"""Manhattan-grid vehicle mobility.

Vehicles travel along the streets of a rectangular grid at constant
per-vehicle speed, turning probabilistically at intersections and always
turning at the grid boundary so they never leave the network.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Optional

import numpy as np

HEADINGS = ("N", "S", "E", "W")
_VECTOR = {"N": (0.0, 1.0), "S": (0.0, -1.0), "E": (1.0, 0.0), "W": (-1.0, 0.0)}
_LEFT = {"N": "W", "W": "S", "S": "E", "E": "N"}
_RIGHT = {"N": "E", "E": "S", "S": "W", "W": "N"}

_SNAP = 1e-9  # numeric slack when matching a coordinate to a street


@dataclass(frozen=True, slots=True)
class RoadNetwork:
    """Fully connected rectangular street grid, one lane per street."""

    width: float
    height: float
    horizontal_streets: int
    vertical_streets: int
    lane_per_street: int = 1

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError("network.width and network.height must be positive")
        if self.horizontal_streets < 2 or self.vertical_streets < 2:
            raise ValueError(
                "network.horizontal_streets and network.vertical_streets must each be >= 2; "
                "a single street per axis has no intersections to turn at"
            )

    @property
    def xs(self) -> tuple[float, ...]:
        """x coordinates of the vertical streets."""
        spacing = self.width / (self.vertical_streets - 1)
        return tuple(i * spacing for i in range(self.vertical_streets))

    @property
    def ys(self) -> tuple[float, ...]:
        """y coordinates of the horizontal streets."""
        spacing = self.height / (self.horizontal_streets - 1)
        return tuple(i * spacing for i in range(self.horizontal_streets))

    @property
    def intersection_count(self) -> int:
        return self.horizontal_streets * self.vertical_streets

    @property
    def total_length(self) -> float:
        return self.horizontal_streets * self.width + self.vertical_streets * self.height

    def on_network(self, x: float, y: float, tol: float = 1e-6) -> bool:
        if not (-tol <= x <= self.width + tol and -tol <= y <= self.height + tol):
            return False
        on_vertical = any(abs(x - sx) <= tol for sx in self.xs)
        on_horizontal = any(abs(y - sy) <= tol for sy in self.ys)
        return on_vertical or on_horizontal


def build_manhattan_grid(
    width: float,
    height: float,
    horizontal_streets: int = 2,
    vertical_streets: int = 2,
) -> RoadNetwork:
    """Construct a grid network; rejects degenerate single-street layouts."""
    return RoadNetwork(
        width=width, height=height,
        horizontal_streets=horizontal_streets, vertical_streets=vertical_streets,
    )


@dataclass(frozen=True, slots=True)
class MobilityConfig:
    mean_speed: float = 40.0 / 3.6  # m/s; urban cruising speed
    turn_probability: float = 0.5
    vehicle_count: int = 50
    spawn_process: float = 25.0  # Poisson arrival rate, vehicles/s

    def __post_init__(self) -> None:
        if self.mean_speed <= 0:
            raise ValueError("mobility.mean_speed must be positive")
        if not 0.0 <= self.turn_probability <= 1.0:
            raise ValueError("mobility.turn_probability must lie in [0, 1]")
        if self.vehicle_count < 0:
            raise ValueError("mobility.vehicle_count must be non-negative")
        if self.spawn_process < 0:
            raise ValueError("mobility.spawn_process must be non-negative")


@dataclass(slots=True)
class VehicleState:
    id: int
    x: float
    y: float
    heading: str
    speed: float
    selected_sch: Optional[int] = None
    spawn_time: int = 0

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


def _is_street_x(net: RoadNetwork, x: float) -> bool:
    return any(abs(x - sx) <= _SNAP for sx in net.xs)


def _is_street_y(net: RoadNetwork, y: float) -> bool:
    return any(abs(y - sy) <= _SNAP for sy in net.ys)


def _heading_stays_on_network(net: RoadNetwork, x: float, y: float, heading: str) -> bool:
    """True when a move in `heading` from (x, y) remains on some street."""
    dx, dy = _VECTOR[heading]
    if dy != 0.0:  # needs a vertical street through x, with room in that direction
        if not _is_street_x(net, x):
            return False
        return (y < net.height - _SNAP) if dy > 0 else (y > _SNAP)
    if not _is_street_y(net, y):
        return False
    return (x < net.width - _SNAP) if dx > 0 else (x > _SNAP)


def _next_boundary_distance(net: RoadNetwork, x: float, y: float, heading: str) -> float:
    """Distance along `heading` to the next intersection or grid edge."""
    if heading == "E":
        candidates = [sx - x for sx in net.xs if sx > x + _SNAP]
    elif heading == "W":
        candidates = [x - sx for sx in net.xs if sx < x - _SNAP]
    elif heading == "N":
        candidates = [sy - y for sy in net.ys if sy > y + _SNAP]
    else:
        candidates = [y - sy for sy in net.ys if sy < y - _SNAP]
    return min(candidates) if candidates else math.inf


def _snap_to_grid(net: RoadNetwork, x: float, y: float) -> tuple[float, float]:
    for sx in net.xs:
        if abs(x - sx) <= _SNAP:
            x = sx
            break
    for sy in net.ys:
        if abs(y - sy) <= _SNAP:
            y = sy
            break
    return x, y


def step(
    v: VehicleState,
    dt: float,
    net: RoadNetwork,
    cfg: MobilityConfig,
    rng: np.random.Generator,
    decision_log: Optional[list[bool]] = None,
) -> VehicleState:
    """Advance one vehicle by dt seconds; returns a new state.

    At interior intersections the vehicle turns with probability
    cfg.turn_probability (left/right equiprobable among directions that stay
    on the network); where continuing straight would leave the grid, the turn
    is forced.  `decision_log` records free (unforced) choices as booleans.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x, y, heading = v.x, v.y, v.heading
    remaining = v.speed * dt
    while remaining > _SNAP:
        boundary = _next_boundary_distance(net, x, y, heading)
        if math.isinf(boundary):  # at the grid edge facing outward: reroute in place
            heading = _choose_heading(net, x, y, heading, cfg, rng, decision_log)
            continue
        if boundary > remaining:
            dx, dy = _VECTOR[heading]
            x += dx * remaining
            y += dy * remaining
            remaining = 0.0
            break
        dx, dy = _VECTOR[heading]
        x += dx * boundary
        y += dy * boundary
        x, y = _snap_to_grid(net, x, y)
        remaining -= boundary
        heading = _choose_heading(net, x, y, heading, cfg, rng, decision_log)
    return replace(v, x=x, y=y, heading=heading)


def _choose_heading(
    net: RoadNetwork,
    x: float,
    y: float,
    heading: str,
    cfg: MobilityConfig,
    rng: np.random.Generator,
    decision_log: Optional[list[bool]],
) -> str:
    straight_ok = _heading_stays_on_network(net, x, y, heading)
    turns = [h for h in (_LEFT[heading], _RIGHT[heading])
             if _heading_stays_on_network(net, x, y, h)]
    if straight_ok and not turns:
        return heading
    if not straight_ok:
        if turns:  # forced boundary turn, not a free decision
            return turns[0] if len(turns) == 1 else turns[int(rng.integers(0, 2))]
        return {"N": "S", "S": "N", "E": "W", "W": "E"}[heading]  # dead end: reverse
    turn = rng.random() < cfg.turn_probability
    if decision_log is not None:
        decision_log.append(turn)
    if not turn:
        return heading
    return turns[0] if len(turns) == 1 else turns[int(rng.integers(0, 2))]


def spawn_vehicle(
    vid: int,
    spawn_time: int,
    net: RoadNetwork,
    cfg: MobilityConfig,
    rng: np.random.Generator,
) -> VehicleState:
    """New vehicle at a uniformly random on-network point.

    The point is uniform over total street length; the heading runs along the
    chosen street (direction equiprobable); the speed is a constant drawn
    uniformly from [0.9, 1.1] * mean_speed.
    """
    h_total = net.horizontal_streets * net.width
    v_total = net.vertical_streets * net.height
    speed = cfg.mean_speed * rng.uniform(0.9, 1.1)
    if rng.random() < h_total / (h_total + v_total):
        y = net.ys[int(rng.integers(0, net.horizontal_streets))]
        x = rng.uniform(0.0, net.width)
        heading = "E" if rng.random() < 0.5 else "W"
    else:
        x = net.xs[int(rng.integers(0, net.vertical_streets))]
        y = rng.uniform(0.0, net.height)
        heading = "N" if rng.random() < 0.5 else "S"
    return VehicleState(id=vid, x=x, y=y, heading=heading, speed=speed, spawn_time=spawn_time)


class MobilityModel:
    """Poisson-spawned vehicle population advanced on a fixed tick.

    Positions update every tick_us microseconds (default 100 ms).  Snapshots
    are cached per tick so `positions_at` replays deterministically.
    """

    def __init__(
        self,
        net: RoadNetwork,
        cfg: MobilityConfig,
        rng: np.random.Generator,
        tick_us: int = 100_000,
    ) -> None:
        self.net = net
        self.cfg = cfg
        self.rng = rng
        self.tick_us = tick_us
        self.vehicles: dict[int, VehicleState] = {}
        self._tick = 0
        self._next_vid = 0
        self._next_spawn_us = self._draw_spawn_gap(0)
        self._snapshots: dict[int, list[tuple[int, tuple[float, float]]]] = {0: []}
        self._spawn_all_at_zero = cfg.spawn_process == 0
        if self._spawn_all_at_zero:
            for _ in range(cfg.vehicle_count):
                self._spawn(0)
            self._snapshots[0] = self._snapshot()

    def _draw_spawn_gap(self, t_us: int) -> int:
        if self.cfg.spawn_process == 0:
            return 0
        gap_s = self.rng.exponential(1.0 / self.cfg.spawn_process)
        return t_us + max(1, int(round(gap_s * 1_000_000)))

    def _spawn(self, t_us: int) -> None:
        v = spawn_vehicle(self._next_vid, t_us, self.net, self.cfg, self.rng)
        self.vehicles[v.id] = v
        self._next_vid += 1

    def _snapshot(self) -> list[tuple[int, tuple[float, float]]]:
        return [(vid, (v.x, v.y)) for vid, v in sorted(self.vehicles.items())]

    def advance_to(self, t_us: int) -> None:
        """Process ticks (movement) and spawn arrivals up to time t_us."""
        while (self._tick + 1) * self.tick_us <= t_us:
            self._tick += 1
            now = self._tick * self.tick_us
            if not self._spawn_all_at_zero:
                while self._next_spawn_us <= now and self._next_vid < self.cfg.vehicle_count:
                    self._spawn(self._next_spawn_us)
                    self._next_spawn_us = self._draw_spawn_gap(self._next_spawn_us)
            dt = self.tick_us / 1_000_000
            self.vehicles = {
                vid: step(v, dt, self.net, self.cfg, self.rng)
                for vid, v in sorted(self.vehicles.items())
            }
            self._snapshots[self._tick] = self._snapshot()

    def positions_at(self, t_us: int) -> list[tuple[int, tuple[float, float]]]:
        """Snapshot of all spawned vehicles' positions at the tick covering t_us."""
        tick = t_us // self.tick_us
        if tick > self._tick:
            raise ValueError(f"time {t_us} is beyond the simulated horizon")
        return list(self._snapshots[min(tick, self._tick)])


def export_trace(model_positions: Iterable[tuple[float, int, float, float]]) -> str:
    """Serialize (time_s, id, x, y) rows as plain text."""
    lines = [f"{t:.6f} {vid} {x:.6f} {y:.6f}" for t, vid, x, y in model_positions]
    return "\n".join(lines) + ("\n" if lines else "")


def import_trace(text: str) -> list[tuple[float, int, float, float]]:
    """Parse plain-text (time_s, id, x, y) rows."""
    rows = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"trace line {line_no}: expected 'time_s id x y', got {line!r}")
        t, vid, x, y = float(parts[0]), int(parts[1]), float(parts[2]), float(parts[3])
        rows.append((t, vid, x, y))
    return rows
