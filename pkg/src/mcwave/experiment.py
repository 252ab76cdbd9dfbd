"""Runs, sweeps, and the analytic overlay that sits beside every run.

A *run* is one seeded world: warm-up intervals, measured intervals, one
emergency message delivered by the configured scheme.  A *sweep* repeats runs
over a grid (scheme, channel count, flooding, seed) with paired seeds so that
scheme comparisons share their mobility and channel draws.  Every run also
gets a closed-form delay prediction computed from the same parameters, so
simulated and analytic columns line up row by row.
"""

from __future__ import annotations

import dataclasses
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .analytics import (
    SCHEME_LEGACY,
    DelayBreakdown,
    QueueParams,
    SlotProbabilities,
    expected_contention_delay,
    queueing_delay,
    slot_duration,
    slot_probabilities,
    total_dissemination_delay,
    transmission_probability,
)
from .config import FullConfig
from .dissemination import (
    DisseminationReport,
    EmergencyMessage,
    Scenario,
    SchemeConfig,
    run_scheme,
)
from .engine import Engine, Phase, phase_window
from .mac import MODE_STANDARD, MacParams, frame_airtime
from .simulation import (
    CCH,
    ArenaResult,
    ContentionArena,
    ElectionRow,
    Frame,
    SiSnapshot,
    World,
)

# -- analytic overlay --------------------------------------------------------


def saturated_fixed_point(
    w0: int, n: int, tol: float = 1e-12, max_iter: int = 10_000
) -> tuple[float, float]:
    """Self-consistent (tau, p_b) for n always-backlogged stations.

    Each station transmits with tau given the busy probability produced by
    the other n - 1; iterate tau -> p_b = 1 - (1 - tau)^(n-1) -> tau until
    stable.  The map is a contraction for every n >= 1.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    tau = transmission_probability(w0, 0.0, 1.0, 1.0)
    p_b = 0.0
    for _ in range(max_iter):
        p_b_next = 1.0 - (1.0 - tau) ** (n - 1)
        tau_next = transmission_probability(w0, min(p_b_next, 1.0 - 1e-12), 1.0, 1.0)
        if abs(tau_next - tau) < tol and abs(p_b_next - p_b) < tol:
            return tau_next, p_b_next
        tau, p_b = tau_next, p_b_next
    return tau, p_b


def overlay_hop_delay(queue: QueueParams, mac: MacParams, n_total: int) -> DelayBreakdown:
    """Closed-form one-hop delay for a tagged sender among n_total stations.

    The tagged sender's back-off clock ticks through slots occupied by the
    *other* n_total - 1 stations, so a lone sender counts down through empty
    slots only (t_slot = sigma).  Contenders are treated as backlogged for
    the duration of the burst.
    """
    n_env = max(0, n_total - 1)
    if n_env == 0:
        tau = transmission_probability(mac.cw_min, 0.0, 1.0, 1.0)
        probs = SlotProbabilities(p_idle=1.0, p_busy=0.0, p_success=0.0, p_coll=0.0)
    else:
        tau, _p_b = saturated_fixed_point(mac.cw_min, n_total)
        probs = slot_probabilities(tau, n_env)
    e_t = frame_airtime(mac) / 1e6
    durations = slot_duration(
        probs, mac.sigma / 1e6, e_t, mac.difs / 1e6, mac.eifs_us / 1e6
    )
    e_c = expected_contention_delay(mac.cw_min, durations.t_slot)
    e_q = queueing_delay(queue.lambda_, queue.mu, queue.b_capacity)
    return DelayBreakdown(
        e_q=e_q, e_c=e_c, e_t=e_t, e_d=e_q + e_c + e_t,
        t_slot=durations.t_slot, t_success=durations.t_success,
        t_coll=durations.t_coll, p_idle=probs.p_idle, p_busy=probs.p_busy,
        p_success=probs.p_success, p_coll=probs.p_coll, tau=tau,
    )


@dataclass(slots=True)
class AnalyticRow:
    """Closed-form prediction matched to one simulated run."""

    seed: int
    scheme: str
    y: int
    n_contenders: int         # stations the delivery hop contends with (itself included)
    e_q_us: float
    e_c_us: float
    e_t_us: float
    e_d_us: float
    t_slot_us: float
    tau: float
    t_d_us: float             # full-protocol total over all advertised channels
    t_d_matched_us: float     # total re-evaluated at the run's achieved relay depth


def analytic_row(
    cfg: FullConfig,
    report: DisseminationReport,
    mean_cs_degree: float,
) -> AnalyticRow:
    """Closed-form twin of one run.

    The emergency hop on a service channel contends only with its own
    relayers (the service window carries no other traffic), so the hop model
    uses a lone sender there; the legacy broadcast instead fights the full
    control-window status storm, whose contender count is the sensing
    neighbourhood observed in the run.  ``t_d_matched_us`` re-evaluates the
    scheme total at the relay depth the run actually realized, which is what
    the measured total (last *delivered* channel) corresponds to.
    """
    y = cfg.scheme.advertised_y
    scheme = cfg.scheme.scheme
    if scheme == SCHEME_LEGACY:
        n = max(1, round(1.0 + mean_cs_degree))
    else:
        n = 1
    hop = overlay_hop_delay(cfg.queue, cfg.mac, n)
    residual = None
    guard = None
    if scheme == SCHEME_LEGACY:
        residual = (report.residual_wait_us or 0) / 1e6
        guard = cfg.si.guard / 1e6
    t_sw = cfg.scheme.switching_delay_us / 1e6
    t_d = total_dissemination_delay(
        scheme, y, hop.e_d, t_sw, residual_wait=residual, guard=guard,
    )
    depth = report.relay_depth if report.relay_depth else y
    t_d_matched = total_dissemination_delay(
        scheme, depth, hop.e_d, t_sw, residual_wait=residual, guard=guard,
    )
    return AnalyticRow(
        seed=cfg.experiment.seed, scheme=scheme, y=y, n_contenders=n,
        e_q_us=hop.e_q * 1e6, e_c_us=hop.e_c * 1e6, e_t_us=hop.e_t * 1e6,
        e_d_us=hop.e_d * 1e6, t_slot_us=hop.t_slot * 1e6, tau=hop.tau,
        t_d_us=t_d * 1e6, t_d_matched_us=t_d_matched * 1e6,
    )


def analytic_preview(cfg: FullConfig) -> list[AnalyticRow]:
    """Closed-form rows for all three schemes without running a simulation.

    The legacy scheme's wait uses the mean residual service-window time
    (half the window), and its contender count comes from the density-range
    coupling (vehicles inside one carrier-sense neighbourhood), since no
    measured run exists here.
    """
    from .analytics import SCHEMES
    from .radio import carrier_sense_range, vehicles_in_cs_range

    y = cfg.scheme.advertised_y
    b = vehicles_in_cs_range(cfg.traffic, carrier_sense_range(cfg.radio))
    rows = []
    for scheme in SCHEMES:
        n = max(1, round(b)) if scheme == SCHEME_LEGACY else 1
        hop = overlay_hop_delay(cfg.queue, cfg.mac, n)
        residual = cfg.si.schi / 2 / 1e6 if scheme == SCHEME_LEGACY else None
        guard = cfg.si.guard / 1e6 if scheme == SCHEME_LEGACY else None
        t_d = total_dissemination_delay(
            scheme, y, hop.e_d, cfg.scheme.switching_delay_us / 1e6,
            residual_wait=residual, guard=guard,
        )
        rows.append(AnalyticRow(
            seed=cfg.experiment.seed, scheme=scheme, y=y, n_contenders=n,
            e_q_us=hop.e_q * 1e6, e_c_us=hop.e_c * 1e6, e_t_us=hop.e_t * 1e6,
            e_d_us=hop.e_d * 1e6, t_slot_us=hop.t_slot * 1e6, tau=hop.tau,
            t_d_us=t_d * 1e6, t_d_matched_us=t_d * 1e6,
        ))
    return rows


# -- metric helpers ----------------------------------------------------------


def compute_prr(results: Iterable[ArenaResult]) -> Optional[float]:
    """Mean packet reception ratio over every transmission with an audience."""
    samples = [s for r in results for s in r.prr_samples]
    return sum(samples) / len(samples) if samples else None


def compute_ptr(results: Iterable[ArenaResult]) -> Optional[float]:
    """Mean packet transmission ratio over windows that had eligible senders."""
    values = [r.ptr for r in results if r.ptr is not None]
    return sum(values) / len(values) if values else None


def reachability_cdf(samples: Sequence[float], grid: Sequence[float]) -> list[float]:
    """Empirical P(sample <= g) evaluated on a grid."""
    ordered = sorted(samples)
    n = len(ordered)
    if n == 0:
        raise ValueError("reachability_cdf needs at least one sample")
    return [bisect_right(ordered, g) / n for g in grid]


# -- run artifacts -----------------------------------------------------------


@dataclass(slots=True)
class MetricsRow:
    seed: int
    sweep_point: str
    scheme: str
    y: int
    flooding: str
    total_delay_us: Optional[int]
    switch_count: int
    prr: Optional[float]
    ptr: Optional[float]
    residual_wait_us: Optional[int]
    unreached_channels: int
    per_channel_delays: dict[int, float]      # channel -> mean delivery delay, us
    reachability_samples: list[float]


@dataclass(slots=True)
class MetricsTable:
    rows: list[MetricsRow] = field(default_factory=list)

    HEADER = (
        "seed,sweep_point,scheme,y,flooding,total_delay_us,switch_count,"
        "prr,ptr,residual_wait_us,unreached_channels,per_channel_delays,"
        "reachability_samples"
    )

    def to_csv(self) -> str:
        lines = [self.HEADER]
        for r in self.rows:
            per_channel = ";".join(
                f"{ch}:{_fmt(delay)}" for ch, delay in sorted(r.per_channel_delays.items())
            )
            reach = "|".join(_fmt(s) for s in r.reachability_samples)
            lines.append(",".join([
                str(r.seed), r.sweep_point, r.scheme, str(r.y), r.flooding,
                _fmt(r.total_delay_us), str(r.switch_count), _fmt(r.prr),
                _fmt(r.ptr), _fmt(r.residual_wait_us),
                str(r.unreached_channels), per_channel, reach,
            ]))
        return "\n".join(lines) + "\n"


@dataclass(slots=True)
class RunResult:
    config: FullConfig
    report: DisseminationReport
    metrics: MetricsRow
    analytic: AnalyticRow
    election_rows: list[ElectionRow]
    e1_results: dict[int, ArenaResult]
    emergency: EmergencyMessage
    n_vehicles_at_emergency: int
    trace_rows: list[tuple[int, str, int, int]]


def _fmt(value: Union[int, float, None]) -> str:
    """Fixed-width cell formatting so emitted files are byte-stable."""
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return np.format_float_positional(
        float(value), precision=6, unique=False, trim="k"
    )


def emit_csv(path: Union[str, Path], text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="\n") as fh:
        fh.write(text)
    return path


def elections_csv(rows: Iterable[ElectionRow]) -> str:
    lines = ["si_index,cluster_k,target_z,coordinator_id,lad_m,duplicates_count"]
    for r in rows:
        lines.append(",".join([
            str(r.si_index), str(r.cluster_k), str(r.target_z),
            str(r.coordinator_id), _fmt(r.lad_m), str(r.duplicates_count),
        ]))
    return "\n".join(lines) + "\n"


def analytical_csv(rows: Iterable[AnalyticRow]) -> str:
    lines = [
        "seed,scheme,y,n_contenders,e_q_us,e_c_us,e_t_us,e_d_us,"
        "t_slot_us,tau,t_d_us,t_d_matched_us"
    ]
    for r in rows:
        lines.append(",".join([
            str(r.seed), r.scheme, str(r.y), str(r.n_contenders),
            _fmt(r.e_q_us), _fmt(r.e_c_us), _fmt(r.e_t_us), _fmt(r.e_d_us),
            _fmt(r.t_slot_us), _fmt(r.tau), _fmt(r.t_d_us), _fmt(r.t_d_matched_us),
        ]))
    return "\n".join(lines) + "\n"


def trace_csv(rows: Iterable[tuple[int, str, int, int]]) -> str:
    lines = ["time_us,kind,vehicle_id,channel"]
    for t, kind, vid, channel in rows:
        lines.append(f"{t},{kind},{vid},{channel}")
    return "\n".join(lines) + "\n"


# -- single run --------------------------------------------------------------


def draw_emergency(world: World, snap: SiSnapshot, cfg: FullConfig) -> EmergencyMessage:
    """Pick the origin and invocation instant inside the service window.

    The draw leaves a configurable completion reserve before the window's
    end so a late invocation still fits one scheme execution.
    """
    rng = world.stream(snap.si_index, CCH, World.EMERGENCY_STREAM)
    origin = snap.ids[int(rng.integers(len(snap.ids)))]
    start, end = phase_window(snap.si_index, Phase.SCHI, world.si)
    span = max(1, (end - start) - cfg.experiment.invocation_reserve_us)
    invocation = start + int(rng.integers(span))
    return EmergencyMessage(
        origin_id=origin,
        invocation_time_us=invocation,
        origin_sch=snap.sch[origin],
        payload_size=cfg.mac.payload_s,
        msg_id=f"em-{cfg.experiment.seed}-{snap.si_index}",
    )


def build_world(cfg: FullConfig, engine: Optional[Engine] = None) -> World:
    return World(
        net=cfg.network,
        si=cfg.si,
        mobility=cfg.mobility,
        radio=cfg.radio,
        mac=cfg.mac,
        queue_mu=cfg.queue.mu,
        y=cfg.scheme.advertised_y,
        seed=cfg.experiment.seed,
        warmup_sis=cfg.experiment.warmup_sis,
        measured_sis=cfg.experiment.measured_sis,
        emergency_si_offset=cfg.experiment.emergency_si_offset,
        flooding=cfg.scheme.flooding == "shbf",
        engine=engine,
    )


def run_experiment(cfg: FullConfig, sweep_point: str = "") -> RunResult:
    """One seeded world end to end; returns every per-run artifact."""
    engine = Engine(trace=cfg.experiment.trace)
    world = build_world(cfg, engine)
    cached: dict[int, tuple] = {}

    def advance(si_index: int, frames: Sequence[Frame]) -> tuple[SiSnapshot, ArenaResult]:
        out = world.run_interval(si_index, legacy_frames=frames)
        cached[si_index] = out
        return out[0], out[1]

    scenario_queue = cfg.queue
    e1_results: dict[int, ArenaResult] = {}
    election_rows: list[ElectionRow] = []
    reach_samples: list[float] = []
    report: Optional[DisseminationReport] = None
    emergency: Optional[EmergencyMessage] = None
    n_at_emergency = 0
    mean_cs_degree = 0.0

    for si in range(world.total_sis):
        if si in cached:
            snap, e1, _e3, rows = cached.pop(si)
        else:
            snap, e1, _e3, rows = world.run_interval(si)
        if si >= world.warmup_sis:
            e1_results[si] = e1
            election_rows.extend(rows)
            reach_samples.extend(World.reachability_samples(e1, snap.ids, si))
        if si == world.emergency_si:
            emergency = draw_emergency(world, snap, cfg)
            n_at_emergency = len(snap.ids)
            mean_cs_degree = sum(
                len(snap.cs_adj[v]) for v in snap.ids
            ) / max(1, len(snap.ids))
            scenario = Scenario(
                world=world, snap=snap, queue=scenario_queue, advance=advance,
            )
            report = run_scheme(cfg.scheme, scenario, emergency)

    assert report is not None and emergency is not None
    measured = list(e1_results.values())
    per_channel_means = {
        ch: sum(delays) / len(delays)
        for ch, delays in report.per_channel_delays_us().items()
    }
    metrics = MetricsRow(
        seed=cfg.experiment.seed,
        sweep_point=sweep_point,
        scheme=cfg.scheme.scheme,
        y=cfg.scheme.advertised_y,
        flooding=cfg.scheme.flooding,
        total_delay_us=report.total_delay_us,
        switch_count=report.switch_count,
        prr=report.prr,
        ptr=compute_ptr(measured),
        residual_wait_us=report.residual_wait_us,
        unreached_channels=len(report.unreached_channels),
        per_channel_delays=per_channel_means,
        reachability_samples=reach_samples,
    )
    return RunResult(
        config=cfg,
        report=report,
        metrics=metrics,
        analytic=analytic_row(cfg, report, mean_cs_degree),
        election_rows=election_rows,
        e1_results=e1_results,
        emergency=emergency,
        n_vehicles_at_emergency=n_at_emergency,
        trace_rows=list(engine.sorted_trace()) if cfg.experiment.trace else [],
    )


# -- sweeps ------------------------------------------------------------------


@dataclass(slots=True)
class SweepResult:
    table: MetricsTable
    analytic_rows: list[AnalyticRow]
    runs: list[RunResult]
    failures: list[tuple[str, str]]       # (sweep point label, error)


def run_sweep(
    base: FullConfig,
    *,
    seeds: Sequence[int],
    schemes: Optional[Sequence[str]] = None,
    ys: Optional[Sequence[int]] = None,
    floodings: Optional[Sequence[str]] = None,
    keep_runs: bool = False,
) -> SweepResult:
    """Grid of runs over (y, scheme, flooding, seed), rows in grid order.

    Seeds are paired across grid cells: the same seed reproduces the same
    mobility and channel draws in every cell, so per-seed differences
    between schemes isolate the scheme itself.
    """
    schemes = list(schemes or [base.scheme.scheme])
    ys = list(ys or [base.scheme.advertised_y])
    floodings = list(floodings or [base.scheme.flooding])
    table = MetricsTable()
    analytic_rows: list[AnalyticRow] = []
    runs: list[RunResult] = []
    failures: list[tuple[str, str]] = []
    for y in ys:
        for scheme in schemes:
            for flooding in floodings:
                for seed in seeds:
                    label = f"y={y}/scheme={scheme}/flooding={flooding}"
                    cfg = dataclasses.replace(
                        base,
                        scheme=dataclasses.replace(
                            base.scheme, scheme=scheme, flooding=flooding,
                            advertised_y=y,
                        ),
                        experiment=dataclasses.replace(base.experiment, seed=seed),
                    )
                    try:
                        result = run_experiment(cfg, sweep_point=label)
                    except Exception as exc:  # noqa: BLE001 - sweep isolates failures
                        failures.append((f"{label}/seed={seed}", str(exc)))
                        continue
                    table.rows.append(result.metrics)
                    analytic_rows.append(result.analytic)
                    if keep_runs:
                        runs.append(result)
    return SweepResult(
        table=table, analytic_rows=analytic_rows, runs=runs, failures=failures,
    )


# -- broadcast-interval sizing experiment -------------------------------------


@dataclass(slots=True)
class IntervalPoint:
    window_us: int
    window_over_v: float
    ptr: float
    prr: float
    attempted: int
    succeeded: int


def analytic_broadcast_interval(mac: MacParams, n: int) -> float:
    """Interval length V = n * t_slot that lets n stations each win a slot.

    t_slot uses the design-time channel mix: every station backlogged with
    the nominal transmit probability 2 / (cw_min + 1) on an otherwise quiet
    channel (no external busy source).
    """
    tau = transmission_probability(mac.cw_min, 0.0, 1.0, 1.0)
    probs = slot_probabilities(tau, n)
    durations = slot_duration(
        probs, float(mac.sigma), frame_airtime(mac), float(mac.difs),
        float(mac.eifs_us),
    )
    return n * durations.t_slot


def interval_ptr_experiment(
    mac: MacParams,
    queue: QueueParams,
    n_nodes: int,
    window_us: int,
    seeds: Sequence[int],
    v_us: Optional[float] = None,
) -> IntervalPoint:
    """Pooled transmission ratio for n mutually-sensing stations in one window.

    Every station holds exactly one frame at the window's start; the ratio
    counts stations whose frame aired and was decoded by someone before the
    window closed.
    """
    ids = list(range(n_nodes))
    positions = {i: (float(i), 0.0) for i in ids}
    everyone = {i: frozenset(j for j in ids if j != i) for i in ids}
    attempted = 0
    succeeded = 0
    prr_samples: list[float] = []
    for seed in seeds:
        arena = ContentionArena(
            channel=CCH,
            window=(0, window_us),
            mac=mac,
            chain_mode=MODE_STANDARD,
            positions=positions,
            listeners=ids,
            cs_adj=everyone,
            rx_adj=everyone,
            rng=np.random.default_rng([seed, 0, CCH, 9]),
            flooding=False,
            flood_exclude=(),
            engine=Engine(),
        )
        for i in ids:
            handoff = max(0, int(round(arena.rng.exponential(1.0 / queue.mu) * 1e6)))
            arena.add_frame(Frame(
                msg_id=f"m-{i}", kind="bsm", origin_id=i, sender_id=i,
                payload_bytes=mac.payload_s, ready_us=handoff,
            ))
        result = arena.run()
        attempted += len(ids)
        succeeded += len(result.successful_senders)
        prr_samples.extend(result.prr_samples)
    v = v_us if v_us is not None else analytic_broadcast_interval(mac, n_nodes)
    return IntervalPoint(
        window_us=window_us,
        window_over_v=window_us / v,
        ptr=succeeded / attempted,
        prr=sum(prr_samples) / len(prr_samples) if prr_samples else 0.0,
        attempted=attempted,
        succeeded=succeeded,
    )


def interval_sweep(
    mac: MacParams,
    queue: QueueParams,
    n_nodes: int,
    multiples: Sequence[float],
    seeds: Sequence[int],
    v_us: Optional[float] = None,
) -> list[IntervalPoint]:
    v = v_us if v_us is not None else analytic_broadcast_interval(mac, n_nodes)
    return [
        interval_ptr_experiment(mac, queue, n_nodes, int(round(m * v)), seeds, v_us=v)
        for m in multiples
    ]
