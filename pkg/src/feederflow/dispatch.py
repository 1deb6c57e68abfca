"""Spatial charging/discharging dispatch that delivers a requested total power.

The active pass works station by station from the feeder end toward the
bank: each station absorbs the loads strictly beyond it plus any residual
forwarded from the previous station, clamps to its derated bounds and
forwards the excess; a refinement pass then walks back from the
bank-nearest station until the requested total is met exactly.  The
reactive pass assigns each station the value that locally cancels the
voltage-gradient jump of the loads beyond it, clamped to the power-factor
cone of its active set point.

Residual forwarding is logged as HandOff events so a plan can be audited:
every forwarded amount reappears as part of some station's seed or is
explicitly dropped at the bank.

The ``literal`` reactive mode runs the plain per-load update loop,
including its overwrite of the running value; ``principle`` mode
instead accumulates the running sum of (G*P + B*Q) over everything beyond
the current point and drives it toward zero, which differs once caps stop
binding.  Active dispatch is identical in both modes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .grid import EFFECTIVE_BOUND_FACTOR, PF_FLOOR, GridTree

__all__ = [
    "StationState",
    "LoadPoint",
    "HandOff",
    "StationDispatch",
    "DispatchPlan",
    "station_q_cap",
    "active_dispatch",
    "reactive_dispatch",
    "synthesize",
    "synthesize_tree",
    "uniform_baseline",
    "audit_trace",
]


def station_q_cap(p_pu: float) -> float:
    """Reactive limit so that power factor stays >= 0.9 at active power p."""
    pe = p_pu / PF_FLOOR
    return math.sqrt(pe * pe - p_pu * p_pu)


@dataclass(frozen=True)
class StationState:
    """Charging station with raw bounds and grid-code derated bounds."""

    station_id: str
    xi_km: float
    p_min_raw: float
    p_max_raw: float

    @property
    def p_min_eff(self) -> float:
        return EFFECTIVE_BOUND_FACTOR * self.p_min_raw

    @property
    def p_max_eff(self) -> float:
        return EFFECTIVE_BOUND_FACTOR * self.p_max_raw


@dataclass(frozen=True)
class LoadPoint:
    load_id: str
    xi_km: float
    p_pu: float
    q_pu: float = 0.0


@dataclass(frozen=True)
class HandOff:
    """One forwarded residual: from `source`'s clamp to `target`'s seed.

    target None means the residual ran out of bank-side stations and was
    dropped at the bank.
    """

    quantity: str          # "P" | "Q"
    amount: float
    source: str
    target: str | None


@dataclass(frozen=True)
class StationDispatch:
    station_id: str
    xi_km: float
    p_pu: float
    q_pu: float
    p_min_eff: float
    p_max_eff: float
    q_cap: float


@dataclass(frozen=True)
class DispatchPlan:
    """Synthesis result, stations ordered bank-nearest first.

    seeds_p / seeds_q record each station's pass-1 seed (incoming residuals
    summed in trace order) for auditing; leftover_p is whatever part of the
    request the refinement pass could not place.
    """

    stations: tuple[StationDispatch, ...]
    p_ref: float
    leftover_p: float
    trace: tuple[HandOff, ...] = ()
    seeds_p: tuple[tuple[str, float], ...] = ()
    seeds_q: tuple[tuple[str, float], ...] = ()

    def total_p(self) -> float:
        return math.fsum(st.p_pu for st in self.stations)

    def as_power_map(self) -> dict[str, tuple[float, float]]:
        return {st.station_id: (st.p_pu, st.q_pu) for st in self.stations}


# ---------------------------------------------------------------------------
# single-feeder passes (stations and loads listed from the feeder end toward
# the bank; the order of arithmetic is load-bearing, tests pin it bit for bit)
# ---------------------------------------------------------------------------

def active_dispatch(stations, loads, p_ref: float):
    """Two-pass active dispatch. Returns (p far-to-near, leftover, trace, seeds)."""
    ns = len(stations)
    p = [0.0] * ns
    seeds = [0.0] * ns
    trace: list[HandOff] = []
    i = 0
    j = 0
    residual = 0.0
    src = ""
    while i < ns:
        st = stations[i]
        if residual != 0.0:
            p[i] = residual
            trace.append(HandOff("P", residual, src, st.station_id))
            residual = 0.0
        else:
            p[i] = 0.0
        seeds[i] = p[i]
        p_max = st.p_max_eff
        p_min = st.p_min_eff
        while j < len(loads) and loads[j].xi_km > st.xi_km:
            p[i] = p[i] - loads[j].p_pu
            if p[i] > p_max:
                residual = p[i] - p_max
                p[i] = p_max
                src = st.station_id
                j += 1
                break
            elif p[i] < p_min:
                residual = p[i] - p_min
                p[i] = p_min
                src = st.station_id
                j += 1
                break
            j += 1
        p_ref = p_ref - p[i]
        i += 1
    if residual != 0.0:
        trace.append(HandOff("P", residual, src, None))
    i = ns - 1
    while p_ref != 0.0 and i >= 0:
        st = stations[i]
        p_max = st.p_max_eff
        p_min = st.p_min_eff
        if p[i] + p_ref > p_max:
            p_ref = p_ref - p_max + p[i]
            p[i] = p_max
            i -= 1
        elif p[i] + p_ref < p_min:
            p_ref = p_ref - p_min + p[i]
            p[i] = p_min
            i -= 1
        else:
            p[i] = p[i] + p_ref
            p_ref = 0.0
    return p, p_ref, trace, seeds


def reactive_dispatch(p_values, stations, loads, g: float, b: float, mode: str = "literal"):
    """Reactive set points for fixed active dispatch.

    Returns (q far-to-near, trace, seeds).  Caps come from each station's
    own active set point; a zero active station therefore gets zero Q.
    """
    if not b > 0.0:
        raise ValueError("B must be positive to size reactive compensation")
    if mode == "literal":
        return _reactive_literal(p_values, stations, loads, g, b)
    if mode == "principle":
        return _reactive_principle(p_values, stations, loads, g, b)
    raise ValueError(f"unknown mode {mode!r}; expected 'literal' or 'principle'")


def _reactive_literal(p_values, stations, loads, g, b):
    ns = len(stations)
    q = [0.0] * ns
    seeds = [0.0] * ns
    trace: list[HandOff] = []
    i = 0
    j = 0
    residual = 0.0
    src = ""
    while i < ns:
        st = stations[i]
        if residual != 0.0:
            q[i] = residual
            trace.append(HandOff("Q", residual, src, st.station_id))
            residual = 0.0
        else:
            q[i] = 0.0
        seeds[i] = q[i]
        q_max = station_q_cap(p_values[i])
        q_min = -q_max
        while j < len(loads) and loads[j].xi_km > st.xi_km:
            q[i] = g / b * (p_values[i] - loads[j].p_pu)
            if q[i] > q_max:
                residual = q[i] - q_max
                q[i] = q_max
                src = st.station_id
                j += 1
                break
            elif q[i] < q_min:
                residual = q[i] - q_min
                q[i] = q_min
                src = st.station_id
                j += 1
                break
            j += 1
        i += 1
    if residual != 0.0:
        trace.append(HandOff("Q", residual, src, None))
    return q, trace, seeds


def _reactive_principle(p_values, stations, loads, g, b):
    # merge devices far-to-near; loads at a tied position count as "beyond"
    events = sorted(
        [(ld.xi_km, 0, k) for k, ld in enumerate(loads)]
        + [(st.xi_km, 1, k) for k, st in enumerate(stations)],
        key=lambda t: (-t[0], t[1]),
    )
    q = [0.0] * len(stations)
    run = 0.0  # sum of g*P + b*Q over everything beyond the walk position
    for _xi, kind, k in events:
        if kind == 0:
            run += g * loads[k].p_pu + b * loads[k].q_pu
        else:
            p_i = p_values[k]
            cap = station_q_cap(p_i)
            raw = -(run + g * p_i) / b
            q[k] = min(max(raw, -cap), cap)
            run += g * p_i + b * q[k]
    return q, [], [0.0] * len(stations)


# ---------------------------------------------------------------------------
# grid-level entry points
# ---------------------------------------------------------------------------

def _station_states(grid: GridTree, devices) -> list[StationState]:
    out = []
    for d in devices:
        sid = d.id or f"station@{d.segment}:{d.xi_km}"
        out.append(StationState(sid, d.xi_km, d.p_min_pu, d.p_max_pu))
    return out


def _load_points(devices) -> list[LoadPoint]:
    out = []
    for d in devices:
        lid = d.id or f"load@{d.segment}:{d.xi_km}"
        out.append(LoadPoint(lid, d.xi_km, d.p_pu, d.q_pu))
    return out


def _plan_rows(order, p_by, q_by):
    rows = []
    for st in order:
        p_i = p_by[st.station_id]
        rows.append(
            StationDispatch(
                station_id=st.station_id,
                xi_km=st.xi_km,
                p_pu=p_i,
                q_pu=q_by[st.station_id],
                p_min_eff=st.p_min_eff,
                p_max_eff=st.p_max_eff,
                q_cap=station_q_cap(p_i),
            )
        )
    return tuple(rows)


def synthesize(grid: GridTree, p_ref: float, mode: str = "literal") -> DispatchPlan:
    """Dispatch a single straight feeder."""
    grid.validated()
    if not grid.is_single_feeder():
        raise ValueError("synthesize handles a single feeder; use synthesize_tree")
    stations = sorted(_station_states(grid, grid.stations()), key=lambda s: (-s.xi_km, s.station_id))
    loads = sorted(_load_points(grid.loads()), key=lambda l: (-l.xi_km, l.load_id))
    seg = grid.segments[0]
    p, leftover, trace_p, seeds_p = active_dispatch(stations, loads, p_ref)
    q, trace_q, seeds_q = reactive_dispatch(
        p, stations, loads, seg.g_pu_per_km, seg.b_pu_per_km, mode=mode
    )
    p_by = {st.station_id: p[i] for i, st in enumerate(stations)}
    q_by = {st.station_id: q[i] for i, st in enumerate(stations)}
    bank_first = list(reversed(stations))
    return DispatchPlan(
        stations=_plan_rows(bank_first, p_by, q_by),
        p_ref=p_ref,
        leftover_p=leftover,
        trace=tuple(trace_p) + tuple(trace_q),
        seeds_p=tuple((st.station_id, seeds_p[i]) for i, st in enumerate(stations)),
        seeds_q=tuple((st.station_id, seeds_q[i]) for i, st in enumerate(stations)),
    )


def uniform_baseline(grid: GridTree, p_ref: float, power_factor: float = PF_FLOOR) -> DispatchPlan:
    """Every station gets P_ref/N and the matching leading reactive power."""
    grid.validated()
    stations = sorted(_station_states(grid, grid.stations()), key=lambda s: (s.xi_km, s.station_id))
    if not stations:
        raise ValueError("uniform baseline needs at least one station")
    if not 0.0 < power_factor <= 1.0:
        raise ValueError(f"power factor must be in (0, 1], got {power_factor}")
    n = len(stations)
    p_i = p_ref / n
    q_i = p_i * math.tan(math.acos(power_factor))
    p_by = {st.station_id: p_i for st in stations}
    q_by = {st.station_id: q_i for st in stations}
    leftover = p_ref - math.fsum(p_by.values())
    return DispatchPlan(
        stations=_plan_rows(stations, p_by, q_by),
        p_ref=p_ref,
        leftover_p=leftover,
    )


def synthesize_tree(grid: GridTree, p_ref: float, mode: str = "literal") -> DispatchPlan:
    """Dispatch a feeder tree: per-segment passes plus cross-junction hand-off.

    Segments run in post order (children, in declared order, before their
    parent).  A residual left at a segment's near end is handed to the
    nearest bank-side station along the path to the bank and seeds it
    there; with no such station the residual is dropped at the bank.  The
    refinement pass then runs over all stations ordered by distance to the
    bank, so the requested total is met whenever aggregate capacity allows.
    """
    grid.validated()
    post = _post_order(grid)
    sta_by_seg = {
        s.id: sorted(
            _station_states(grid, [d for d in grid.devices_on(s.id) if d.kind == "station"]),
            key=lambda t: (-t.xi_km, t.station_id),
        )
        for s in grid.segments
    }
    load_by_seg = {
        s.id: sorted(
            _load_points([d for d in grid.devices_on(s.id) if d.kind == "load"]),
            key=lambda t: (-t.xi_km, t.load_id),
        )
        for s in grid.segments
    }

    def bank_side_target(seg_id: str) -> StationState | None:
        """Nearest bank-side station for a residual leaving seg's near end."""
        seg = grid.segment(seg_id)
        while seg.parent is not None:
            pos = grid.segment_start_km(seg.id)
            candidates = [st for st in sta_by_seg[seg.parent] if st.xi_km <= pos]
            if candidates:
                return max(candidates, key=lambda st: st.xi_km)
            seg = grid.segment(seg.parent)
        return None

    trace: list[HandOff] = []
    incoming: dict[str, list[float]] = {}
    p_by: dict[str, float] = {}
    seeds_p: list[tuple[str, float]] = []
    p_run = p_ref
    for seg in post:
        stations = sta_by_seg[seg.id]
        loads = load_by_seg[seg.id]
        residual = 0.0
        src = ""
        j = 0
        for st in stations:
            seed = 0.0
            for amount in incoming.pop(st.station_id, ()):  # hand-offs arrived earlier
                seed = seed + amount
            if residual != 0.0:
                trace.append(HandOff("P", residual, src, st.station_id))
                seed = seed + residual
                residual = 0.0
            seeds_p.append((st.station_id, seed))
            p_i = seed
            p_max = st.p_max_eff
            p_min = st.p_min_eff
            while j < len(loads) and loads[j].xi_km > st.xi_km:
                p_i = p_i - loads[j].p_pu
                if p_i > p_max:
                    residual = p_i - p_max
                    p_i = p_max
                    src = st.station_id
                    j += 1
                    break
                elif p_i < p_min:
                    residual = p_i - p_min
                    p_i = p_min
                    src = st.station_id
                    j += 1
                    break
                j += 1
            p_by[st.station_id] = p_i
            p_run = p_run - p_i
        if residual != 0.0:
            tgt = bank_side_target(seg.id)
            trace.append(HandOff("P", residual, src, tgt.station_id if tgt else None))
            if tgt is not None:
                incoming.setdefault(tgt.station_id, []).append(residual)
    assert not incoming, "hand-off targeted an already-processed station"

    all_stations = sorted(
        (st for s in grid.segments for st in sta_by_seg[s.id]),
        key=lambda st: (st.xi_km, st.station_id),
    )
    i = 0
    while p_run != 0.0 and i < len(all_stations):
        st = all_stations[i]
        cur = p_by[st.station_id]
        if cur + p_run > st.p_max_eff:
            p_run = p_run - st.p_max_eff + cur
            p_by[st.station_id] = st.p_max_eff
            i += 1
        elif cur + p_run < st.p_min_eff:
            p_run = p_run - st.p_min_eff + cur
            p_by[st.station_id] = st.p_min_eff
            i += 1
        else:
            p_by[st.station_id] = cur + p_run
            p_run = 0.0
    leftover = p_run

    if mode == "literal":
        q_by, seeds_q = _tree_reactive_literal(grid, post, sta_by_seg, load_by_seg,
                                               p_by, bank_side_target, trace)
    elif mode == "principle":
        q_by, seeds_q = _tree_reactive_principle(grid, post, sta_by_seg, load_by_seg, p_by)
    else:
        raise ValueError(f"unknown mode {mode!r}; expected 'literal' or 'principle'")

    return DispatchPlan(
        stations=_plan_rows(all_stations, p_by, q_by),
        p_ref=p_ref,
        leftover_p=leftover,
        trace=tuple(trace),
        seeds_p=tuple(seeds_p),
        seeds_q=tuple(seeds_q),
    )


def _post_order(grid: GridTree):
    order = []

    def visit(seg) -> None:
        for child in grid.children_of(seg.id):
            visit(child)
        order.append(seg)

    for root in grid.roots():
        visit(root)
    return order


def _tree_reactive_literal(grid, post, sta_by_seg, load_by_seg, p_by, bank_side_target, trace):
    incoming: dict[str, list[float]] = {}
    q_by: dict[str, float] = {}
    seeds_q: list[tuple[str, float]] = []
    for seg in post:
        g, b = seg.g_pu_per_km, seg.b_pu_per_km
        stations = sta_by_seg[seg.id]
        loads = load_by_seg[seg.id]
        residual = 0.0
        src = ""
        j = 0
        for st in stations:
            seed = 0.0
            for amount in incoming.pop(st.station_id, ()):
                seed = seed + amount
            if residual != 0.0:
                trace.append(HandOff("Q", residual, src, st.station_id))
                seed = seed + residual
                residual = 0.0
            seeds_q.append((st.station_id, seed))
            q_i = seed
            q_max = station_q_cap(p_by[st.station_id])
            q_min = -q_max
            while j < len(loads) and loads[j].xi_km > st.xi_km:
                q_i = g / b * (p_by[st.station_id] - loads[j].p_pu)
                if q_i > q_max:
                    residual = q_i - q_max
                    q_i = q_max
                    src = st.station_id
                    j += 1
                    break
                elif q_i < q_min:
                    residual = q_i - q_min
                    q_i = q_min
                    src = st.station_id
                    j += 1
                    break
                j += 1
            q_by[st.station_id] = q_i
        if residual != 0.0:
            tgt = bank_side_target(seg.id)
            trace.append(HandOff("Q", residual, src, tgt.station_id if tgt else None))
            if tgt is not None:
                incoming.setdefault(tgt.station_id, []).append(residual)
    assert not incoming, "hand-off targeted an already-processed station"
    return q_by, seeds_q


def _tree_reactive_principle(grid, post, sta_by_seg, load_by_seg, p_by):
    # run = sum of (g*P + b*Q) over the whole subtree beyond the walk point,
    # each device weighted with its own segment's parameters
    subtree: dict[str, float] = {}
    q_by: dict[str, float] = {}
    for seg in post:
        g, b = seg.g_pu_per_km, seg.b_pu_per_km
        events = (
            [(st.xi_km, 2, st) for st in sta_by_seg[seg.id]]
            + [(ld.xi_km, 1, ld) for ld in load_by_seg[seg.id]]
            + [(grid.segment_start_km(c.id), 0, c) for c in grid.children_of(seg.id)]
        )
        events.sort(key=lambda t: (-t[0], t[1]))
        run = 0.0
        for _xi, kind, item in events:
            if kind == 0:
                run += subtree[item.id]
            elif kind == 1:
                run += g * item.p_pu + b * item.q_pu
            else:
                p_i = p_by[item.station_id]
                cap = station_q_cap(p_i)
                raw = -(run + g * p_i) / b
                q_by[item.station_id] = min(max(raw, -cap), cap)
                run += g * p_i + b * q_by[item.station_id]
        subtree[seg.id] = run
    return q_by, [(st.station_id, 0.0) for seg in post for st in sta_by_seg[seg.id]]


def audit_trace(plan: DispatchPlan) -> float:
    """Max mismatch between recorded seeds and the trace's forwarded amounts.

    Sums each station's incoming HandOff amounts in trace order and compares
    with the recorded seed; a faithful literal plan audits to exactly 0.
    """
    worst = 0.0
    for quantity, seeds in (("P", plan.seeds_p), ("Q", plan.seeds_q)):
        incoming: dict[str, float] = {}
        for ev in plan.trace:
            if ev.quantity == quantity and ev.target is not None:
                incoming[ev.target] = incoming.get(ev.target, 0.0) + ev.amount
        for station_id, seed in seeds:
            worst = max(worst, abs(incoming.get(station_id, 0.0) - seed))
    return worst
