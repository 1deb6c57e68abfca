"""Feeder topology, per-unit conversion and coarse-grained power densities.

A grid is a tree of constant-parameter segments rooted at the bank (the
substation bus).  Point devices (loads and charging stations) sit strictly
inside segments and are positioned by their arc length from the bank along
the unique bank-to-device path, so a single coordinate orders every device
on a given root-to-leaf path.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PerUnitBase",
    "FeederSegment",
    "Device",
    "GridTree",
    "GridValidationReport",
    "DensityField",
    "to_per_unit",
    "validate_grid",
    "power_density",
]

# Grid-code policy shared with the dispatch module: station active-power
# bounds are derated to 90% before any dispatch, and the admissible power
# factor is [0.9, 1].
EFFECTIVE_BOUND_FACTOR = 0.9
PF_FLOOR = 0.9

# Gaussian kernels are cut off here; the discarded tail mass is ~2e-9 of the
# device power, far below the 1e-6 quadrature tolerance.
KERNEL_CUTOFF_SIGMAS = 6.0


@dataclass(frozen=True)
class PerUnitBase:
    """System-wide base quantities (single base for the whole tree)."""

    power_va: float
    voltage_v: float

    def __post_init__(self) -> None:
        if not (self.power_va > 0.0 and math.isfinite(self.power_va)):
            raise ValueError(f"base power must be positive, got {self.power_va}")
        if not (self.voltage_v > 0.0 and math.isfinite(self.voltage_v)):
            raise ValueError(f"base voltage must be positive, got {self.voltage_v}")

    @property
    def impedance_ohm(self) -> float:
        return self.voltage_v * self.voltage_v / self.power_va


def to_per_unit(r_ohm_per_km: float, x_ohm_per_km: float, base: PerUnitBase) -> tuple[float, float]:
    """Convert series resistance/reactance per km into per-unit G, B per km.

    The per-length admittance of the conductor is 1/(R + jX); its real and
    (magnitude of) imaginary parts are scaled by the base impedance.
    """
    if r_ohm_per_km < 0.0 or x_ohm_per_km < 0.0:
        raise ValueError("conductor R and X must be non-negative")
    denom = r_ohm_per_km * r_ohm_per_km + x_ohm_per_km * x_ohm_per_km
    if denom == 0.0:
        raise ValueError("degenerate conductor: R and X are both zero")
    zb = base.impedance_ohm
    return r_ohm_per_km / denom * zb, x_ohm_per_km / denom * zb


@dataclass(frozen=True)
class FeederSegment:
    """One constant-parameter feeder section.

    Non-root segments attach to their parent at ``offset_km`` along the
    parent's own axis (0 < offset <= parent length); the root attaches to
    the bank.
    """

    id: str
    length_km: float
    g_pu_per_km: float
    b_pu_per_km: float
    parent: str | None = None
    offset_km: float = 0.0

    @property
    def z2(self) -> float:
        return self.g_pu_per_km ** 2 + self.b_pu_per_km ** 2


@dataclass(frozen=True)
class Device:
    """Point load or charging station.

    xi_km is the arc length from the bank along the device's path.  Loads
    carry (p_pu <= 0, q_pu); stations carry raw active-power bounds, from
    which the 90%-derated effective bounds are derived.
    """

    kind: str                    # "load" | "station"
    segment: str
    xi_km: float
    id: str = ""
    p_pu: float = 0.0
    q_pu: float = 0.0
    p_min_pu: float = 0.0
    p_max_pu: float = 0.0

    @property
    def p_min_eff(self) -> float:
        return EFFECTIVE_BOUND_FACTOR * self.p_min_pu

    @property
    def p_max_eff(self) -> float:
        return EFFECTIVE_BOUND_FACTOR * self.p_max_pu


@dataclass(frozen=True)
class GridValidationReport:
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class GridTree:
    """Tree of segments plus the device list, with derived path offsets.

    Construction never raises on semantic problems; run validate_grid (or
    the ``validated`` helper) before handing a tree to the solver or the
    dispatch passes.
    """

    base: PerUnitBase
    segments: tuple[FeederSegment, ...]
    devices: tuple[Device, ...] = ()
    _seg_by_id: dict = field(init=False, repr=False, compare=False)
    _start_km: dict = field(init=False, repr=False, compare=False)
    _children: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_seg_by_id", {s.id: s for s in self.segments})
        # resolve cumulative start offsets; segments in a parent cycle or
        # with an unknown parent stay unresolved and are reported later
        start: dict[str, float] = {s.id: 0.0 for s in self.segments if s.parent is None}
        children: dict[str, list[FeederSegment]] = {s.id: [] for s in self.segments}
        for s in self.segments:
            if s.parent is not None and s.parent in children:
                children[s.parent].append(s)
        pending = [s for s in self.segments if s.parent is not None]
        while pending:
            progressed = False
            rest = []
            for s in pending:
                if s.parent in start:
                    start[s.id] = start[s.parent] + s.offset_km
                    progressed = True
                else:
                    rest.append(s)
            pending = rest
            if not progressed:
                break
        object.__setattr__(self, "_start_km", start)
        object.__setattr__(self, "_children", children)

    def segment(self, seg_id: str) -> FeederSegment:
        return self._seg_by_id[seg_id]

    def has_segment(self, seg_id: str) -> bool:
        return seg_id in self._seg_by_id

    def segment_start_km(self, seg_id: str) -> float:
        """Arc length from the bank to the segment's near end."""
        return self._start_km[seg_id]

    def segment_end_km(self, seg_id: str) -> float:
        return self._start_km[seg_id] + self._seg_by_id[seg_id].length_km

    def children_of(self, seg_id: str) -> tuple[FeederSegment, ...]:
        return tuple(self._children.get(seg_id, ()))

    def roots(self) -> tuple[FeederSegment, ...]:
        return tuple(s for s in self.segments if s.parent is None)

    def is_single_feeder(self) -> bool:
        return len(self.segments) == 1 and self.segments[0].parent is None

    def devices_on(self, seg_id: str) -> tuple[Device, ...]:
        return tuple(d for d in self.devices if d.segment == seg_id)

    def loads(self) -> tuple[Device, ...]:
        return tuple(d for d in self.devices if d.kind == "load")

    def stations(self) -> tuple[Device, ...]:
        return tuple(d for d in self.devices if d.kind == "station")

    def validated(self) -> "GridTree":
        report = validate_grid(self)
        if not report.ok:
            raise ValueError("invalid grid: " + "; ".join(report.violations))
        return self


def validate_grid(grid: GridTree) -> GridValidationReport:
    """Collect every structural violation instead of failing on the first."""
    bad: list[str] = []
    seen_ids: set[str] = set()
    for s in grid.segments:
        if s.id in seen_ids:
            bad.append(f"segment id {s.id!r} is duplicated")
        seen_ids.add(s.id)
        if not (s.length_km > 0.0 and math.isfinite(s.length_km)):
            bad.append(f"segment {s.id!r}: length must be positive, got {s.length_km}")
        if not (s.g_pu_per_km > 0.0 and s.b_pu_per_km > 0.0):
            bad.append(f"segment {s.id!r}: G and B must be positive")
        if s.parent is not None:
            if s.parent == s.id:
                bad.append(f"segment {s.id!r} is its own parent")
            elif not grid.has_segment(s.parent):
                bad.append(f"segment {s.id!r}: unknown parent {s.parent!r}")
            else:
                plen = grid.segment(s.parent).length_km
                if not (0.0 < s.offset_km <= plen):
                    bad.append(
                        f"segment {s.id!r}: attachment offset {s.offset_km} outside (0, {plen}]"
                    )
    if grid.segments and not grid.roots():
        bad.append("no root segment: every segment names a parent (cycle)")
    for s in grid.segments:
        if s.id not in grid._start_km and s.parent is not None and grid.has_segment(s.parent):
            bad.append(f"segment {s.id!r} is unreachable from the bank (parent cycle)")

    dev_ids: set[str] = set()
    positions: dict[str, list[tuple[float, str]]] = {}
    for d in grid.devices:
        label = d.id or f"{d.kind}@{d.segment}:{d.xi_km}"
        if d.id:
            if d.id in dev_ids:
                bad.append(f"device id {d.id!r} is duplicated")
            dev_ids.add(d.id)
        if d.kind not in ("load", "station"):
            bad.append(f"device {label}: unknown kind {d.kind!r}")
            continue
        if not grid.has_segment(d.segment):
            bad.append(f"device {label}: unknown segment {d.segment!r}")
            continue
        if d.segment not in grid._start_km:
            continue  # the segment itself is already reported
        lo = grid.segment_start_km(d.segment)
        hi = grid.segment_end_km(d.segment)
        if not (lo < d.xi_km < hi):
            bad.append(
                f"device {label}: xi={d.xi_km} must lie strictly inside ({lo}, {hi}) "
                "(no device at the bank, a junction, or an open end)"
            )
        positions.setdefault(d.segment, []).append((d.xi_km, label))
        if d.kind == "load":
            if d.p_pu > 0.0:
                bad.append(f"device {label}: load active power must be <= 0, got {d.p_pu}")
        else:
            if not (d.p_min_pu <= 0.0 <= d.p_max_pu):
                bad.append(
                    f"device {label}: station bounds [{d.p_min_pu}, {d.p_max_pu}] must straddle 0"
                )
    for seg_id, entries in positions.items():
        entries.sort()
        for (x0, l0), (x1, l1) in zip(entries, entries[1:]):
            if x0 == x1:
                bad.append(f"devices {l0} and {l1} overlap at xi={x0} on segment {seg_id!r}")
    return GridValidationReport(tuple(bad))


class DensityField:
    """Per-segment coarse-grained p(x), q(x) built from point devices.

    Each device contributes a Gaussian of mass equal to its power, centred
    at its position and truncated at +-6 sigma.  Kernels never spill across
    junctions: a device's mass stays on its own segment, so positions closer
    than ~6 sigma to a segment end lose tail mass.
    """

    def __init__(self, grid: GridTree, station_power, sigma_km: float):
        if not (sigma_km > 0.0 and math.isfinite(sigma_km)):
            raise ValueError(f"sigma must be positive, got {sigma_km}")
        self.sigma_km = sigma_km
        self._by_segment: dict[str, list[tuple[float, float, float]]] = {}
        centres: dict[str, list[float]] = {}
        for d in grid.devices:
            if d.kind == "load":
                p, q = d.p_pu, d.q_pu
            elif station_power is not None and d.id in station_power:
                p, q = station_power[d.id]
            else:
                continue  # idle station
            self._by_segment.setdefault(d.segment, []).append((d.xi_km, p, q))
            centres.setdefault(d.segment, []).append(d.xi_km)
        for seg_id, xs in centres.items():
            xs.sort()
            gaps = [b - a for a, b in zip(xs, xs[1:])]
            if gaps and sigma_km > min(gaps) / 2.0:
                warnings.warn(
                    f"sigma={sigma_km} km exceeds half the minimum device spacing "
                    f"({min(gaps)} km) on segment {seg_id!r}: kernels overlap strongly",
                    stacklevel=3,
                )

    def sample(self, seg_id: str, x_km: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Evaluate (p, q) at cumulative positions x_km on one segment."""
        x = np.asarray(x_km, dtype=float)
        p = np.zeros_like(x)
        q = np.zeros_like(x)
        norm = 1.0 / math.sqrt(2.0 * math.pi * self.sigma_km ** 2)
        cut = KERNEL_CUTOFF_SIGMAS * self.sigma_km
        for xi, pw, qw in self._by_segment.get(seg_id, ()):
            dx = x - xi
            mask = np.abs(dx) <= cut
            if not mask.any():
                continue
            kern = norm * np.exp(-dx[mask] ** 2 / (2.0 * self.sigma_km ** 2))
            p[mask] += pw * kern
            q[mask] += qw * kern
        return p, q


def power_density(grid: GridTree, plan=None, sigma_km: float = 0.05) -> DensityField:
    """Build the sampled density field for a validated grid.

    plan may be a DispatchPlan or any mapping station-id -> (p_pu, q_pu);
    None leaves every station idle.  Station values are checked against the
    derated active bounds and the power-factor cone before being accepted.
    """
    station_power = None
    if plan is not None:
        station_power = plan.as_power_map() if hasattr(plan, "as_power_map") else dict(plan)
        from .dispatch import station_q_cap  # local import: dispatch imports grid

        tol = 1e-12
        for d in grid.stations():
            if d.id not in station_power:
                continue
            p, q = station_power[d.id]
            if not (d.p_min_eff - tol <= p <= d.p_max_eff + tol):
                raise ValueError(
                    f"station {d.id!r}: p={p} outside effective bounds "
                    f"[{d.p_min_eff}, {d.p_max_eff}]"
                )
            if abs(q) > station_q_cap(p) + tol:
                raise ValueError(f"station {d.id!r}: q={q} violates the power-factor cone")
    return DensityField(grid, station_power, sigma_km)
