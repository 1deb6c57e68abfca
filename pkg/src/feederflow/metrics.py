"""Voltage-quality metrics for comparing dispatch strategies."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dispatch import DispatchPlan
from .solver import VoltageProfile

__all__ = ["MetricsReport", "compute_metrics"]

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


@dataclass(frozen=True)
class MetricsReport:
    max_dev: float              # sup |v - 1| over the whole tree
    l2_dev: float               # integral of (v - 1)^2 dx, summed over segments
    min_terminal_v: float       # worst open-end voltage
    w_flatness: dict[str, float] = field(default_factory=dict)  # integral of w^2 dx per segment
    total_p: float = 0.0
    leftover_p: float = 0.0

    def as_dict(self) -> dict:
        return {
            "max_dev": self.max_dev,
            "l2_dev": self.l2_dev,
            "min_terminal_v": self.min_terminal_v,
            "w_flatness": dict(self.w_flatness),
            "total_p": self.total_p,
            "leftover_p": self.leftover_p,
        }


def compute_metrics(profile: VoltageProfile, plan: DispatchPlan | None = None) -> MetricsReport:
    max_dev = 0.0
    l2 = 0.0
    flats: dict[str, float] = {}
    for seg in profile.segments:
        dev = np.abs(seg.v_pu - 1.0)
        max_dev = max(max_dev, float(dev.max()))
        l2 += float(_trapezoid((seg.v_pu - 1.0) ** 2, seg.x_km))
        flats[seg.segment_id] = float(_trapezoid(seg.w**2, seg.x_km))
    return MetricsReport(
        max_dev=max_dev,
        l2_dev=l2,
        min_terminal_v=min(v for _sid, v in profile.terminal_v),
        w_flatness=flats,
        total_p=plan.total_p() if plan is not None else 0.0,
        leftover_p=plan.leftover_p if plan is not None else 0.0,
    )
