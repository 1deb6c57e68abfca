import math
import warnings

import numpy as np
import pytest

from feederflow import (
    Device,
    DensityField,
    FeederSegment,
    GridTree,
    PerUnitBase,
    power_density,
    to_per_unit,
    validate_grid,
)


def make_single(devices, length=5.0, g=3.881, b=6.856):
    return GridTree(
        PerUnitBase(12.0e6, 6600.0),
        (FeederSegment("main", length, g, b),),
        tuple(devices),
    )


# -- per-unit conversion -----------------------------------------------------

def test_impedance_base():
    base = PerUnitBase(12.0e6, 6600.0)
    assert base.impedance_ohm == 3.63


def test_to_per_unit_frozen():
    g, b = to_per_unit(0.227, 0.401, PerUnitBase(12.0e6, 6600.0))
    assert g == 3.88079875665238
    assert b == 6.8555079357603725


def test_to_per_unit_rounds_to_display_constants():
    g, b = to_per_unit(0.227, 0.401, PerUnitBase(12.0e6, 6600.0))
    assert abs(g - 3.881) / 3.881 < 1e-3
    assert abs(b - 6.856) / 6.856 < 1e-3


@pytest.mark.parametrize("r,x", [(-0.1, 0.4), (0.2, -0.4), (0.0, 0.0)])
def test_to_per_unit_rejects_bad_conductor(r, x):
    with pytest.raises(ValueError):
        to_per_unit(r, x, PerUnitBase(12.0e6, 6600.0))


@pytest.mark.parametrize("power,voltage", [(0.0, 6600.0), (-1.0, 6600.0), (12e6, 0.0), (12e6, float("nan"))])
def test_per_unit_base_rejects_nonpositive(power, voltage):
    with pytest.raises(ValueError):
        PerUnitBase(power, voltage)


def test_station_effective_bounds_are_derated():
    raw = 400.0e3 / 12.0e6
    st = Device("station", "main", 1.0, "st", p_min_pu=-raw, p_max_pu=raw)
    assert st.p_max_eff == 0.9 * raw
    assert st.p_min_eff == -0.9 * raw
    # the 5.1 scenario derates to exactly 0.03 pu
    assert st.p_max_eff == 0.03


# -- structural validation ---------------------------------------------------

def test_validate_ok_bundled(single_feeder, feeder_tree):
    assert validate_grid(single_feeder).ok
    assert validate_grid(feeder_tree).ok


def test_validate_collects_every_violation():
    grid = GridTree(
        PerUnitBase(1.0, 1.0),
        (
            FeederSegment("a", 2.0, 1.0, 2.0),
            FeederSegment("a", -1.0, 1.0, 2.0),            # dup id, bad length
            FeederSegment("b", 1.0, 1.0, 2.0, parent="zz", offset_km=0.5),
        ),
        (
            Device("load", "a", 1.0, "l1", p_pu=0.5),       # load must be <= 0
            Device("load", "a", 1.0, "l2", p_pu=-0.5),      # overlaps l1
            Device("station", "a", 3.5, "s1", p_min_pu=0.1, p_max_pu=0.2),  # off-end + bounds
            Device("widget", "a", 1.0, "w1"),               # unknown kind
            Device("load", "nope", 1.0, "l3", p_pu=-0.1),   # unknown segment
        ),
    )
    report = validate_grid(grid)
    assert not report.ok
    text = "\n".join(report.violations)
    for needle in (
        "duplicated",
        "length must be positive",
        "unknown parent 'zz'",
        "must be <= 0",
        "overlap at xi=1.0",
        "must lie strictly inside",
        "straddle 0",
        "unknown kind 'widget'",
        "unknown segment 'nope'",
    ):
        assert needle in text, needle


def test_validated_raises_with_all_messages():
    grid = make_single([Device("load", "main", 9.0, "l", p_pu=-0.1)])
    with pytest.raises(ValueError, match="strictly inside"):
        grid.validated()


def test_offset_must_lie_on_parent():
    grid = GridTree(
        PerUnitBase(1.0, 1.0),
        (
            FeederSegment("a", 2.0, 1.0, 2.0),
            FeederSegment("b", 1.0, 1.0, 2.0, parent="a", offset_km=2.5),
        ),
        (),
    )
    report = validate_grid(grid)
    assert any("outside (0, 2.0]" in v for v in report.violations)


def test_tree_geometry_helpers(feeder_tree):
    assert not feeder_tree.is_single_feeder()
    assert [s.id for s in feeder_tree.roots()] == ["trunk"]
    kids = [s.id for s in feeder_tree.children_of("fdrA")]
    assert kids == ["fdrA1", "fdrA2"]
    assert feeder_tree.segment_start_km("fdrA") == 1.0
    assert feeder_tree.segment_end_km("fdrA") == 3.0
    assert feeder_tree.segment_start_km("fdrA1") == 3.0


def test_device_partition(single_feeder):
    assert len(single_feeder.loads()) == 5
    assert len(single_feeder.stations()) == 4
    assert all(d.kind == "load" for d in single_feeder.loads())


# -- coarse-grained density --------------------------------------------------

def test_density_mass_matches_device_power():
    grid = make_single([
        Device("load", "main", 2.0, "l", p_pu=-0.06, q_pu=-0.01),
        Device("station", "main", 3.0, "s", p_min_pu=-0.1, p_max_pu=0.1),
    ])
    field = power_density(grid, {"s": (0.05, 0.02)}, sigma_km=0.05)
    x = np.linspace(0.0, 5.0, 20001)
    p, q = field.sample("main", x)
    assert np.trapezoid(p, x) == pytest.approx(-0.06 + 0.05, abs=1e-6)
    assert np.trapezoid(q, x) == pytest.approx(-0.01 + 0.02, abs=1e-6)


def test_density_idle_station_contributes_nothing():
    grid = make_single([Device("station", "main", 3.0, "s", p_min_pu=-0.1, p_max_pu=0.1)])
    field = power_density(grid, None, sigma_km=0.05)
    p, q = field.sample("main", np.linspace(0.0, 5.0, 101))
    assert np.all(p == 0.0)
    assert np.all(q == 0.0)


def test_density_kernel_truncated_at_six_sigma():
    grid = make_single([Device("load", "main", 2.5, "l", p_pu=-0.1)])
    field = power_density(grid, None, sigma_km=0.05)
    p, _ = field.sample("main", np.array([2.5 - 0.31, 2.5 + 0.31]))
    assert np.all(p == 0.0)
    p, _ = field.sample("main", np.array([2.5 - 0.29]))
    assert p[0] != 0.0


def test_density_overlap_warning_is_strict():
    devices = [
        Device("load", "main", 2.0, "l1", p_pu=-0.1),
        Device("load", "main", 2.08, "l2", p_pu=-0.1),
    ]
    with pytest.warns(UserWarning, match="kernels overlap"):
        power_density(make_single(devices), None, sigma_km=0.05)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        power_density(make_single(devices), None, sigma_km=0.04)  # 0.04 == gap/2: quiet


def test_density_kernels_stay_on_their_segment(feeder_tree):
    field = power_density(feeder_tree, None, sigma_km=0.05)
    # trunk carries no devices; nothing may leak across the junction at 1.0
    p, q = field.sample("trunk", np.linspace(0.0, 1.0, 51))
    assert np.all(p == 0.0) and np.all(q == 0.0)


def test_density_rejects_bad_sigma():
    grid = make_single([Device("load", "main", 2.5, "l", p_pu=-0.1)])
    with pytest.raises(ValueError, match="sigma"):
        DensityField(grid, None, 0.0)


def test_power_density_checks_bounds_and_cone():
    grid = make_single([Device("station", "main", 2.5, "s", p_min_pu=-0.1, p_max_pu=0.1)])
    with pytest.raises(ValueError, match="outside effective bounds"):
        power_density(grid, {"s": (0.095, 0.0)})
    with pytest.raises(ValueError, match="power-factor cone"):
        power_density(grid, {"s": (0.05, 0.05)})
    # at the cone boundary, q = p*tan(acos(0.9)) is accepted
    power_density(grid, {"s": (0.05, 0.05 * math.tan(math.acos(0.9)))})
