"""Dispatch across the bundled branched feeder and watch the hand-offs.

Residuals that a lateral cannot absorb cross the junction to the nearest
bank-side station; the script prints those events and the terminal
voltage lift relative to the uniform split.
"""
from feederflow import (
    load_feeder_tree,
    power_density,
    solve_nonlinear,
    synthesize_tree,
    uniform_baseline,
)

P_REF = 0.01


def main():
    grid = load_feeder_tree()
    plan = synthesize_tree(grid, P_REF)
    unif = uniform_baseline(grid, P_REF)

    print(f"{len(grid.segments)} segments, {len(plan.stations)} stations, "
          f"requested total {P_REF} pu")
    print(f"delivered: {plan.total_p()}  leftover: {plan.leftover_p}")

    by_seg = {d.id: d.segment for d in grid.devices}
    print()
    print("hand-offs:")
    for ev in plan.trace:
        src_seg = by_seg.get(ev.source, "?")
        if ev.target is None:
            where = "dropped at the bank"
        else:
            dst_seg = by_seg.get(ev.target, "?")
            hop = " (crosses a junction)" if src_seg != dst_seg else ""
            where = f"-> {ev.target} [{dst_seg}]{hop}"
        print(f"  {ev.quantity}: {ev.amount:+.8f}  {ev.source} [{src_seg}] {where}")

    prof_s = solve_nonlinear(grid, power_density(grid, plan))
    prof_u = solve_nonlinear(grid, power_density(grid, unif))
    lift = dict(prof_u.terminal_v)
    print()
    print("terminal voltages:")
    print("  segment     synthesized   uniform       lift")
    for seg_id, v in prof_s.terminal_v:
        print(f"  {seg_id:<10}  {v:.6f}      {lift[seg_id]:.6f}      {v - lift[seg_id]:+.2e}")


if __name__ == "__main__":
    main()
