"""Print the synthesized charging pattern for the bundled single feeder.

Shows the per-station set points next to the uniform split, plus the
residual hand-off chain that explains where every forwarded watt went.
"""
from feederflow import audit_trace, load_single_feeder, synthesize, uniform_baseline

P_REF = 0.1


def main():
    grid = load_single_feeder()
    plan = synthesize(grid, P_REF, mode="literal")
    unif = uniform_baseline(grid, P_REF)

    print(f"requested total: {P_REF} pu")
    print()
    print("              synthesized          uniform")
    print("station  xi    P_i      Q_i        P_i      Q_i")
    for st, un in zip(plan.stations, unif.stations):
        print(f"{st.station_id:>7}  {st.xi_km:3.1f}  {st.p_pu:7.4f}  {st.q_pu:7.4f}"
              f"    {un.p_pu:7.4f}  {un.q_pu:7.4f}")
    print(f"{'total':>7}       {plan.total_p():7.4f}          "
          f"  {unif.total_p():7.4f}")
    print(f"leftover: {plan.leftover_p}")

    print()
    print("residual hand-offs (feeder end toward the bank):")
    for ev in plan.trace:
        target = ev.target if ev.target is not None else "bank (dropped)"
        print(f"  {ev.quantity}: {ev.amount:+.6f} pu  {ev.source} -> {target}")
    print(f"trace audit (forwarded minus received): {audit_trace(plan)}")


if __name__ == "__main__":
    main()
