"""Base parameters: where the stock settles and how the two tactics get there.

Run with ``python3 demos/base_case.py``. Prints the steady states, then a
coarse table of the optimal path from x0 = 0.95.
"""

from firewater import BASE, Grid, find_steady_states, solve_multicontrol, steady_ccd, switching_point
from firewater.shooting import WATER


def main():
    xs = switching_point(BASE)
    print(f"fire is switched off below x = {xs}")

    for s in find_steady_states(BASE, WATER, 0.0, 1e-8, xs):
        print(f"  water-only state x = {s.x_s:.6g} ({s.stability}), u = {s.u_s:.5f}")
    high = steady_ccd(BASE)
    print(f"  high state x = {high.x_s:.5f}, u = {high.u_s:.5f}, v = {high.v_s:.5f}, "
          f"cost per year {high.cost_rate(BASE):.4f}")

    # a 300-year horizon keeps the terminal layer away from the part we look at
    res = solve_multicontrol(BASE, Grid(300.0, 750), 0.95)
    print(f"\ndynamic solve: {res.cycles} cycles, K = {res.K_water:.4f}, cost {res.cost:.4f}")
    print(f"{'t':>6} {'x':>8} {'u':>8} {'v':>8}")
    for t in (0, 10, 25, 50, 100, 150, 200, 250, 290, 300):
        row = res.trajectory.at(float(t))
        print(f"{t:>6} {row['x']:8.4f} {row['u']:8.4f} {row['v']:8.4f}")
    print("near the end water falls to zero while fire picks up again: the "
          "recruitment fire causes no longer has time to cost anything")


if __name__ == "__main__":
    main()
