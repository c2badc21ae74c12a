"""A small organization can be crushed, a larger one only contained.

Starting below the threshold stock, water alone drives the stock down to a
tiny steady state; above it the best one can do is hold it at the high
state. ``find_dns`` locates the stock where both are equally expensive.
"""

import time

from firewater import BASE, Grid, solve_low_branch
from firewater.analysis import find_dns


def main():
    low = solve_low_branch(BASE, Grid(100.0, 250), 0.013)
    print("water-only path from x0 = 0.013")
    for t in (0, 10, 20, 30, 40, 50):
        row = low.trajectory.at(float(t))
        print(f"  t={t:>3}  x={row['x']:.3e}  u={row['u']:.5f}")
    print(f"  discounted cost over 100 years: {low.cost:.5f}")

    t0 = time.perf_counter()
    dns = find_dns(BASE)
    print(f"\nindifference stock x_D = {dns.x_D:.6f} "
          f"(J_low {dns.J_low:.5f}, J_high {dns.J_high:.5f}) "
          f"after {len(dns.evaluations)} cost pairs, {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
