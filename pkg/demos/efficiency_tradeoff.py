"""Which efficiency pairs hold the stock at 0.4?

Sweeps the steady state over fire efficiency gamma and water efficiency
beta, fits a quadratic surface and walks its 0.4 level set. The cost per
year comes out nearly flat along the curve.
"""

from firewater import BASE
from firewater.analysis import contour_solve, fit_sweep, grid_values, sweep_gamma_beta, verify_contour


def main():
    pts = sweep_gamma_beta(BASE, jobs=1)
    fit = fit_sweep(pts)
    print(f"x_s ~ {fit.a0:.4f} {fit.a1:+.4f} g {fit.a2:+.4f} g^2 {fit.a3:+.4f} b "
          f"{fit.a4:+.3f} b^2   (r^2 = {fit.r2:.4f})")

    pairs, _ = contour_solve(fit, 0.4, grid_values(0.01, 0.02, 0.001))
    print(f"\n{'gamma':>7} {'beta':>6} {'x_s':>7} {'u_s':>7} {'v_s':>7} {'cost':>7}")
    for r in verify_contour(BASE, pairs, jobs=1):
        print(f"{r.gamma:7.4f} {r.beta:6.3f} {r.x_s:7.4f} {r.u_s:7.4f} {r.v_s:7.4f} "
              f"{r.cost_rate:7.4f}")


if __name__ == "__main__":
    main()
