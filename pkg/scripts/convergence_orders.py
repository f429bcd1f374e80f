"""Observed convergence orders: RK4 in time and geodesic shooting.

Prints error ratios under step halving; fourth order gives ratios near 16.

    python3 scripts/convergence_orders.py
"""
import numpy as np

from riemstab.dynamics import integrate_chart
from riemstab.manifolds import HalfPlane, geodesic_shoot
from riemstab.scenarios import build_example_hyperbolic, build_linear_oracle


def rk4_table(vf, x0, t_max, steps):
    print(f"{'h':>10} {'error vs h/8':>14} {'ratio':>8}")
    for h in steps:
        ref = integrate_chart(vf, 0.0, x0, t_max, h / 8).final
        err = [np.linalg.norm(integrate_chart(vf, 0.0, x0, t_max, hh).final - ref) for hh in (h, h / 2)]
        print(f"{h:>10g} {err[0]:>14.4e} {err[0] / err[1]:>8.2f}")


def main():
    print("linear oracle x' = -x, x0 = 1, t in [0, 1]")
    rk4_table(build_linear_oracle().field, [1.0], 1.0, [0.2, 0.1, 0.05])
    print("\nhyperbolic example, d = 2 + sin t, x0 = (1, 3), t in [0, 2]")
    rk4_table(build_example_hyperbolic().field, [1.0, 3.0], 2.0, [0.02, 0.01, 0.005, 0.0025])

    print("\ngeodesic shooting vs closed-form exp, x = (0, 1), X = (1.5, 0.5)")
    m = HalfPlane()
    x, X = np.array([0.0, 1.0]), np.array([1.5, 0.5])
    ref = m.exp_map(x, X)
    errs = {n: np.linalg.norm(geodesic_shoot(m, x, X, n) - ref) for n in (16, 32, 64, 128)}
    for n in (16, 32, 64):
        print(f"n = {n:>4}: error {errs[n]:.4e}, ratio to 2n {errs[n] / errs[2 * n]:.2f}")


if __name__ == "__main__":
    main()
