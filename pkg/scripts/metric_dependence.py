"""Same planar field, two metrics: how far does the sublevel attraction estimate reach?

Under the hyperbolic metric the equilibrium A = (0, a) sees the whole
half-plane (r0 = inf), so geodesic balls of any radius are admissible.
With the flat metric the largest ball about A inside the half-plane has
radius a, and the estimator refuses r >= a.

    python3 scripts/metric_dependence.py [--a 1.0] [--radii 0.5 1 2 5]
"""
import argparse

from riemstab.errors import RangeError
from riemstab.lyapunov import PolarGrid, check_decrease, check_sandwich, estimate_doa
from riemstab.scenarios import build_example_euclidean, build_example_hyperbolic


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--a", type=float, default=1.0)
    ap.add_argument("--radii", type=float, nargs="+", default=[0.5, 0.99, 1.0, 2.0, 5.0])
    args = ap.parse_args()

    for build in (build_example_hyperbolic, build_example_euclidean):
        scn = build(a=args.a)
        grid = PolarGrid(n_radii=16, n_dirs=64, n_times=4)
        sand = check_sandwich(scn.candidate, scn.field, grid).verdict.value
        dec = check_decrease(scn.candidate, scn.field, grid).verdict.value
        print(f"{scn.template:>10}: r0 = {scn.field.domain_radius}, sandwich {sand}, decrease {dec}")
        for r in args.radii:
            try:
                est = estimate_doa(scn.candidate, scn.field, r)
                print(f"{'':>12}r = {r:<5g} c = {est.c:.6g}")
            except RangeError as exc:
                print(f"{'':>12}r = {r:<5g} rejected ({exc})")


if __name__ == "__main__":
    main()
