"""Heat flow of a shifted Gaussian: each extra moment order buys t^(-1/2).

Prints the L1 error of the order-k moment expansion at a few times, and the
fitted decay slope per order.
"""

import numpy as np

from parabolic_asymptotics import Grid, SolveConfig, gauss_field, make_zero, solve
from parabolic_asymptotics.expansion import build_Un
from parabolic_asymptotics.rates import fit_slope, measure_error_series


def main():
    grid = Grid.default(1)
    phi = gauss_field(grid, 1.0, shift=[1.5]) + gauss_field(grid, 0.5, mass=-0.3, shift=[-1.0])
    traj = solve(make_zero(), phi, SolveConfig(horizon=100.0))
    print(f"{'K':>3} {'t=10':>12} {'t=50':>12} {'t=100':>12} {'slope':>8}")
    for K in range(4):
        series = measure_error_series(traj, build_Un(traj, make_zero(), float(K), 0))
        row = [series.values[np.argmin(np.abs(series.times - t))] for t in (10, 50, 100)]
        slope = fit_slope(series, (10, 100))
        print(f"{K:>3} " + " ".join(f"{v:12.4e}" for v in row) + f" {slope:8.3f}")
    # expected slopes: -(K + 1)/2


if __name__ == "__main__":
    main()
