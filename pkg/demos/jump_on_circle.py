"""Solve a jump problem on the unit circle and compare with the complex oracle.

Run with ``python demos/jump_on_circle.py``.
"""

import numpy as np

from fracbvp.fractal import Sphere
from fracbvp.jump import JumpProblem, SolutionVariant, jump_residual, smooth_example_g, solve
from fracbvp.oracles import circle_jump_oracle


def main():
    problem = JumpProblem(2, Sphere(2), smooth_example_g(2), nu=1.0)
    x = np.array([[0.0, 0.0], [0.4, -0.3], [1.5, 0.2], [-2.0, 1.0]])
    ref = circle_jump_oracle(problem.g, x)
    for h in (2.0**-7, 2.0**-8, 2.0**-9):
        sol = solve(problem, SolutionVariant("inner", "outer"), h)
        err = np.abs(sol(x) - ref).max() / np.abs(ref).max()
        print(f"h = 2^{int(np.log2(h))}: relative error {err:.2e}")
    sol = solve(problem, SolutionVariant(), 2.0**-8, richardson=True)
    print(f"extrapolated from 2^-8 and 2^-7: {np.abs(sol(x) - ref).max() / np.abs(ref).max():.2e}")
    res = jump_residual(sol, eps=0.05, n_probes=64)
    print(f"jump residual {res['max']:.2e} (raw offset value {res['raw_max']:.2e})")


if __name__ == "__main__":
    main()
