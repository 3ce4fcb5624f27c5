"""Riemann problem with an index-one coefficient on the unit circle.

Run with ``python demos/riemann_index_one.py``.
"""

import numpy as np

from fracbvp.fractal import Sphere
from fracbvp.jump import SolutionVariant, smooth_example_g
from fracbvp.oracles import circle_index_one_oracle, index_one_coefficient, reduced_coordinate
from fracbvp.rbvp2d import CoefficientProblem, complex_to_even, solve_rbvp


def G(x):
    return complex_to_even(index_one_coefficient(reduced_coordinate(x)))


def main():
    problem = CoefficientProblem(Sphere(2), G, smooth_example_g(2), nu=1.0)
    print("index and conjugate index:", problem.index())
    sol = solve_rbvp(problem, SolutionVariant(), 2.0**-8, richardson=True)
    x = np.array([[0.1, 0.2], [-0.5, 0.3], [1.4, -0.6], [0.0, 2.2]])
    ref, X = circle_index_one_oracle(problem.g, x)
    print(f"relative error vs closed form: {np.abs(sol(x) - ref).max() / np.abs(ref).max():.2e}")
    print(f"canonical function error: {np.abs(sol.fine.canonical(x) - X).max() / np.abs(X).max():.2e}")
    rep = sol.fine.report
    print("conditions per branch:", rep["conditions_complex_per_branch"], "solvable:", rep["solvable"])


if __name__ == "__main__":
    main()
