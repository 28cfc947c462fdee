"""Smoke test for the Python bindings.

Build and run from the workspace root:

    cargo build --release -p scenred-py --features extension-module
    cp target/release/libscenred_py.so python/scenred.so
    python3 python/smoke_test.py
"""

import json
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import scenred  # noqa: E402


def main():
    assert "example1" in scenred.BUILTINS
    problem = scenred.Problem.builtin("example1").enumerate()
    assert len(problem) == 100 and (problem.n, problem.m) == (2, 2)
    assert math.isclose(sum(problem.probabilities()), 1.0)

    coords = scenred.compute_coordinates(problem, threads=2)
    assert len(coords) == 100
    assert all(c.kappa <= c.sigma + 1e-7 for c in coords)
    assert scenred.coordinates_csv(coords).startswith("k,kappa,sigma,status\n")

    full = scenred.solve(problem)
    assert abs(full.nu - 231.2) <= 1e-9 and full.x_star == [70.0, 30.0]
    assert (full.variables, full.constraints) == (202, 201)

    grid = scenred.cluster(problem, coords, 28.8)
    reduced = scenred.solve(problem, grid)
    assert reduced.variables == 2 + 2 * len(grid.representatives)
    assert abs(reduced.nu - full.nu) <= grid.beta_prime
    assert json.loads(grid.to_json())["K"] == 100

    again = scenred.Problem.from_json(problem.to_json())
    assert len(again) == 100

    sampled = scenred.Problem.builtin("example1").sample(50, seed=3)
    assert len(sampled) == 50 and sampled.to_json() == scenred.Problem.builtin("example1").sample(50, seed=3).to_json()

    try:
        scenred.Problem.builtin("nope")
    except scenred.ScenredError as e:
        assert "nope" in str(e)
    else:
        raise AssertionError("unknown builtin accepted")

    try:
        scenred.solve(scenred.Problem.builtin("example1"))
    except scenred.ScenredError:
        pass
    else:
        raise AssertionError("solve without scenarios accepted")

    print(f"ok: nu = {full.nu}, {len(grid.representatives)} representatives at delta 28.8, nu~ = {reduced.nu}")


if __name__ == "__main__":
    main()
