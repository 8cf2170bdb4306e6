"""Smoke test of the compiled extension; run after `maturin develop`."""

import math

import supctrl


def main():
    assert supctrl.lse([0.0, 0.0], 1.0) == math.log(2.0)
    value, weights = supctrl.lie_window([0.0, 1.0, 0.5], 0.1, 10.0)
    assert 0.5 < value <= 1.0
    assert all(w >= 0.0 for w in weights)
    assert abs(0.1 * sum(weights) - 1.0) < 1e-12

    errors = supctrl.gradient_check(pairs=5, seed=3)
    assert len(errors) == 5 and max(errors) < 1e-6, errors

    assert abs(supctrl.nonexistence_objective(dt=1e-4) - 16.0 / 3.0) < 1e-3
    assert supctrl.nonexistence_objective(100.0, dt=1e-4) > 1.0

    run = supctrl.solve_tracking(dt=1e-2, k=1e3, tol=1e-5)
    assert len(run["t"]) == len(run["x"]) == len(run["lambda"])
    assert run["termination"] in ("Converged", "StepStall", "MaxIters")
    assert run["objective"] > 0.0

    try:
        supctrl.solve_tracking(dt=0.3)
    except ValueError:
        pass
    else:
        raise AssertionError("non-tiling step accepted")

    print("smoke test passed:", run["termination"], run["iterations"], "iterations")


if __name__ == "__main__":
    main()
