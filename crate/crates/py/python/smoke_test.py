"""Smoke test for the nhsq_py extension.

Build and install first:  pip install --no-build-isolation -e crates/py
"""

import math

import nhsq_py


def main():
    mu = nhsq_py.CantorMeasure(m=0.4, c=16.0, depth=6)
    assert mu.depth == 6
    assert math.isclose(mu.interval_mass(0.0, 1.0), 1.0, rel_tol=1e-12)
    leaves = mu.nodes_at(2)
    assert len(leaves) == 16
    assert math.isclose(sum(mass for _, _, mass in leaves), 1.0, rel_tol=1e-12)

    s1 = mu.conical_series(1.0, 10)
    assert len(s1["terms"]) == 11 and all(t >= 0 for t in s1["terms"])
    sv = mu.vertical_series(10)
    assert sv["alpha"] is None
    assert mu.growth_constant(samples=2000, seed=1)["ratio"] <= 4.0

    f = nhsq_py.LogProduct("demo", 3)
    m1 = f.log_moment(1)
    m4 = f.log_moment(4)
    assert m1[2] > 0 and m4[2] > 0
    assert all(nhsq_py.LogProduct("paper", 4).divergence_witness(n) for n in range(1, 5))

    grid = nhsq_py.ShiftedGrid(seed=3, i_min=-12, i_max=4)
    index, left, right = grid.locate(0.3, 2)
    assert left <= 0.3 < right and math.isclose(right - left, 0.25)
    assert grid.classify(0, 0, cutoff=12)["class"] in {"good", "bad", "undetermined"}

    pi = nhsq_py.estimate_pi_good(trials=400, seed=1, cutoff=12)
    assert 0.0 < pi["primary"]["estimate"] <= 1.0

    assert "aperture" in nhsq_py.list_experiments()
    report = nhsq_py.run_experiment("vertical", "generations = 12")
    assert report["config"]["generations"] == 12
    assert all(v["passed"] for v in report["verdicts"])

    try:
        nhsq_py.run_experiment("nope")
    except ValueError as e:
        assert "nope" in str(e)
    else:
        raise AssertionError("unknown experiment accepted")

    print("nhsq_py smoke test passed")


if __name__ == "__main__":
    main()
