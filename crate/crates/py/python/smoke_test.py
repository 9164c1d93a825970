"""Smoke test for the wigner_py extension module."""

import math

import wigner_py as w


def main():
    cfg = w.EnsembleConfig(60, sigma=1.0, theta=2.0, symmetry="complex", law="rademacher", seed=3)
    reg = cfg.regime()
    assert reg["label"] == "supercritical" and abs(reg["rho_theta"] - 2.5) < 1e-12

    vals = cfg.eigenvalues(0)
    assert len(vals) == 60 and vals == sorted(vals, reverse=True)
    assert vals == cfg.eigenvalues(0), "same seed and index must reproduce"
    m = cfg.matrix(0)
    tr = sum(m[i][i].real for i in range(60))
    assert abs(w.trace_power(vals, 1) - tr) < 1e-9

    assert w.count_trajectories(2, 1) == 5
    assert w.count_trajectories(40, 20) > 2**64
    assert w.enumerate_trajectories(1, 1) == ["UUD", "UDU"]
    path = [2, 1, 3, 4, 1, 2]
    image, k, p = w.to_marked_origin(path)
    assert w.from_marked_origin(image, k, p) == path
    assert w.trajectory_of(image).endswith("U")
    d = w.dyck_decompose("UDUUD")
    assert sum(d["rises"]) == 1 and d["class_t"] == [1, 1]
    pmf = w.max_level_distribution(6)
    assert abs(sum(pmf) - 1.0) < 1e-12

    assert w.gaussian_cdf(0.0, 0.0, 1.0) == 0.5
    assert w.semicircle_cdf(2.0) == 1.0
    assert w.ks_two_sample([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert w.ks_gaussian([0.0]) == 0.5

    exact = w.exact_trace_expectation(3, 4, theta=0.0, law="gaussian", symmetry="complex")
    assert abs(exact - (2 * 3 + 1 / 3)) < 1e-12
    pred = w.asymptotic_predictions(60, 2.0, 1.0, 10**6)
    assert 0.70 <= pred["marked_ratio"] <= 0.80

    rep = w.run_experiment("census", n=40, samples=4, theta=2, seed=1)
    assert rep["command"] == "census" and len(rep["records"]) > 0
    again = w.run_experiment("census", n=40, samples=4, theta=2, seed=1, threads=2)
    assert rep["records"] == again["records"]
    ora = w.run_experiment("oracle-compare", n=3, samples=4000, theta=2, power=[2, 3], seed=5)
    assert ora["passed"], ora["checks"]

    assert w.verify_combinatorics(empty=True)["passed"]
    bad = w.verify_combinatorics(empty=True, count_max_len=6, inject_fault=(1, 2))
    assert not bad["passed"]
    try:
        w.EnsembleConfig(0)
    except w.WignerError:
        pass
    else:
        raise AssertionError("n = 0 must be rejected")
    assert not math.isnan(w.tridiagonal_eigenvalues([0.0, 0.0], [1.0])[0])
    print("wigner_py smoke test passed")


if __name__ == "__main__":
    main()
