"""Smoke test for the Python bindings: run after installing the wheel."""

import math

import leo_noma


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    cfg = leo_noma.default_config()
    assert cfg["num_satellites"] == 600

    cov = leo_noma.coverage(n=3, ordering="isinr", pa="erpa", theta_db=-5.0)
    per_ut = cov["per_ut"]
    assert len(per_ut) == 3 and all(0.0 <= p <= 1.0 for p in per_ut)
    assert per_ut[0] >= per_ut[1] >= per_ut[2]

    # a single user with full power is just OMA
    single = leo_noma.sum_se(n=1, pa=[1.0], theta_db=-3.0)
    oma = leo_noma.sum_se(n=1, pa=[1.0], theta_db=-3.0, oma=True)
    assert close(single["sum_se"], oma["sum_se"], 1e-12)

    sim = leo_noma.simulate(n=3, ordering="isinr", pa="erpa", theta_db=-5.0, trials=20_000, seed=7)
    for analytic, mc, se in zip(per_ut, sim["noma"]["per_ut"], sim["noma"]["std_errors"]):
        assert abs(analytic - mc) < max(0.02, 4 * se), (analytic, mc)
    again = leo_noma.simulate(n=3, ordering="isinr", pa="erpa", theta_db=-5.0, trials=20_000, seed=7)
    assert again["noma"]["per_ut"] == sim["noma"]["per_ut"]

    best = leo_noma.optimize(-3.0, ordering="msp", counts=[2, 3], step=0.1)
    assert best["n"] in (2, 3) and best["best"]["sum_se"] > 0.0
    assert math.isclose(sum(best["best"]["pa"]), 1.0, rel_tol=1e-9)

    try:
        leo_noma.coverage(config={**cfg, "pathloss_exponent": 1.5})
    except ValueError as e:
        assert str(e).startswith("config"), e
    else:
        raise AssertionError("invalid config accepted")

    print("python smoke test: OK")


if __name__ == "__main__":
    main()
