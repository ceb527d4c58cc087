"""Smoke test for the powergame extension module.

Build and install first:
    maturin build --release -o dist && pip install dist/powergame-*.whl
then run:
    python python/smoke_test.py
"""

import math

import powergame as pg


def close(a, b, rel=1e-9):
    return math.isclose(a, b, rel_tol=rel, abs_tol=0.0)


def main():
    # Two devices, hand-computed SINR.
    s = pg.Scenario([1e-3, 2e-3], noise_power=1e-9, p_max=0.1)
    p = [0.01, 0.02]
    assert close(s.interference(p, 0), 1e-9 + 0.02 * 2e-3)
    assert close(s.sinr(p, 0), 0.01 * 1e-3 / (1e-9 + 0.02 * 2e-3))
    assert len(s.sinr_all(p)) == 2

    # SINR 5 for both is infeasible without processing gain: both stay capped.
    free = pg.GameParams(price=0.0)
    capped = pg.run(s, free, rule="unpriced")
    assert capped.final_powers == [0.1, 0.1]

    # With gain 16 the unpriced rule settles every device on the target.
    s16 = pg.Scenario([1e-3, 2e-3], noise_power=1e-9, p_max=0.1, processing_gain=16.0)
    res = pg.run(s16, free, rule="unpriced")
    assert res.converged, res
    assert all(close(g, 5.0, 1e-6) for g in res.final_sinrs), res.final_sinrs
    assert len(res.trace_powers) == res.iterations_used and res.trace_powers[-1] == res.final_powers

    # The power-aware SINR term moves the fixed point to target / (alpha * target + 1).
    shifted = pg.GameParams(alpha=0.02, price=0.0)
    assert close(shifted.effective_target(), 5.0 / 1.1)

    # Generated scenario with defaults: 20 devices, processing gain 128.
    g = pg.ScenarioSpec(seed=3).generate()
    assert g.n == 20 and g.kinds.count("cellular") == 2
    unpriced = pg.run(g, free, rule="unpriced")
    ne, worst, _ = pg.is_nash_equilibrium(g, unpriced.final_powers, free)
    assert ne and worst < 1e-9

    bumped = list(unpriced.final_powers)
    bumped[4] *= 2
    ne, _, dev = pg.is_nash_equilibrium(g, bumped, free)
    assert not ne and dev[0] == 4 and dev[2] < dev[1]

    report = pg.check_standard_function(g, free, rule="unpriced", samples=200)
    assert report["all_ok"], report

    rows, det, scaled, nonsingular = pg.jacobian(g, unpriced.final_powers, free)
    assert nonsingular and len(rows) == 20 and abs(rows[0][0] + 1.0) < 1e-6

    priced = pg.run(g, pg.GameParams(), rule="priced")
    assert priced.mean_power < unpriced.mean_power

    spec = pg.ScenarioSpec(n_devices=8, n_cellular=1)
    table = pg.compare(["priced", "cdpc"], spec=spec, repetitions=3)
    assert [r["rule"] for r in table] == ["priced", "cdpc"]
    rows = pg.sweep("alpha", [0.0, 0.5], spec=spec, params=free, rule="unpriced", repetitions=2)
    assert len(rows) == 4 and rows[0]["axis"] == "alpha"

    assert "koskie-gajic" in pg.rules()
    for bad in (lambda: pg.GameParams(alpha=1.0), lambda: pg.run(g, rule="norm2"), lambda: s.sinr(p, 5)):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")

    print("powergame smoke test passed")


if __name__ == "__main__":
    main()
