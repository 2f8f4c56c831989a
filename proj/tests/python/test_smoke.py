import math

import pytest

import omegaflow as of

QUADRATIC = {"potential": {"kind": "quadratic"}}


def test_version_and_suites():
    assert of.__version__
    assert set(of.suite_names()) == {"ode", "transport", "evi", "contraction", "rates", "convexity", "appendix"}


def test_w2_of_translated_dirac():
    r = of.w2(of.atomic([0.0, 1.0]), of.atomic([2.0, 3.0]))
    assert r["distance"] == pytest.approx(2.0)
    assert r["cost"] == pytest.approx(4.0)


def test_proximal_step_closed_form():
    for a in (-2.0, 0.5, 3.0):
        r = of.proximal_step(QUADRATIC, of.atomic([a]), 0.25)
        assert r["measure"]["points"][0] == pytest.approx(a / 1.25, abs=1e-10)


def test_flow_records_every_step():
    traj = of.flow(QUADRATIC, of.atomic([1.0]), {"tau": 0.1, "steps": 4})
    assert len(traj["times"]) == 5
    assert traj["energies"][-1] < traj["energies"][0]


def test_lipschitz_flow_map_and_euler():
    m = of.lipschitz(1.0)
    assert of.flow_map(m, 0.5, 2.0) == pytest.approx(2.0 * math.exp(0.5))
    assert of.euler_iterate(m, 0.1, 3, 2.0) == pytest.approx(2.0 * 1.1**3)
    err = abs(of.flow_map(m, 1.0, 0.01) - of.euler_iterate(m, 0.01, 100, 0.01))
    assert err <= of.euler_error_bound(m, 1.0, 0.01, 100)


def test_schema_error_carries_pointer():
    with pytest.raises(of.SchemaError) as info:
        of.flow(QUADRATIC, of.atomic([1.0]), {"steps": 3})
    assert info.value.pointer.startswith("/cfg")
    assert isinstance(info.value, ValueError)


def test_quick_ode_suite_passes():
    reports = of.run_suite("ode", quick=True)
    assert reports and all(r["pass"] for r in reports)


def test_rate_study_dirac():
    s = of.rate_study(QUADRATIC, of.atomic([1.0]), 1.0, [8, 16, 32], 256, of.lipschitz(1.0))
    errors = [row["error"] for row in s["rows"]]
    assert errors == sorted(errors, reverse=True)
