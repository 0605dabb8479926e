import csv
import math
from pathlib import Path

import pytest

import opcal

DATA = Path(__file__).resolve().parents[2] / "data" / "synthetic.csv"


def load_split():
    cal, aud = ([], []), ([], [])
    with DATA.open() as fh:
        for row in csv.DictReader(fh):
            dest = cal if float(row["split"]) < 0.5 else aud
            dest[0].append(float(row["p1"]))
            dest[1].append(int(row["y"]))
    return cal, aud


def test_grid_selection_matches_table():
    ssbc = [opcal.select_index("ssbc", 0.1, 0.1, n, "win:100")["u"] for n in (50, 100, 500)]
    assert ssbc == [2, 6, 34]
    dkwm = opcal.select_index("dkwm", 0.1, 0.1, 100, "win:100")
    assert dkwm["u"] == 1
    assert abs(dkwm["alpha_cont"] + 0.0224) < 1e-4
    assert opcal.select_index("ssbc", 0.01, 0.01, 20) is None
    assert opcal.window_success_threshold(0.1, 100) == 90


def test_distributions():
    total = sum(opcal.betabinom_pmf(x, 30, 2.5, 4.0) for x in range(31))
    assert total == pytest.approx(1.0, abs=1e-12)
    assert opcal.betabinom_cdf(30, 30, 2.5, 4.0) == pytest.approx(1.0)
    # Beta(1, 1) is uniform
    assert opcal.beta_cdf(0.3, 1.0, 1.0) == pytest.approx(0.3, abs=1e-14)
    lo, hi = opcal.predictive_interval(0.95, 100, 51.0, 451.0)
    assert 0 <= lo <= hi <= 100
    assert opcal.violation_probability(0.1, 100, 6, "win:100") == pytest.approx(0.0956, abs=1e-4)


def test_calibrate_and_tabulate():
    (p1, y), (ap1, ay) = load_split()
    cal = opcal.calibrate(p1, y)
    t = cal["thresholds"]
    table = opcal.tabulate(ap1, ay, t["tau0"], t["tau1"])
    assert table["n_total"] == len(ap1)
    assert sum(sum(cell) for cell in table["counts"].values()) == len(ap1)
    env = opcal.envelope_two_sample(40, 500, 100)
    assert env["lo"] <= 8 <= env["hi"]


def test_sweep_front_and_conservation():
    cal, aud = load_split()
    menu = opcal.sweep(cal, aud, alpha0=[0.05, 0.1, 0.2], delta0=0.1, alpha1=[0.05, 0.1, 0.2], delta1=0.1)
    points = menu["points"]
    assert points
    for p in points:
        assert sum(k["count"] for k in p["kpis"]) == p["table"]["n_total"]
    orientation = menu["orientation"]
    rates = [[k["rate"] for k in p["kpis"]] for p in points]
    flags = opcal.pareto_filter(rates, orientation)
    assert flags == [p["nondominated"] for p in points]
    loo = opcal.sweep(cal, None, alpha0=0.1, delta0=0.1, alpha1=0.1, delta1=0.1)
    assert loo["points"][0]["eval"] == "loo"
    with pytest.raises(opcal.OpcalError):
        opcal.sweep(cal, aud, alpha0=0.1, delta0=0.1, alpha1=0.1, delta1=0.1, bogus=1)


def test_geometry_and_simulation():
    assert opcal.coherent_action(0.5, 2.0, 2.0, 1.0) == ["commit0", "commit1", "reject"]
    assert opcal.coherent_action(0.9, 1.0, 1.0, 0.5) == ["commit1"]
    assert opcal.rejection_band_nonempty(1.0, 1.0, 0.5)
    assert not opcal.rejection_band_nonempty(1.0, 1.0, 0.6)
    assert opcal.coupling_closed_form(2, 1) == -0.25
    est = opcal.coupling_check(10, 5, 20000)
    assert abs(est["estimate"] - est["closed_form"]) <= 4 * est["se"]
    rows = opcal.coverage_study([100], 2000)
    assert [r["method"] for r in rows] == ["nominal", "ssbc", "dkwm"]
    for r in rows:
        se = math.sqrt(r["bb_theory"] * (1 - r["bb_theory"]) / 2000)
        assert abs(r["obs"] - r["bb_theory"]) <= 4 * se + 1e-12
