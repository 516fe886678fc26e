import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from avrtune.errors import NoGainCrossover
from avrtune.fractional import FopidParams
from avrtune.lti import RationalTF
from avrtune.margins import bode_data, find_margins, phase_margin_at
from avrtune.plant import exact_loop, oustaloup_loop


def _check_margin_invariants(loop, m):
    g = complex(np.asarray(loop(np.array([m.wgc])))[0]) if callable(loop) else loop(1j * m.wgc)
    assert abs(abs(g) - 1) <= 1e-6
    if m.wpc is not None:
        gp = complex(np.asarray(loop(np.array([m.wpc])))[0])
        # angle of G(j wpc) equals -180 modulo 360
        assert abs(abs(math.degrees(math.atan2(gp.imag, gp.real))) - 180) <= 1e-4
        assert m.gm_db == pytest.approx(-20 * math.log10(abs(gp)), abs=1e-9)


class TestAnalytic:
    def test_integrator(self):
        m = find_margins(RationalTF([5.0], [0.0, 1.0]))
        assert m.wgc == pytest.approx(5.0, rel=1e-9)
        assert m.pm == pytest.approx(90.0, abs=1e-9)
        assert m.wpc is None and m.gm_db == math.inf

    def test_third_order_lag(self):
        # K / (s + 1)^3 with K = 4: phase -180 at w = sqrt(3), |G| there = K/8
        tf = RationalTF([4.0], [1.0, 3.0, 3.0, 1.0])
        m = find_margins(tf)
        assert m.wpc == pytest.approx(math.sqrt(3), rel=1e-8)
        assert m.gm_db == pytest.approx(20 * math.log10(2.0), abs=1e-8)
        wgc = math.sqrt(4 ** (2 / 3) - 1)
        assert m.wgc == pytest.approx(wgc, rel=1e-8)
        assert m.pm == pytest.approx(180 - 3 * math.degrees(math.atan(wgc)), abs=1e-6)

    def test_no_crossover(self):
        with pytest.raises(NoGainCrossover):
            find_margins(RationalTF([0.5], [1.0, 1.0]))

    def test_zero_controller_no_crossover(self):
        with pytest.raises(NoGainCrossover):
            find_margins(exact_loop(FopidParams(0, 0, 0)))

    def test_bad_band(self):
        with pytest.raises(ValueError):
            find_margins(RationalTF([5.0], [0.0, 1.0]), wmin=10, wmax=1)

    def test_phase_margin_at(self):
        assert phase_margin_at(complex(0, -1)) == pytest.approx(90.0)
        assert phase_margin_at(complex(-1, 0)) == pytest.approx(0.0)
        # +90 deg phase is as far from -1 as -90 deg
        assert phase_margin_at(complex(0, 1)) == pytest.approx(90.0)


class TestTableRows:
    def test_pid_row(self):
        m = find_margins(exact_loop(FopidParams.pid(0.124406, 0.047737, 0.180737)))
        assert m.wgc == pytest.approx(3.40643, rel=0.02)
        assert m.pm == pytest.approx(112.82, abs=1.0)

    def test_fopid_last_row(self):
        m = find_margins(exact_loop(FopidParams(1.037678, 0.365733, 0.654623, 0.549738, 1.871652)))
        assert m.wgc == pytest.approx(111.1908, rel=0.05)
        assert m.pm == pytest.approx(48.28, abs=2.0)


class TestCrossingRules:
    B1 = FopidParams(0.963224, 0.359946, 0.281638, 0.549116, 1.830795)

    def test_multiple_crossings_flagged(self):
        m = find_margins(exact_loop(self.B1))
        assert m.multiple_crossings and len(m.gain_crossings) == 3

    def test_highest_rule(self):
        m = find_margins(exact_loop(self.B1), crossing="highest")
        assert m.wgc == max(w for w, _ in m.gain_crossings)

    def test_min_pm_rule(self):
        m = find_margins(exact_loop(self.B1), crossing="min_pm")
        assert m.pm == min(p for _, p in m.gain_crossings)

    def test_unknown_rule(self):
        with pytest.raises(ValueError):
            find_margins(exact_loop(self.B1), crossing="first")


genes = st.tuples(
    st.floats(0.05, 3), st.floats(0.05, 3), st.floats(0.05, 1), st.floats(0.3, 1.5), st.floats(0.3, 1.9)
)


@given(genes)
def test_margin_invariants_random_loops(g):
    loop = exact_loop(FopidParams(*g))
    try:
        m = find_margins(loop)
    except NoGainCrossover:
        return
    _check_margin_invariants(loop, m)
    for w, pm in m.gain_crossings:
        assert abs(abs(loop(np.array([w]))[0]) - 1) <= 1e-6


@given(st.floats(0.2, 20), st.floats(0.05, 2), st.floats(1.05, 4))
def test_gain_scaling_increases_wgc(k, tau, c):
    # k / (s (1 + tau s)) has a single crossing with decreasing |G|
    base = RationalTF([k], [0.0, 1.0, tau])
    m1 = find_margins(base)
    m2 = find_margins(base.scaled(c))
    assert not m1.multiple_crossings
    assert m2.wgc > m1.wgc


@pytest.mark.parametrize(
    "g",
    [
        FopidParams(1.010187, 0.312872, 0.268934, 0.544849, 1.841675),
        FopidParams(0.408042, 0.374094, 0.17736, 0.682778, 1.333686),
        FopidParams.pid(0.059836, 0.055538, 0.345352),
    ],
)
def test_representation_independence(g):
    loop = oustaloup_loop(g)
    a = find_margins(loop)
    b = find_margins(loop.rational)
    assert b.wgc == pytest.approx(a.wgc, rel=1e-8)
    assert b.pm == pytest.approx(a.pm, rel=1e-8)


class TestBode:
    def test_first_order(self):
        rows = bode_data(RationalTF([1.0], [1.0, 1.0]), 0.1, 10, 10)
        w = np.array([r[0] for r in rows])
        i = int(np.argmin(np.abs(w - 1)))
        assert rows[i][1] == pytest.approx(-3.0103, abs=1e-4)
        assert rows[i][2] == pytest.approx(-45.0, abs=1e-9)

    def test_constant(self):
        rows = bode_data(RationalTF.gain(10.0))
        assert all(r[1] == pytest.approx(20.0) and r[2] == 0.0 for r in rows)

    def test_rows_match_loop_response(self):
        loop = exact_loop(FopidParams.pid(0.059836, 0.055538, 0.345352))
        rows = bode_data(loop, 1e-2, 1e2, 20)
        w = np.array([r[0] for r in rows])
        g = np.asarray(loop(w))
        np.testing.assert_allclose([r[1] for r in rows], 20 * np.log10(np.abs(g)), atol=1e-9)
        wrapped = np.angle(np.exp(1j * np.radians([r[2] for r in rows])))
        np.testing.assert_allclose(np.exp(1j * wrapped), g / np.abs(g), atol=1e-9)

    def test_grid_size(self):
        assert len(bode_data(RationalTF.gain(1.0), 1e-2, 1e2, 50)) == 201

    def test_rejects_zero_density(self):
        with pytest.raises(ValueError):
            bode_data(RationalTF.gain(1.0), points_per_decade=0)
