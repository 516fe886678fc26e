import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from avrtune.fractional import (
    FopidParams,
    OustaloupConfig,
    fopid_freq_exact,
    fopid_freq_oustaloup,
    fopid_to_rational,
    frac_pow_jw,
    oustaloup,
    oustaloup_corners,
    oustaloup_freq,
)
from avrtune.lti import eval_jw, poles

BAND = np.logspace(-1, 1, 41)


def db(x):
    return 20 * np.log10(np.abs(x))


class TestFracPow:
    def test_zero_order(self):
        assert frac_pow_jw(0.0, 7.0) == pytest.approx(1 + 0j)

    def test_differentiator(self):
        assert frac_pow_jw(1.0, 3.0) == pytest.approx(3j, abs=1e-15)

    def test_half_order(self):
        assert frac_pow_jw(0.5, 4.0) == pytest.approx(math.sqrt(2) * (1 + 1j), rel=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            frac_pow_jw(0.5, 0.0)

    @given(st.floats(-2, 2), st.floats(1e-3, 1e3))
    def test_inverse_pair(self, a, w):
        assert frac_pow_jw(a, w) * frac_pow_jw(-a, w) == pytest.approx(1.0, rel=1e-12)


class TestOustaloup:
    def test_zero_order_is_unity(self):
        tf = oustaloup(0.0)
        assert tf.num.coeffs == (1.0,) and tf.den.coeffs == (1.0,)

    def test_integer_orders_exact(self):
        assert eval_jw(oustaloup(1.0), 2.0) == pytest.approx(2j)
        assert eval_jw(oustaloup(-1.0), 2.0) == pytest.approx(-0.5j)

    def test_half_order_phase_at_unity(self):
        ph = math.degrees(np.angle(eval_jw(oustaloup(0.5), 1.0)))
        assert abs(ph - 45.0) <= 1.0

    def test_half_order_magnitude_band(self):
        ratio = np.abs(oustaloup(0.5).freqresp(BAND)) / BAND**0.5
        assert np.all((ratio >= 0.97) & (ratio <= 1.03))

    @pytest.mark.parametrize("alpha", [-0.8, -0.5, -0.3, 0.3, 0.5, 0.8])
    def test_band_magnitude(self, alpha):
        approx = oustaloup(alpha).freqresp(BAND)
        assert np.max(np.abs(db(approx) - db(frac_pow_jw(alpha, BAND)))) <= 0.5

    @pytest.mark.parametrize("alpha", [-0.8, -0.5, -0.3, 0.3, 0.5, 0.8])
    def test_band_phase(self, alpha):
        approx = oustaloup(alpha).freqresp(BAND)
        assert np.max(np.abs(np.degrees(np.angle(approx / frac_pow_jw(alpha, BAND))))) <= 2.0

    def test_ladder_matches_high_precision_product(self):
        mp = pytest.importorskip("mpmath")
        a, n, wb, wh = 0.8, 5, mp.mpf("0.01"), mp.mpf(100)
        for w in (0.1, 1.0, 10.0):
            s = 1j * mp.mpf(w)
            ref = wh**a
            for k in range(-n, n + 1):
                ref *= (s + wb * (wh / wb) ** ((k + n + 0.5 - a / 2) / (2 * n + 1))) / (
                    s + wb * (wh / wb) ** ((k + n + 0.5 + a / 2) / (2 * n + 1))
                )
            assert complex(oustaloup(a)(1j * w)) == pytest.approx(complex(ref), rel=1e-10)

    @given(st.floats(-0.99, 0.99).filter(lambda a: abs(a) > 1e-3))
    def test_corners_real_negative_poles(self, alpha):
        zeros, poles_, gain = oustaloup_corners(alpha, OustaloupConfig())
        assert np.all(zeros > 0) and np.all(poles_ > 0) and gain > 0
        p = poles(oustaloup(alpha))
        assert np.all(p.real < 0)
        np.testing.assert_allclose(np.abs(p.imag), 0, atol=1e-6 * np.max(np.abs(p)))

    @given(st.floats(-1.99, 1.99), st.floats(1e-2, 1e2))
    def test_factored_matches_expanded(self, alpha, w):
        a = oustaloup_freq(alpha, np.array([w]))[0]
        b = oustaloup(alpha).freqresp(np.array([w]))[0]
        assert a == pytest.approx(b, rel=1e-8)

    def test_above_unity_order_factored(self):
        # s^1.3 = s * s^0.3
        w = np.array([0.7, 2.0])
        np.testing.assert_allclose(oustaloup_freq(1.3, w), 1j * w * oustaloup_freq(0.3, w), rtol=1e-12)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            OustaloupConfig(order=0)
        with pytest.raises(ValueError):
            OustaloupConfig(wb=10, wh=1)


class TestFopid:
    def test_pure_proportional(self):
        assert fopid_freq_exact(FopidParams(1, 0, 0), 5.0) == pytest.approx(1 + 0j)

    def test_pure_integrator(self):
        assert fopid_freq_exact(FopidParams(0, 1, 0), 2.0) == pytest.approx(-0.5j)

    def test_zero_ki_no_dc_singularity(self):
        val = fopid_freq_exact(FopidParams(1.0, 0.0, 0.2, lam=1.5, mu=0.5), 1e-12)
        assert np.isfinite(val)

    def test_zero_orders_collapse_to_gain(self):
        assert fopid_freq_exact(FopidParams(1, 2, 3, 0, 0), 9.0) == pytest.approx(6 + 0j)

    @given(
        st.tuples(*[st.floats(0, 10)] * 3),
        st.floats(0, 2),
        st.floats(0, 2),
        st.floats(1e-2, 1e2),
        st.floats(0.1, 5),
    )
    def test_linear_in_gains(self, gains, lam, mu, w, c):
        p = FopidParams(*gains, lam, mu)
        q = FopidParams(*(c * g for g in gains), lam, mu)
        assert fopid_freq_exact(q, w) == pytest.approx(c * fopid_freq_exact(p, w), rel=1e-12, abs=1e-300)

    def test_rational_proportional(self):
        tf = fopid_to_rational(FopidParams(1, 0, 0))
        assert tf.num.coeffs == (1.0,) and tf.den.coeffs == (1.0,)

    def test_rational_single_derivative_branch(self):
        tf = fopid_to_rational(FopidParams(0, 0, 1))
        assert tf.num.coeffs == (0.0, 1.0) and tf.den.coeffs == (1.0,)

    def test_rational_matches_exact_mid_band(self):
        p = FopidParams(1.0, 1.0, 1.0, 0.5, 0.5)
        approx = eval_jw(fopid_to_rational(p), 1.0)
        exact = fopid_freq_exact(p, 1.0)
        assert abs(abs(approx) / abs(exact) - 1) <= 0.05
        assert abs(math.degrees(np.angle(approx / exact))) <= 3.0

    @given(st.tuples(*[st.floats(0, 10)] * 3, st.floats(0, 2), st.floats(0, 2)))
    def test_factored_controller_matches_rational(self, genes):
        p = FopidParams(*genes)
        w = np.logspace(-1, 1, 5)
        np.testing.assert_allclose(
            fopid_freq_oustaloup(p, w), fopid_to_rational(p).freqresp(w), rtol=1e-7, atol=1e-12
        )

    def test_genome_lengths(self):
        assert FopidParams.from_genome([1, 2, 3]).is_pid
        assert FopidParams.from_genome([1, 2, 3, 0.5, 1.5]).lam == 0.5
        with pytest.raises(ValueError):
            FopidParams.from_genome([1, 2])

    def test_bounds(self):
        assert FopidParams(10, 0, 5, 2, 0).within_bounds()
        assert not FopidParams(10.5, 0, 5, 1, 1).within_bounds()
        assert not FopidParams(1, 1, 1, 2.1, 1).within_bounds()
