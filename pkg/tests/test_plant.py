import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from avrtune.errors import ConfigError
from avrtune.fractional import FopidParams, fopid_to_rational
from avrtune.margins import find_margins
from avrtune.nsga2 import evaluate
from avrtune.plant import (
    AvrParams,
    LoopResponse,
    build_blocks,
    effective_open_loop,
    exact_loop,
    oustaloup_loop,
    rational_closed_loop,
    rational_effective_open_loop,
)
from avrtune.lti import RationalTF

W = np.logspace(-2, 2, 50)
genes = st.tuples(*[st.floats(0.01, 10)] * 3, st.floats(0.05, 2), st.floats(0.05, 2))


class TestParams:
    def test_nominal_blocks(self):
        a, _, _, s = build_blocks(AvrParams())
        assert a.num.coeffs == (10.0,) and a.den.coeffs == (1.0, 0.1)
        assert s.num.coeffs == (1.0,) and s.den.coeffs == (1.0, 0.01)

    def test_unit_blocks(self):
        p = AvrParams(1, 1, 1, 1, 1, 1, 1, 1)
        for blk in build_blocks(p):
            assert blk.num.coeffs == (1.0,) and blk.den.coeffs == (1.0, 1.0)

    @pytest.mark.parametrize("key", ["Ka", "tauS", "Ke"])
    def test_rejects_nonpositive(self, key):
        with pytest.raises(ConfigError):
            AvrParams(**{key: 0.0})

    def test_dict_roundtrip(self):
        p = AvrParams(Ke=3.0)
        assert AvrParams.from_dict(p.to_dict()) == p
        with pytest.raises(ConfigError):
            AvrParams.from_dict({"Kx": 1.0})

    def test_exciter_multiplier(self):
        assert AvrParams().with_exciter_multiplier(12).Ke == 12.0

    def test_blocks_stable(self):
        for blk in build_blocks(AvrParams()):
            assert blk.den.coeffs[1] > 0


class TestEffectiveLoop:
    def test_ideal_sensor_collapses_to_forward(self):
        p = AvrParams(tauS=1e-9)
        loop = exact_loop(FopidParams(1.0, 0.5, 0.2), p)
        np.testing.assert_allclose(loop(W), loop.forward(W), rtol=1e-6)

    def test_hand_algebra(self):
        class Half(LoopResponse):
            pass

        loop = effective_open_loop(lambda w: np.ones_like(w, dtype=complex), AvrParams())
        # overwrite the blocks with constants: L = 1, S = 0.5
        loop._fwd = RationalTF.gain(1.0)
        loop._sensor = RationalTF.gain(0.5)
        w = np.array([1.0])
        assert loop.closed_loop(w)[0] == pytest.approx(1 / 1.5)
        assert loop(w)[0] == pytest.approx(2.0)

    @given(genes)
    def test_roundtrip_identity(self, g):
        loop = exact_loop(FopidParams(*g))
        G, Gcl = loop(W), loop.closed_loop(W)
        np.testing.assert_allclose(G / (1 + G), Gcl, rtol=1e-9)

    def test_dc_growth_with_integrator(self):
        loop = exact_loop(FopidParams(1.0, 0.4, 0.3, 0.6, 1.2))
        w = np.logspace(-7, -3, 30)
        mag = np.abs(loop(w))
        assert np.all(np.diff(mag) < 0)

    @pytest.mark.parametrize("topology", ["sensor", "literal"])
    def test_rational_matches_evaluator(self, topology):
        g = FopidParams(1.010187, 0.312872, 0.268934, 0.544849, 1.841675)
        loop = oustaloup_loop(g, topology=topology)
        np.testing.assert_allclose(loop.rational.freqresp(W), loop(W), rtol=1e-8)

    def test_zero_controller(self):
        tf = rational_effective_open_loop(RationalTF.gain(0.0))
        assert tf.num.is_zero

    def test_high_gain_closed_loop(self):
        tf = rational_closed_loop(RationalTF.gain(1e6))
        assert abs(tf(1j * 1e-3)) == pytest.approx(1.0, abs=1e-3)

    def test_table2_pid_row(self):
        m = find_margins(exact_loop(FopidParams.pid(0.059836, 0.055538, 0.345352)))
        assert m.wgc == pytest.approx(7.01888, rel=0.02)
        assert m.pm == pytest.approx(80.34, abs=1.0)

    def test_rational_closed_loop_matches_pointwise(self):
        g = FopidParams(0.8, 0.3, 0.2, 0.7, 1.3)
        c = fopid_to_rational(g)
        loop = oustaloup_loop(g)
        np.testing.assert_allclose(rational_closed_loop(c).freqresp(W), loop.closed_loop(W), rtol=1e-8)


class TestEvaluateRows:
    def test_d1(self):
        (wgc, pm), ok = evaluate((1.010187, 0.312872, 0.268934, 0.544849, 1.841675))
        assert ok and wgc == pytest.approx(48.87964, rel=0.05) and pm == pytest.approx(80.48, abs=2.0)

    def test_b2_pid(self):
        (wgc, pm), ok = evaluate((0.077937, 0.026848, 0.40557))
        assert ok and wgc == pytest.approx(8.0412, rel=0.02) and pm == pytest.approx(72.58, abs=1.0)

    def test_zero_genome_penalized(self):
        obj, ok = evaluate((0.0, 0.0, 0.0, 1.0, 1.0))
        assert not ok and obj == (-1e6, -1e6)
