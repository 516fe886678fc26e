"""
Gain/phase margin extraction and Bode sampling for loop frequency responses.

A loop is anything callable on an array of frequencies returning ``G(jω)``,
or a :class:`~avrtune.lti.RationalTF`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NoGainCrossover
from .lti import RationalTF

W_MIN = 1e-4
W_MAX = 1e4
GRID_POINTS = 4001
# consecutive grid phases further apart than this get refined
_MAX_PHASE_STEP = np.deg2rad(45.0)
_MAX_REFINE = 12
CROSSING_RULES = ("min_pm", "highest")


@dataclass(frozen=True)
class Margins:
    wgc: float
    pm: float
    wpc: float | None = None
    gm_db: float = math.inf
    multiple_crossings: bool = False
    gain_crossings: tuple[tuple[float, float], ...] = field(default=(), compare=False)

    @property
    def stable_margins(self) -> bool:
        return self.pm > 0 and self.gm_db > 0


def _as_response(loop) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(loop, RationalTF):
        return loop.freqresp
    return loop


def _unwrapped_grid(G, wmin, wmax, n):
    """Log grid, response and continuously unwrapped phase, densified where needed."""
    w = np.logspace(math.log10(wmin), math.log10(wmax), n)
    g = np.asarray(G(w), dtype=complex)
    for _ in range(_MAX_REFINE):
        ph = np.unwrap(np.angle(g))
        bad = np.flatnonzero(np.abs(np.diff(ph)) > _MAX_PHASE_STEP)
        if bad.size == 0:
            break
        mids = np.sqrt(w[bad] * w[bad + 1])
        w = np.concatenate([w, mids])
        order = np.argsort(w)
        w = w[order]
        g = np.concatenate([g, np.asarray(G(mids), dtype=complex)])[order]
    ph = np.unwrap(np.angle(g))
    return w, g, ph


def _bisect_log(f, lo, hi, rtol=1e-9, max_iter=200):
    """Root of ``f`` in ``[lo, hi]`` (sign change assumed), bisecting in log ω."""
    flo = f(lo)
    for _ in range(max_iter):
        mid = math.sqrt(lo * hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi / lo - 1.0 < rtol:
            break
    return math.sqrt(lo * hi)


def _phase_near(g: complex, reference: float) -> float:
    """Angle of ``g`` shifted by a multiple of 2π to lie closest to ``reference``."""
    a = math.atan2(g.imag, g.real)
    return a + 2 * math.pi * round((reference - a) / (2 * math.pi))


def phase_margin_at(g: complex) -> float:
    """Angular distance in degrees from ``g`` to the negative real axis.

    Equals ``180 + arg g`` whenever ``arg g`` lies in [-180, 0].
    """
    return 180.0 - abs(math.degrees(math.atan2(g.imag, g.real)))


def find_margins(
    loop,
    wmin: float = W_MIN,
    wmax: float = W_MAX,
    n_points: int = GRID_POINTS,
    crossing: str = "highest",
) -> Margins:
    """Gain crossover, phase margin, phase crossover and gain margin.

    The phase margin at a crossing is the angle between ``G(jω)`` and the
    -1 point, ``180 - |arg G|`` on the principal branch. When ``|G|``
    crosses unity more than once, ``multiple_crossings`` is set and
    ``crossing`` picks the reported one: ``"highest"`` (default) takes the
    highest-frequency crossing, ``"min_pm"`` the one with the smallest
    phase margin. Every crossing is kept in ``gain_crossings``.
    Phase crossovers are the points where the unwrapped phase passes
    -180° (mod 360°); the one with the smallest gain margin is reported.

    Raises
    ------
    NoGainCrossover
        If ``|G(jω)|`` never crosses 1 on ``[wmin, wmax]``.
    """
    if not wmin < wmax:
        raise ValueError("need wmin < wmax")
    if crossing not in CROSSING_RULES:
        raise ValueError(f"crossing must be one of {CROSSING_RULES}")
    G = _as_response(loop)

    def g1(x):
        return complex(np.asarray(G(np.array([x])), dtype=complex)[0])

    w, g, ph = _unwrapped_grid(G, wmin, wmax, max(n_points, 2000))
    with np.errstate(divide="ignore"):
        logmag = np.log(np.abs(g))

    finite = np.isfinite(logmag)
    gains = []
    for i in np.flatnonzero(np.diff(np.sign(logmag)) != 0):
        if not (finite[i] and finite[i + 1]):
            continue
        wc = _bisect_log(lambda x: math.log(abs(g1(x))), w[i], w[i + 1])
        gains.append((wc, phase_margin_at(g1(wc))))
    if not gains:
        raise NoGainCrossover(f"|G| does not cross 1 on [{wmin:g}, {wmax:g}] rad/s")
    wgc, pm = gains[-1] if crossing == "highest" else min(gains, key=lambda c: c[1])

    # branch index k such that ph - (-pi + 2 pi k) changes sign
    branch = np.floor((ph + math.pi) / (2 * math.pi))
    phases = []
    for i in np.flatnonzero(np.diff(branch) != 0):
        target = -math.pi + 2 * math.pi * max(branch[i], branch[i + 1])
        ref = ph[i]
        wp = _bisect_log(lambda x: _phase_near(g1(x), ref) - target, w[i], w[i + 1])
        mag = abs(g1(wp))
        gm = -20.0 * math.log10(mag) if mag > 0 else math.inf
        phases.append((wp, gm))
    wpc, gm_db = min(phases, key=lambda c: c[1]) if phases else (None, math.inf)

    return Margins(
        wgc=wgc,
        pm=pm,
        wpc=wpc,
        gm_db=gm_db,
        multiple_crossings=len(gains) > 1,
        gain_crossings=tuple(gains),
    )


def bode_data(loop, wmin: float = 1e-2, wmax: float = 1e2, points_per_decade: int = 50):
    """``(omega, mag_db, phase_deg)`` rows on a log grid with unwrapped phase."""
    if points_per_decade < 1:
        raise ValueError("points_per_decade must be >= 1")
    G = _as_response(loop)
    n = int(round(points_per_decade * math.log10(wmax / wmin))) + 1
    w = np.logspace(math.log10(wmin), math.log10(wmax), max(n, 2))
    g = np.asarray(G(w), dtype=complex)
    mag_db = 20.0 * np.log10(np.abs(g))
    phase = np.degrees(np.unwrap(np.angle(g)))
    return [(float(a), float(b), float(c)) for a, b, c in zip(w, mag_db, phase)]
