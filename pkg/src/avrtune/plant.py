"""
AVR loop model: amplifier, exciter, generator and sensor first-order lags.

The margin tools work on the *effective* unity-feedback open loop

    G_cl = L / (1 + L S),   G_ol_eff = G_cl / (1 - G_cl) = L / (1 + L (S - 1))

with ``L = C A E G`` the forward path and ``S`` the sensor in the feedback
path. ``topology="literal"`` drops the sensor from the closed loop, which
collapses ``G_ol_eff`` to ``L``; it is kept only for table comparison.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from typing import Callable

import numpy as np

from .errors import ConfigError, SingularResponse
from .fractional import (
    FopidParams,
    OustaloupConfig,
    fopid_freq_exact,
    fopid_freq_oustaloup,
    fopid_to_rational,
)
from .lti import RationalTF, series

TOPOLOGIES = ("sensor", "literal")


@dataclass(frozen=True)
class AvrParams:
    Ka: float = 10.0
    tauA: float = 0.1
    Ke: float = 1.0
    tauE: float = 0.4
    Kg: float = 1.0
    tauG: float = 1.0
    Ks: float = 1.0
    tauS: float = 0.01

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ConfigError(f"AvrParams.{f.name} must be strictly positive")

    def with_exciter_multiplier(self, m: float) -> AvrParams:
        return replace(self, Ke=self.Ke * m)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> AvrParams:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown plant keys: {sorted(unknown)}")
        return cls(**d)


def _lag(k: float, tau: float) -> RationalTF:
    return RationalTF([k], [1.0, tau])


def build_blocks(p: AvrParams) -> tuple[RationalTF, RationalTF, RationalTF, RationalTF]:
    """Amplifier, exciter, generator and sensor transfer functions."""
    return (
        _lag(p.Ka, p.tauA),
        _lag(p.Ke, p.tauE),
        _lag(p.Kg, p.tauG),
        _lag(p.Ks, p.tauS),
    )


def plant_forward(p: AvrParams) -> RationalTF:
    a, e, g, _ = build_blocks(p)
    return series(series(a, e), g)


class LoopResponse:
    """Frequency-response evaluator for the effective open loop.

    Parameters
    ----------
    controller : callable
        Vectorized ``ω -> C(jω)``.
    plant : AvrParams
    topology : {"sensor", "literal"}
    rational : RationalTF, optional
        Rational realization of the same loop, when one exists.
    """

    def __init__(
        self,
        controller: Callable[[np.ndarray], np.ndarray],
        plant: AvrParams,
        topology: str = "sensor",
        rational: RationalTF | None = None,
    ):
        if topology not in TOPOLOGIES:
            raise ValueError(f"topology must be one of {TOPOLOGIES}")
        self.controller = controller
        self.plant = plant
        self.topology = topology
        self.rational = rational
        fwd = plant_forward(plant)
        _, _, _, sensor = build_blocks(plant)
        self._fwd = fwd
        self._sensor = sensor

    def forward(self, omega) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        return self.controller(omega) * self._fwd.freqresp(omega)

    def closed_loop(self, omega) -> np.ndarray:
        L = self.forward(omega)
        if self.topology == "literal":
            return L / (1.0 + L)
        return L / (1.0 + L * self._sensor.freqresp(omega))

    def __call__(self, omega) -> np.ndarray:
        L = self.forward(omega)
        if self.topology == "literal":
            return L
        S = self._sensor.freqresp(omega)
        den = 1.0 + L * (S - 1.0)
        return L / den

    def at(self, omega: float) -> complex:
        """Scalar evaluation that reports a vanishing ``1 - G_cl``."""
        L = complex(self.forward(np.array([omega]))[0])
        if self.topology == "literal":
            return L
        S = complex(self._sensor.freqresp(np.array([omega]))[0])
        den = 1.0 + L * (S - 1.0)
        if abs(den) <= 1e-14 * max(1.0, abs(L)):
            raise SingularResponse(f"1 - G_cl vanishes at omega={omega!r}")
        return L / den


def effective_open_loop(
    controller_response: Callable[[np.ndarray], np.ndarray],
    p: AvrParams = AvrParams(),
    topology: str = "sensor",
) -> LoopResponse:
    return LoopResponse(controller_response, p, topology)


def exact_loop(genome: FopidParams, p: AvrParams = AvrParams(), topology: str = "sensor") -> LoopResponse:
    """Effective open loop using the exact irrational controller response."""
    return LoopResponse(lambda w: fopid_freq_exact(genome, w), p, topology)


def rational_effective_open_loop(
    controller: RationalTF, p: AvrParams = AvrParams(), topology: str = "sensor"
) -> RationalTF:
    """``L / (1 + L (S - 1))`` expanded into one rational transfer function.

    With ``L = Ln/Ld`` and ``S = Sn/Sd`` this is
    ``Ln Sd / (Ld Sd + Ln (Sn - Sd))``.
    """
    L = series(controller, plant_forward(p))
    if L.num.is_zero:
        return RationalTF([0.0], [1.0])
    if topology == "literal":
        return L
    _, _, _, S = build_blocks(p)
    num = L.num * S.den
    den = L.den * S.den + L.num * (S.num - S.den)
    return RationalTF(num, den)


def rational_closed_loop(
    controller: RationalTF, p: AvrParams = AvrParams(), topology: str = "sensor"
) -> RationalTF:
    """Reference-to-terminal-voltage transfer function ``L / (1 + L S)``."""
    L = series(controller, plant_forward(p))
    _, _, _, S = build_blocks(p)
    back = S if topology == "sensor" else RationalTF.gain(1.0)
    return RationalTF(L.num * back.den, L.den * back.den + L.num * back.num)


def oustaloup_loop(
    genome: FopidParams,
    p: AvrParams = AvrParams(),
    cfg: OustaloupConfig = OustaloupConfig(),
    topology: str = "sensor",
) -> LoopResponse:
    """Effective open loop of the Oustaloup-realized controller.

    The evaluator multiplies the ladder factor by factor instead of going
    through the expanded polynomials; ``.rational`` carries the expanded form.
    """
    c = fopid_to_rational(genome, cfg)
    return LoopResponse(
        lambda w: fopid_freq_oustaloup(genome, w, cfg),
        p,
        topology,
        rational=rational_effective_open_loop(c, p, topology),
    )
