"""
Fractional-order operators and the PI^λD^μ controller.

Two representations are provided: the exact irrational frequency response
of ``s^α`` (principal branch), and a band-limited Oustaloup pole/zero
ladder that can be realized as an ordinary rational transfer function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lti import Polynomial, RationalTF

GAIN_BOUNDS = (0.0, 10.0)
ORDER_BOUNDS = (0.0, 2.0)


@dataclass(frozen=True)
class FopidParams:
    """Controller genome ``C(s) = Kp + Ki / s^lam + Kd s^mu``."""

    Kp: float
    Ki: float
    Kd: float
    lam: float = 1.0
    mu: float = 1.0

    @classmethod
    def pid(cls, Kp: float, Ki: float, Kd: float) -> FopidParams:
        return cls(Kp, Ki, Kd, 1.0, 1.0)

    @classmethod
    def from_genome(cls, genes) -> FopidParams:
        genes = [float(g) for g in genes]
        if len(genes) == 3:
            return cls.pid(*genes)
        if len(genes) == 5:
            return cls(*genes)
        raise ValueError(f"genome must have 3 or 5 genes, got {len(genes)}")

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.Kp, self.Ki, self.Kd, self.lam, self.mu)

    @property
    def is_pid(self) -> bool:
        return self.lam == 1.0 and self.mu == 1.0

    def within_bounds(self) -> bool:
        lo, hi = GAIN_BOUNDS
        olo, ohi = ORDER_BOUNDS
        return all(lo <= g <= hi for g in (self.Kp, self.Ki, self.Kd)) and all(
            olo <= o <= ohi for o in (self.lam, self.mu)
        )


@dataclass(frozen=True)
class OustaloupConfig:
    order: int = 5
    wb: float = 1e-2
    wh: float = 1e2

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("Oustaloup order must be >= 1")
        if not 0 < self.wb < self.wh:
            raise ValueError("need 0 < wb < wh")


def frac_pow_jw(alpha: float, omega):
    """``(jω)^α`` on the principal branch; accepts scalar or array ``omega``."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("omega must be positive")
    phase = alpha * math.pi / 2
    out = omega**alpha * complex(math.cos(phase), math.sin(phase))
    return complex(out) if out.ndim == 0 else out


def oustaloup_corners(alpha: float, cfg: OustaloupConfig) -> tuple[np.ndarray, np.ndarray, float]:
    """Zero corners, pole corners (rad/s) and gain of the ladder for ``|alpha| < 1``."""
    n = cfg.order
    k = np.arange(-n, n + 1)
    ratio = cfg.wh / cfg.wb
    zeros = cfg.wb * ratio ** ((k + n + 0.5 - alpha / 2) / (2 * n + 1))
    poles = cfg.wb * ratio ** ((k + n + 0.5 + alpha / 2) / (2 * n + 1))
    return zeros, poles, cfg.wh**alpha


def oustaloup(alpha: float, cfg: OustaloupConfig = OustaloupConfig()) -> RationalTF:
    """Rational approximation of ``s^alpha`` over ``[cfg.wb, cfg.wh]``.

    The integer part of ``alpha`` is realized exactly as a power of ``s``;
    only the fractional remainder in (-1, 1) goes through the ladder.
    Integer orders therefore come back exact.
    """
    n_int = int(math.trunc(alpha))
    frac = alpha - n_int
    if frac == 0.0:
        tf = RationalTF.gain(1.0)
    else:
        zeros, poles, gain = oustaloup_corners(frac, cfg)
        if not (np.all(zeros > 0) and np.all(poles > 0)):
            raise AssertionError("Oustaloup corners must be real and positive")
        tf = RationalTF(Polynomial.from_roots(-zeros, gain), Polynomial.from_roots(-poles))
    if n_int > 0:
        tf = RationalTF(tf.num * Polynomial([0.0] * n_int + [1.0]), tf.den)
    elif n_int < 0:
        tf = RationalTF(tf.num, tf.den * Polynomial([0.0] * (-n_int) + [1.0]))
    return tf


def oustaloup_freq(alpha: float, omega, cfg: OustaloupConfig = OustaloupConfig()):
    """Frequency response of :func:`oustaloup` evaluated factor by factor."""
    s = 1j * np.asarray(omega, dtype=float)
    n_int = int(math.trunc(alpha))
    frac = alpha - n_int
    out = s**n_int
    if frac != 0.0:
        zeros, poles, gain = oustaloup_corners(frac, cfg)
        out = out * gain * np.prod((s[..., None] + zeros) / (s[..., None] + poles), axis=-1)
    return out


def fopid_freq_oustaloup(p: FopidParams, omega, cfg: OustaloupConfig = OustaloupConfig()):
    """``C(jω)`` with each fractional branch replaced by its Oustaloup ladder."""
    omega = np.asarray(omega, dtype=float)
    out = np.full(omega.shape, p.Kp, dtype=complex)
    if p.Ki != 0.0:
        out = out + p.Ki * oustaloup_freq(-p.lam, omega, cfg)
    if p.Kd != 0.0:
        out = out + p.Kd * oustaloup_freq(p.mu, omega, cfg)
    return out


def _branch_exact(gain: float, alpha: float, omega):
    if gain == 0.0:
        return 0.0
    if alpha == 0.0:
        return gain
    return gain * frac_pow_jw(alpha, omega)


def fopid_freq_exact(p: FopidParams, omega):
    """Exact ``C(jω) = Kp + Ki (jω)^-λ + Kd (jω)^μ``.

    A zero gain drops its branch entirely, so ``Ki = 0`` never produces
    ``0 * inf`` at low frequency.
    """
    out = p.Kp + _branch_exact(p.Ki, -p.lam, omega) + _branch_exact(p.Kd, p.mu, omega)
    out = np.asarray(out, dtype=complex)
    if out.ndim == 0:
        return complex(out)
    return np.broadcast_to(out, np.shape(omega)).copy()


def fopid_to_rational(p: FopidParams, cfg: OustaloupConfig = OustaloupConfig()) -> RationalTF:
    """Oustaloup-realized controller combined over a common denominator."""
    tf = RationalTF.gain(p.Kp)
    for gain, alpha in ((p.Ki, -p.lam), (p.Kd, p.mu)):
        if gain == 0.0:
            continue
        branch = oustaloup(alpha, cfg).scaled(gain)
        tf = branch if tf.num.is_zero else tf + branch
    return tf
