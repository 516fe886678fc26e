"""
Polynomial and rational transfer-function arithmetic for SISO LTI blocks.

Coefficients are stored in ascending powers of ``s``; ``[1, 0.1]`` is
``1 + 0.1 s``. No pole-zero cancellation is ever attempted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import ConvergenceFailure, DegenerateLoop, PoleOnAxis

_EPS = np.finfo(float).eps


def _normalize(coeffs) -> tuple[float, ...]:
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if c.ndim != 1:
        raise ValueError("coefficients must be one-dimensional")
    if not np.all(np.isfinite(c)):
        raise ValueError("coefficients must be finite")
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return (0.0,)
    return tuple(float(v) for v in c[: nz[-1] + 1])


@dataclass(frozen=True)
class Polynomial:
    """Real polynomial in ``s`` with ascending-power coefficients."""

    coeffs: tuple[float, ...]

    def __init__(self, coeffs: Sequence[float] | np.ndarray | float):
        object.__setattr__(self, "coeffs", _normalize(coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs == (0.0,)

    def __call__(self, s):
        return P.polyval(s, np.asarray(self.coeffs))

    def __add__(self, other: Polynomial) -> Polynomial:
        return Polynomial(P.polyadd(self.coeffs, other.coeffs))

    def __sub__(self, other: Polynomial) -> Polynomial:
        return Polynomial(P.polysub(self.coeffs, other.coeffs))

    def __mul__(self, other: Polynomial | float) -> Polynomial:
        if isinstance(other, Polynomial):
            return Polynomial(P.polymul(self.coeffs, other.coeffs))
        return Polynomial(np.asarray(self.coeffs) * float(other))

    __rmul__ = __mul__

    def __neg__(self) -> Polynomial:
        return Polynomial(-np.asarray(self.coeffs))

    @classmethod
    def from_roots(cls, roots, gain: float = 1.0) -> Polynomial:
        c = P.polyfromroots(np.asarray(roots, dtype=complex))
        return cls(gain * np.real(c))

    def scale(self, s) -> np.ndarray:
        """Sum of ``|c_k| |s|^k``: the magnitude a cancellation-free sum would have."""
        return P.polyval(np.abs(s), np.abs(np.asarray(self.coeffs)))


@dataclass(frozen=True)
class RationalTF:
    """Ratio ``num(s) / den(s)`` of two real polynomials."""

    num: Polynomial
    den: Polynomial

    def __init__(self, num, den=(1.0,)):
        num = num if isinstance(num, Polynomial) else Polynomial(num)
        den = den if isinstance(den, Polynomial) else Polynomial(den)
        if den.is_zero:
            raise DegenerateLoop("denominator is the zero polynomial")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @classmethod
    def gain(cls, k: float) -> RationalTF:
        return cls([k], [1.0])

    @property
    def order(self) -> int:
        return self.den.degree

    @property
    def is_proper(self) -> bool:
        return self.num.is_zero or self.num.degree <= self.den.degree

    def __call__(self, s):
        return self.num(s) / self.den(s)

    def freqresp(self, omega) -> np.ndarray:
        """Vectorized ``H(jω)`` without the pole guard of :func:`eval_jw`."""
        s = 1j * np.asarray(omega, dtype=float)
        return self.num(s) / self.den(s)

    def dc_gain(self) -> float:
        if self.den.coeffs[0] == 0.0:
            return float("inf")
        return self.num.coeffs[0] / self.den.coeffs[0]

    def __mul__(self, other: RationalTF) -> RationalTF:
        return series(self, other)

    def __add__(self, other: RationalTF) -> RationalTF:
        return RationalTF(
            self.num * other.den + other.num * self.den, self.den * other.den
        )

    def scaled(self, k: float) -> RationalTF:
        return RationalTF(self.num * k, self.den)


def eval_jw(tf: RationalTF, omega: float) -> complex:
    """Evaluate ``tf`` at ``s = jω``.

    Raises
    ------
    PoleOnAxis
        If ``|den(jω)|`` is indistinguishable from zero at working precision.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    s = 1j * omega
    d = tf.den(s)
    if abs(d) <= 64 * _EPS * tf.den.scale(s):
        raise PoleOnAxis(f"denominator vanishes at omega={omega!r}")
    return complex(tf.num(s) / d)


def series(a: RationalTF, b: RationalTF) -> RationalTF:
    return RationalTF(a.num * b.num, a.den * b.den)


def feedback(forward: RationalTF, back: RationalTF | None = None) -> RationalTF:
    """Negative feedback ``forward / (1 + forward * back)``; unity when ``back`` is None."""
    if back is None:
        back = RationalTF.gain(1.0)
    num = forward.num * back.den
    den = forward.den * back.den + forward.num * back.num
    if den.is_zero:
        raise DegenerateLoop("closed-loop denominator is identically zero")
    return RationalTF(num, den)


def root_residual(poly: Polynomial, roots) -> float:
    """Largest relative residual ``|p(r)| / sum|c_k||r|^k`` over ``roots``."""
    roots = np.asarray(roots, dtype=complex)
    if roots.size == 0:
        return 0.0
    scale = poly.scale(roots)
    res = np.abs(poly(roots))
    return float(np.max(np.where(scale > 0, res / np.where(scale > 0, scale, 1.0), res)))


def poles(tf: RationalTF, tol: float = 1e-8, polish_steps: int = 3) -> np.ndarray:
    """Roots of the denominator via companion-matrix eigenvalues.

    The denominator is made monic first. Isolated roots get a few Newton
    polishing steps; members of a near-multiple cluster are left alone,
    since polishing them one by one breaks the symmetric error pattern that
    keeps the cluster's elementary symmetric functions accurate. A residual
    above ``tol`` raises :class:`ConvergenceFailure`.
    """
    den = tf.den
    if den.degree < 1:
        raise ValueError("denominator degree must be at least 1")
    c = np.asarray(den.coeffs) / den.coeffs[-1]
    roots = P.polyroots(c).astype(complex)
    dc = P.polyder(c)
    gaps = np.abs(roots[:, None] - roots[None, :]) + np.diag(np.full(len(roots), np.inf))
    isolated = np.min(gaps, axis=1) > 1e-3 * np.maximum(1.0, np.abs(roots))
    for _ in range(polish_steps):
        d = P.polyval(roots, dc)
        ok = (np.abs(d) > 0) & isolated
        step = np.zeros_like(roots)
        step[ok] = P.polyval(roots[ok], c) / d[ok]
        cand = roots - step
        # accept only steps that shrink the residual
        better = np.abs(P.polyval(cand, c)) < np.abs(P.polyval(roots, c))
        roots = np.where(better, cand, roots)
    res = root_residual(Polynomial(c), roots)
    if res > tol:
        raise ConvergenceFailure(f"root residual {res:.3e} exceeds {tol:.1e}")
    return roots


def stability(roots, tol: float = 1e-9) -> str:
    """Classify a pole set as ``"stable"``, ``"marginal"`` or ``"unstable"``."""
    re = np.real(np.asarray(roots, dtype=complex))
    if re.size == 0 or np.all(re < -tol):
        return "stable"
    if np.any(re > tol):
        return "unstable"
    return "marginal"
