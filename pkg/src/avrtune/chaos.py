"""
Deterministic uniform sources on [0, 1] for the evolutionary operators.

``HenonSource`` and ``LogisticSource`` iterate chaotic maps; ``UniformSource``
wraps numpy's PCG64 as the conventional baseline. Every source is a
single-consumer stateful object: do not share one across threads.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, Divergence

logger = logging.getLogger(__name__)

HENON_Y_MIN = -0.3854
HENON_Y_MAX = 0.3819
LOGISTIC_X0 = 0.2027
# nudge applied when the logistic map lands on 0, 1 or a fixed/periodic point
_LOGISTIC_NUDGE = 1e-9
_LOGISTIC_TRAPS = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass
class HenonState:
    x: float = 0.0
    y: float = 0.0
    a: float = 1.4
    b: float = 0.3


@dataclass
class LogisticState:
    x: float = LOGISTIC_X0
    a: float = 4.0


def henon_next(state: HenonState) -> tuple[HenonState, float]:
    """One Henon step; the new ``y`` is mapped affinely onto [0, 1] and clamped."""
    if abs(state.x) > 10 or abs(state.y) > 10:
        raise Divergence(f"Henon state left the attractor basin: {state}")
    x = state.y + 1.0 - state.a * state.x * state.x
    y = state.b * state.x
    u = (y - HENON_Y_MIN) / (HENON_Y_MAX - HENON_Y_MIN)
    return HenonState(x, y, state.a, state.b), min(1.0, max(0.0, u))


def logistic_next(state: LogisticState) -> tuple[LogisticState, float]:
    """``x <- a x (1 - x)``, emitting the new ``x``.

    With ``a = 4`` the orbit can collapse onto 0 or stick at 0.75 in floating
    point; such values are nudged back into the open interval.
    """
    x = state.x
    if not 0.0 < x < 1.0:
        raise Divergence(f"logistic state outside (0, 1): {x!r}")
    new = state.a * x * (1.0 - x)
    if new in _LOGISTIC_TRAPS or not 0.0 < new < 1.0:
        nudged = min(max(new, _LOGISTIC_NUDGE), 1.0 - _LOGISTIC_NUDGE)
        if nudged in _LOGISTIC_TRAPS:
            nudged += _LOGISTIC_NUDGE
        logger.debug("logistic map hit %r, perturbed to %r", new, nudged)
        new = nudged
    assert 0.0 < new < 1.0
    return LogisticState(new, state.a), new


class ChaoticSource:
    """Base class: stateful generator of uniforms on [0, 1]."""

    kind = "abstract"
    seed = 0

    def next_uniform(self) -> float:
        raise NotImplementedError

    def uniforms(self, n: int) -> np.ndarray:
        return np.array([self.next_uniform() for _ in range(n)])

    def describe(self) -> dict:
        raise NotImplementedError


class HenonSource(ChaoticSource):
    kind = "henon"

    def __init__(self, state: HenonState | None = None):
        self.state = state or HenonState()
        self._initial = HenonState(**vars(self.state))

    def next_uniform(self) -> float:
        self.state, u = henon_next(self.state)
        return u

    def describe(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "initial_state": vars(self._initial)}


class LogisticSource(ChaoticSource):
    kind = "logistic"

    def __init__(self, state: LogisticState | None = None):
        self.state = state or LogisticState()
        self._initial = LogisticState(**vars(self.state))

    def next_uniform(self) -> float:
        self.state, u = logistic_next(self.state)
        return u

    def describe(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "initial_state": vars(self._initial)}


class UniformSource(ChaoticSource):
    """Seeded PCG64 stream; the non-chaotic comparison arm."""

    kind = "uniform"

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self._rng = np.random.Generator(np.random.PCG64(self.seed))

    def next_uniform(self) -> float:
        return float(self._rng.random())

    def describe(self) -> dict:
        return {"kind": self.kind, "seed": self.seed}


# warm-up iterations per unit of seed for the chaotic maps
SEED_STRIDE = 1009


def make_source(kind: str, seed: int = 0) -> ChaoticSource:
    """Build a source by name.

    The chaotic maps always start from their fixed initial state; a nonzero
    ``seed`` discards ``seed * SEED_STRIDE`` iterates first so replicate
    runs see different stretches of the orbit. ``seed=0`` is the plain
    orbit with no discard.
    """
    if seed < 0:
        raise ConfigError("seed must be non-negative")
    if kind == "uniform":
        return UniformSource(seed)
    if kind == "henon":
        src: ChaoticSource = HenonSource()
    elif kind == "logistic":
        src = LogisticSource()
    else:
        raise ConfigError(f"unknown source kind {kind!r}")
    for _ in range(seed * SEED_STRIDE):
        src.next_uniform()
    src.seed = seed
    return src


def gaussian_from(source: ChaoticSource, mean: float = 0.0, sigma: float = 1.0) -> float:
    """Box-Muller deviate from two consecutive uniforms of ``source``."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    u1 = max(source.next_uniform(), 1e-12)
    u2 = source.next_uniform()
    return mean + sigma * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
