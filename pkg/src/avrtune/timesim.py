"""
Closed-loop step responses from rational realizations, and the exciter-gain
robustness sweep.

Systems are realized in controllable canonical form and integrated with
classic fixed-step RK4. For a linear system under a constant input one RK4
step is an affine map ``x <- M x + N``, so ``M`` and ``N`` are formed once
and the loop only does matrix-vector products.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AvrTuneError, ImproperSystem, StepTooLarge
from .fractional import FopidParams, OustaloupConfig, fopid_to_rational
from .lti import RationalTF, poles
from .plant import AvrParams, rational_closed_loop

logger = logging.getLogger(__name__)

RK4_LIMIT = 2.5
DEFAULT_MULTIPLIERS = (1.0, 3.0, 5.0, 8.0, 12.0, 17.0)
# smallest closed-loop damping ratio still counted as comfortably stable
NEAR_UNSTABLE_DAMPING = 0.05


@dataclass(frozen=True)
class StateSpace:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float

    @property
    def order(self) -> int:
        return self.A.shape[0]


@dataclass
class StepResult:
    t: np.ndarray
    y: np.ndarray
    overshoot: float | None
    settling_time_2pct: float | None
    stable: bool
    poles: np.ndarray | None = None
    y_final: float | None = None
    pole_stable: bool | None = None
    trajectory_stable: bool | None = None

    @property
    def verdicts_agree(self) -> bool:
        return self.pole_stable == self.trajectory_stable

    @property
    def min_damping(self) -> float | None:
        """Smallest damping ratio ``-Re p / |p|`` over the closed-loop poles."""
        if self.poles is None or len(self.poles) == 0:
            return None
        p = np.asarray(self.poles)
        return float(np.min(-p.real / np.abs(p)))


def to_statespace(tf: RationalTF) -> StateSpace:
    """Controllable canonical realization of a proper transfer function.

    Raises
    ------
    ImproperSystem
        If the numerator degree exceeds the denominator degree.
    """
    if not tf.is_proper:
        raise ImproperSystem(f"numerator degree {tf.num.degree} > denominator degree {tf.den.degree}")
    den = np.asarray(tf.den.coeffs, dtype=float)
    num = np.zeros(len(den))
    num[: len(tf.num.coeffs)] = tf.num.coeffs
    n = len(den) - 1
    lead = den[-1]
    a = den / lead
    b = num / lead
    D = float(b[n]) if n >= 0 else 0.0
    if n == 0:
        return StateSpace(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), D)
    A = np.zeros((n, n))
    A[:-1, 1:] = np.eye(n - 1)
    A[-1, :] = -a[:n]
    B = np.zeros((n, 1))
    B[-1, 0] = 1.0
    # strictly proper part: b - D a
    C = (b[:n] - D * a[:n]).reshape(1, n)
    return StateSpace(A, B, C, D)


def _balanced(ss: StateSpace) -> StateSpace:
    """Diagonal similarity transform equalizing row/column norms of ``A``.

    Companion matrices of high-order loops mix coefficients over many
    decades; balancing leaves the transfer function unchanged.
    """
    if ss.order == 0:
        return ss
    from scipy.linalg import matrix_balance

    _, (T, _) = matrix_balance(ss.A, permute=False, separate=True)
    A = ss.A * (1.0 / T)[:, None] * T[None, :]
    return StateSpace(A, ss.B / T[:, None], ss.C * T[None, :], ss.D)


def _trajectory_stable(t: np.ndarray, y: np.ndarray, y_ref: float) -> bool:
    """Bounded output whose deviation from ``y_ref`` is not growing.

    Growth means the largest deviation over the last quarter of the horizon
    exceeds the largest deviation seen before it. Comparing whole windows
    rather than fitting short stretches keeps oscillations slower than the
    window from being mistaken for growth.
    """
    if not np.all(np.isfinite(y)):
        return False
    if abs(y[-1]) > 10.0 * max(abs(y_ref), 1.0):
        return False
    err = np.abs(y - y_ref)
    cut = 3 * len(t) // 4
    if cut < 1:
        return True
    return bool(np.max(err[cut:]) <= np.max(err[:cut]))


def step_response(
    ss: StateSpace,
    t_end: float = 8.0,
    dt: float = 1e-4,
    system_poles: np.ndarray | None = None,
) -> StepResult:
    """Unit-step response by fixed-step RK4.

    Parameters
    ----------
    ss : StateSpace
    t_end, dt : float
        Horizon and step in seconds.
    system_poles : array, optional
        Poles of the realized system; eigenvalues of ``A`` are used otherwise.

    Raises
    ------
    StepTooLarge
        If ``dt * max|Re p|`` reaches the RK4 limit of 2.5.
    """
    if dt <= 0 or t_end <= 0:
        raise ValueError("dt and t_end must be positive")
    p = np.linalg.eigvals(ss.A) if system_poles is None else np.asarray(system_poles)
    if len(p) and dt * float(np.max(np.abs(p.real))) >= RK4_LIMIT:
        raise StepTooLarge(f"dt={dt:g} too large for fastest pole {np.max(np.abs(p.real)):.4g}")

    n_steps = int(round(t_end / dt))
    t = np.arange(n_steps + 1) * dt
    if ss.order == 0:
        y = np.full(n_steps + 1, ss.D)
    else:
        bal = _balanced(ss)
        n = bal.order
        hA = dt * bal.A
        I = np.eye(n)
        hA2 = hA @ hA
        hA3 = hA2 @ hA
        M = I + hA + hA2 / 2 + hA3 / 6 + hA3 @ hA / 24
        N = (dt * (I + hA / 2 + hA2 / 6 + hA3 / 24) @ bal.B).ravel()
        c = bal.C.ravel()
        xs = np.empty((n_steps + 1, n))
        x = np.zeros(n)
        xs[0] = x
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(n_steps):
                x = M @ x + N
                xs[k + 1] = x
            y = xs @ c + bal.D

    pole_stable = bool(len(p) == 0 or np.all(p.real < 0))
    # DC gain b0 / a0 of the canonical form
    dc = ss.D - ss.C[0, 0] / ss.A[-1, 0] if ss.order and ss.A[-1, 0] != 0 else ss.D
    y_final = float(dc) if pole_stable else None
    traj_ok = _trajectory_stable(t, y, float(dc))
    stable = pole_stable and traj_ok

    overshoot = settling = None
    if stable and y_final:
        overshoot = max(float(np.max(y)) / y_final - 1.0, 0.0)
        outside = np.flatnonzero(np.abs(y - y_final) > 0.02 * abs(y_final))
        if outside.size == 0:
            settling = 0.0
        elif outside[-1] < n_steps:
            settling = float(t[outside[-1] + 1])
    return StepResult(
        t=t,
        y=y,
        overshoot=overshoot,
        settling_time_2pct=settling,
        stable=stable,
        poles=p,
        y_final=y_final,
        pole_stable=pole_stable,
        trajectory_stable=traj_ok,
    )


def closed_loop_tf(
    genome: FopidParams, p: AvrParams = AvrParams(), cfg: OustaloupConfig = OustaloupConfig()
) -> RationalTF:
    """Reference-to-terminal-voltage loop with the Oustaloup-realized controller."""
    return rational_closed_loop(fopid_to_rational(genome, cfg), p)


def simulate_closed_loop(
    genome: FopidParams,
    p: AvrParams = AvrParams(),
    cfg: OustaloupConfig = OustaloupConfig(),
    t_end: float = 8.0,
    dt: float = 1e-4,
) -> StepResult:
    tf = closed_loop_tf(genome, p, cfg)
    return step_response(to_statespace(tf), t_end, dt, system_poles=poles(tf))


def robustness_sweep(
    genome: FopidParams,
    p: AvrParams = AvrParams(),
    multipliers: Sequence[float] = DEFAULT_MULTIPLIERS,
    cfg: OustaloupConfig = OustaloupConfig(),
    t_end: float = 8.0,
    dt: float = 1e-4,
) -> list[tuple[float, StepResult | AvrTuneError]]:
    """Step responses with the exciter gain scaled by each multiplier.

    A failing entry is returned as its exception instead of aborting the sweep.
    """
    if any(m <= 0 for m in multipliers):
        raise ValueError("multipliers must be positive")
    out: list[tuple[float, StepResult | AvrTuneError]] = []
    for m in multipliers:
        try:
            res = simulate_closed_loop(genome, p.with_exciter_multiplier(m), cfg, t_end, dt)
        except AvrTuneError as exc:
            logger.warning("sweep entry x%g failed: %s", m, exc)
            out.append((m, exc))
            continue
        out.append((m, res))
    return out
