"""Dynamic / geometric phase decomposition of the somersault angle.

For a loop on the momentum sphere the somersault change splits as

    delta_phi = int L.Omega dtau  -  S,     S = loop integral of sin(theta) dpsi,

where ``S`` is the solid angle between the loop and the equator. Rotor off,
``L.Omega = 2E`` and the dynamic term is ``2 E T``. All quantities are in
scaled units (``l = 1``, ``tau = t l / I1``) and nothing is reduced mod 2 pi.

Orientation: ``S`` is positive for a loop traversed with increasing ``psi``
in the upper hemisphere, which makes the rotor-off identity hold with a
positive twist period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from rotordive.dynamics import DimensionlessParams
from rotordive.simulator import (
    DURATION,
    PSI_TARGET,
    ROTOR_OFF,
    ROTOR_ON,
    StageSegment,
    StageSpec,
    Tolerances,
    Trajectory,
    initial_state,
    integrate_stage,
    rhs,
    run_stages,
    transit,
)

CLOSURE_TOL = 1e-8
QUAD_TOL = 1e-9


class OpenLoopError(ValueError):
    """The trajectory does not return to its starting point on the sphere."""


@dataclass(frozen=True)
class PhaseDecomposition:
    dynamic_phase: float
    geometric_phase: float
    total_delta_phi: float
    residual: float
    closure_gap: float = 0.0


@dataclass
class _Loop:
    segments: list[StageSegment]
    reversed: bool = False


def _as_segments(loop) -> tuple[list[StageSegment], bool]:
    if isinstance(loop, Trajectory):
        return loop.segments, False
    if isinstance(loop, _Loop):
        return loop.segments, loop.reversed
    if isinstance(loop, StageSegment):
        return [loop], False
    raise TypeError(f"cannot treat {type(loop).__name__} as a loop")


def reverse(loop) -> _Loop:
    """The same loop traversed backwards."""
    segs, rev = _as_segments(loop)
    return _Loop(segs, not rev)


def closure_gap(loop, allow_equator: bool = False) -> float:
    """Distance between the loop's endpoints on the sphere.

    With ``allow_equator`` both endpoints may lie anywhere on the equator,
    where the loop is closed along the equator at no cost in solid angle.
    """
    segs, _ = _as_segments(loop)
    a, b = segs[0].y0[:3], segs[-1].y1[:3]
    if allow_equator:
        return float(max(abs(a[2]), abs(b[2])))
    return float(np.linalg.norm(a - b))


def _check_closed(loop, allow_equator: bool) -> float:
    gap = closure_gap(loop, allow_equator)
    if gap > CLOSURE_TOL:
        raise OpenLoopError(f"loop endpoints differ by {gap:.3e} on the momentum sphere")
    return gap


def _integrate(seg: StageSegment, integrand, tol: float = QUAD_TOL) -> float:
    """Trapezoid on uniform resamples of the dense output, doubled until it changes by < ``tol``."""
    if seg.tau1 == seg.tau0:
        return 0.0
    n = 64
    prev = None
    while n <= 2**20:
        tau = np.linspace(seg.tau0, seg.tau1, n + 1)
        val = float(np.trapezoid(integrand(seg(tau), seg), tau))
        if prev is not None and abs(val - prev) < tol:
            return val
        prev = val
        n *= 2
    raise RuntimeError("phase quadrature did not converge")


def _sin_theta_dpsi(y: np.ndarray, seg: StageSegment) -> np.ndarray:
    d = seg.d
    dy = rhs(y, d.delta, d.gamma, seg.rho)
    return y[2] / np.linalg.norm(y[:3], axis=0) * dy[4]


def _l_dot_omega(y: np.ndarray, seg: StageSegment) -> np.ndarray:
    d = seg.d
    L = y[:3]
    w = np.vstack([L[0], (1.0 + d.delta) * (L[1] - seg.rho), (1.0 + d.gamma) * L[2]])
    return np.sum(L * w, axis=0)


def solid_angle(loop, allow_equator: bool = False) -> float:
    """``S`` = loop integral of ``sin(theta) dpsi``, relative to the equator."""
    _check_closed(loop, allow_equator)
    segs, rev = _as_segments(loop)
    S = sum(_integrate(s, _sin_theta_dpsi) for s in segs)
    return -S if rev else S


def dynamic_phase(loop, d: DimensionlessParams | None = None) -> float:
    """``int L.Omega dtau`` along the trajectory (scaled units).

    Each segment carries its own parameters, so ``d`` is accepted for
    interface symmetry and, when given, must match their ``delta, gamma``.
    """
    segs, rev = _as_segments(loop)
    if d is not None:
        for s in segs:
            if (s.d.delta, s.d.gamma) != (d.delta, d.gamma):
                raise ValueError("segment parameters do not match d")
    D = sum(_integrate(s, _l_dot_omega) for s in segs)
    return -D if rev else D


def total_delta_phi(loop) -> float:
    segs, rev = _as_segments(loop)
    dphi = float(segs[-1].y1[3] - segs[0].y0[3])
    return -dphi if rev else dphi


def verify_phase_decomposition(
    loop, d: DimensionlessParams | None = None, allow_equator: bool = False
) -> PhaseDecomposition:
    """Decompose the somersault change of a closed loop; the residual is reported, not hidden."""
    gap = _check_closed(loop, allow_equator)
    S = solid_angle(loop, allow_equator)
    D = dynamic_phase(loop, d)
    dphi = total_delta_phi(loop)
    return PhaseDecomposition(D, S, dphi, dphi - (D - S), gap)


# --- loop builders ---------------------------------------------------------


def rotor_off_period_loop(
    d: DimensionlessParams, theta: float, tol: Tolerances = Tolerances()
) -> StageSegment:
    """One twist period of rotor-off motion starting at ``psi = pi/2`` with tilt ``theta``.

    For ``delta < 0`` the start is the maximal tilt of the band.
    """
    start = initial_state(theta, math.pi / 2)
    spec = StageSpec(ROTOR_OFF, 0.0, PSI_TARGET, psi_target=start[4] + 2.0 * math.pi, index=3)
    return integrate_stage(start, spec, d.with_rho(0.0), tol)


def switched_loop(
    d: DimensionlessParams, n: float = 1.0, tol: Tolerances = Tolerances()
) -> Trajectory:
    """Rotor-on arc, ``n - 1/2`` twist periods, then the mirrored rotor-on arc.

    Starts at ``L = (1, 0, 0)``. The second rotor-on arc lasts as long as the
    first, measured by integration; for integer ``n`` it returns to
    ``(1, 0, 0)``, for half-integer ``n`` it ends at ``(-1, 0, 0)`` and the
    loop is closed along the equator.
    """
    if n < 0.5 or abs(2 * n - round(2 * n)) > 1e-12:
        raise ValueError(f"n must be a multiple of 1/2 and >= 1/2, got {n}")
    rho = abs(d.rho)
    arc = transit(d, tol)
    twist = StageSpec(
        ROTOR_OFF, 0.0, PSI_TARGET, psi_target=arc.end[4] + 2.0 * math.pi * (n - 0.5), index=3
    )
    integer = abs(n - round(n)) < 1e-12
    back = StageSpec(ROTOR_ON, rho if integer else -rho, DURATION, arc.That2, index=4)
    seg3 = integrate_stage(arc.end, twist, d.with_rho(0.0), tol, arc.segment.tau1)
    seg4 = integrate_stage(seg3.y1, back, d, tol, seg3.tau1)
    return Trajectory([arc.segment, seg3, seg4])


def pure_somersault(d: DimensionlessParams, duration: float, tol: Tolerances = Tolerances()) -> Trajectory:
    return run_stages(initial_state(), [StageSpec(ROTOR_OFF, 0.0, DURATION, duration, index=1)], d.with_rho(0.0), tol)
