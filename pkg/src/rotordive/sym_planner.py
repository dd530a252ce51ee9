"""Dive planning for a body with equal somersault and frontal inertia (delta = 0).

The free parameter is ``s``, the sine of the maximal tilt reached at the end
of the rotor-on stage. Stage 2 and 4 times and somersault contributions are
complete elliptic integrals of ``s``; the twisting stage is elementary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize

from rotordive.dynamics import derive_dimensionless
from rotordive.elliptic import (
    EllipticDomainError,
    ellip_e,
    ellip_k,
    ellip_pi,
    quad_defining_integral,
)
from rotordive.plan import DivePlan, DiveRequest, NoRootError, ballpark_warnings

S_BRACKET = (1e-6, 0.99)
_TWO_PI = 2.0 * math.pi


class PoleError(EllipticDomainError):
    """Evaluation at the s = 0 pole of a stage quantity."""


def _check_s(s: float) -> None:
    if not s < 1.0:
        raise EllipticDomainError(f"tilt s must be < 1, got {s}")
    if not s > 0.0:
        raise PoleError(f"stage-2 quantities have a pole at s = 0 (got s = {s})")


def modulus_sq(s: float) -> float:
    """``k^2 = (1 - s^2) / (2 - s^2)``."""
    return (1.0 - s * s) / (2.0 - s * s)


def tilt_from_beta(beta: float) -> float:
    """Sine of the maximal tilt reached from pure somersault with rotor strength beta."""
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    # cos(theta_max) = sqrt(beta^2 + 1) - beta, written without cancellation
    c = 1.0 / (math.hypot(beta, 1.0) + beta)
    # sin^2 = 1 - c^2 = 2 beta c (from the quadratic c^2 + 2 beta c - 1 = 0)
    return math.sqrt(2.0 * beta * c)


def beta_from_tilt(s: float) -> float:
    if not 0.0 <= s < 1.0:
        raise EllipticDomainError(f"tilt s must lie in [0, 1), got {s}")
    return s * s / (2.0 * math.sqrt(1.0 - s * s))


def t2_hat(s: float, gamma: float, method: str = "legendre") -> float:
    """Scaled rotor-on time from pure somersault to maximal tilt ``s``.

    ``method="legendre"`` evaluates ``2 k K(k^2) / (s gamma)``;
    ``method="quad"`` integrates the defining integral.
    """
    _check_s(s)
    if method == "quad":
        return quad_defining_integral("t2_sym", {"s": s, "gamma": gamma})
    if method != "legendre":
        raise ValueError(f"unknown method {method!r}")
    k2 = modulus_sq(s)
    return 2.0 * math.sqrt(k2) * ellip_k(k2) / (s * gamma)


def t2_minus_phi2_legendre(s: float, printed: bool = False) -> float:
    """Closed form of ``T2 - phi2`` in Legendre normal form.

    The default uses the coefficient ``1/k - k`` on the third-kind term, which
    reproduces the defining integral. ``printed=True`` uses ``1/k + k``, the
    variant that does not vanish as ``s -> 0``; it is kept only so the
    adjudication can be reported.
    """
    _check_s(s)
    k2 = modulus_sq(s)
    k = math.sqrt(k2)
    coeff = (1.0 / k + k) if printed else (1.0 / k - k)
    return (-k * ellip_k(k2) + coeff * ellip_pi(2.0 - 1.0 / k2, k2)) / s


def t2_minus_phi2(s: float, method: str = "quad") -> float:
    """``T2 - phi2``, a function of ``s`` alone; vanishes linearly as ``s -> 0``."""
    if method == "legendre":
        return t2_minus_phi2_legendre(s)
    if method != "quad":
        raise ValueError(f"unknown method {method!r}")
    _check_s(s)
    return quad_defining_integral("t2_minus_phi2_sym", {"s": s})


def phi2_legendre(s: float, gamma: float, printed: bool = False) -> float:
    return t2_hat(s, gamma) - t2_minus_phi2_legendre(s, printed=printed)


def phi2(s: float, gamma: float, method: str = "quad") -> float:
    """Somersault angle accumulated during the rotor-on tilting stage."""
    _check_s(s)
    if method == "quad":
        return quad_defining_integral("phi2_sym", {"s": s, "gamma": gamma})
    if method == "legendre":
        return phi2_legendre(s, gamma)
    raise ValueError(f"unknown method {method!r}")


def twist_period(s: float, gamma: float) -> float:
    """Scaled period of rotor-off twisting at constant tilt ``s``."""
    _check_s(s)
    return _TWO_PI / (gamma * s)


def expansion_A() -> float:
    """Slope of ``T_tot / (2 pi)`` in ``s`` at ``s = 0``."""
    return (2.0 * ellip_e(0.5) - ellip_k(0.5)) / (math.sqrt(2.0) * math.pi)


def expansion_B() -> float:
    """Offset in the small-tilt estimate ``s* ~ (B + n) / (m gamma)``."""
    return math.sqrt(2.0) * ellip_k(0.5) / math.pi - 0.5


def min_tilt_estimate(m: float, n: float, gamma: float) -> float:
    return (expansion_B() + n) / (m * gamma)


@dataclass(frozen=True)
class StageTimes:
    That1: float
    That2: float
    That3: float
    That_tot: float
    phi2: float
    feasible: bool


def stage_times(s: float, gamma: float, m: float, n: float) -> StageTimes:
    """Stage durations from the master equation for tilt ``s``.

    Infeasibility (negative ``That1``) is reported through the result.
    """
    _check_s(s)
    That2 = t2_hat(s, gamma)
    diff = t2_minus_phi2(s)
    p2 = That2 - diff
    That3 = (n - 0.5) * twist_period(s, gamma)
    That1 = 0.5 * (_TWO_PI * m - 2.0 * p2 - That3)
    That_tot = _TWO_PI * m + 2.0 * diff
    return StageTimes(That1, That2, That3, That_tot, p2, That1 >= 0.0)


@lru_cache(maxsize=1)
def _excess_grid() -> tuple[np.ndarray, np.ndarray]:
    grid = np.geomspace(S_BRACKET[0], S_BRACKET[1], 48)
    vals = np.array([2.0 * t2_minus_phi2(float(s)) for s in grid])
    return grid, vals


def solve_tilt_for_ttot(That_tot: float, m: float) -> float:
    """Maximal tilt ``s`` whose master-equation total time equals ``That_tot``."""
    excess = That_tot - _TWO_PI * m
    if excess <= 0.0:
        raise NoRootError(
            f"scaled total time {That_tot:.12g} leaves no time beyond 2*pi*m = {_TWO_PI * m:.12g}",
            "zero-tilt",
        )
    grid, vals = _excess_grid()
    if np.any(np.diff(vals) <= 0):
        raise RuntimeError("master-equation excess is not monotone on the bracket")
    if excess < vals[0]:
        raise NoRootError(
            f"excess {excess:.3e} needs tilt below {S_BRACKET[0]:g}", "zero-tilt"
        )
    if excess > vals[-1]:
        raise NoRootError(
            f"excess {excess:.6g} needs tilt beyond {S_BRACKET[1]:g}", "beyond-bracket"
        )
    i = int(np.searchsorted(vals, excess))
    lo = float(grid[max(i - 1, 0)])
    hi = float(grid[min(i, len(grid) - 1)])
    return optimize.brentq(
        lambda s: 2.0 * t2_minus_phi2(s) - excess, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200
    )


def _that1(s: float, gamma: float, m: float, n: float) -> float:
    return 0.5 * (_TWO_PI * m - 2.0 * phi2(s, gamma) - (n - 0.5) * twist_period(s, gamma))


def min_tilt(m: float, n: float, gamma: float) -> float:
    """Smallest ``s`` with ``That1(s) = 0``.

    The bracket search starts from the small-tilt estimate and expands
    geometrically; the root is then polished with Brent's method.
    """
    f = lambda s: _that1(s, gamma, m, n)  # noqa: E731
    lo_lim, hi_lim = S_BRACKET
    guess = min(max(min_tilt_estimate(m, n, gamma), lo_lim), hi_lim)
    lo = hi = guess
    while f(lo) > 0.0:
        if lo <= lo_lim:
            raise NoRootError("stage 1 time positive down to the bracket edge", "zero-tilt")
        lo = max(lo / 1.5, lo_lim)
    while f(hi) < 0.0:
        if hi >= hi_lim:
            raise NoRootError(
                f"n = {n} twists infeasible for every tilt in the bracket", "infeasible-for-all-s"
            )
        hi = min(hi * 1.5, hi_lim)
    if lo == hi:
        return lo
    # keep the smallest sign change
    grid = np.linspace(lo, hi, 9)
    vals = [f(float(x)) for x in grid]
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa < 0.0 <= fb:
            return optimize.brentq(f, float(a), float(b), xtol=1e-15, rtol=1e-15, maxiter=200)
    raise NoRootError("no sign change of the stage-1 time", "infeasible-for-all-s")


def plan_dive(req: DiveRequest) -> DivePlan:
    """Solve the symmetric-body master equation for ``req``.

    The rotor setting in ``req.body`` is ignored: the planner determines it.
    Failure to find a tilt or a negative stage-1 time is reported as an
    infeasible plan with a reason.
    """
    body = req.body
    d = derive_dimensionless(body)
    if d.delta != 0.0:
        raise ValueError("plan_dive needs I1 == I2; use gen_planner.plan_dive_general")
    That_tot = d.to_scaled_time(req.T_tot)
    plan = DivePlan(
        case="symmetric",
        m=req.m,
        n=req.n,
        T_tot=req.T_tot,
        gamma=d.gamma,
        delta=d.delta,
        time_scale=d.time_scale,
        That_tot=That_tot,
    )
    try:
        s = solve_tilt_for_ttot(That_tot, req.m)
    except NoRootError as exc:
        plan.reason = f"{exc.diagnostic}: {exc}"
        plan.warnings = ballpark_warnings(None, body.l, req.T_tot)
        return plan
    st = stage_times(s, d.gamma, req.m, req.n)
    beta = beta_from_tilt(s)
    plan.s = s
    plan.beta = beta
    plan.rho = beta * d.gamma
    plan.h = plan.rho * body.l
    plan.That1, plan.That2, plan.That3 = st.That1, st.That2, st.That3
    plan.P3_hat = twist_period(s, d.gamma)
    plan.Phi3 = plan.P3_hat
    plan.phi1 = st.That1
    plan.phi2 = st.phi2
    plan.phi3 = st.That3
    plan.psi3 = d.gamma * s * st.That3
    plan.feasible = st.feasible
    if not st.feasible:
        plan.reason = (
            f"That1 < 0 ({st.That1:.6g}): {req.n} twists need more tilt than s = {s:.6g}"
        )
    plan.warnings = ballpark_warnings(plan.h, body.l, req.T_tot)
    return plan
