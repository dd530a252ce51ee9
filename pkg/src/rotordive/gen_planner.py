"""Dive planning for a tri-axial body (I3 < I1 < I2, so delta < 0).

In the rotor-off twisting stage the tilt now oscillates between
``s_minus = sin(theta_min)`` and ``s_plus = sin(theta_max)``; ``s_minus`` is the
planning parameter and ``s_minus -> 0`` is the separatrix of the unstable
somersault. Every quantity has a quadrature evaluation (the default) and,
where a correct normal form is known, a Legendre fast path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from rotordive.dynamics import derive_dimensionless
from rotordive.elliptic import (
    EllipticDomainError,
    carlson_rf,
    ellip_k,
    ellip_pi,
    quad_defining_integral,
)
from rotordive.plan import DivePlan, DiveRequest, NoRootError, ballpark_warnings

_TWO_PI = 2.0 * math.pi
# the twist-period modulus may come no closer than this to 1
SEPARATRIX_MARGIN = 1e-6
S_MINUS_MAX = 0.99


class SeparatrixError(EllipticDomainError):
    """Parameters at (or numerically too close to) the separatrix."""


@dataclass(frozen=True)
class TiltBand:
    """Tilt range of the rotor-off twisting motion, with ``nu = delta / gamma``."""

    s_minus: float
    s_plus: float
    nu: float

    def __post_init__(self) -> None:
        if self.nu > 0:
            raise ValueError(f"nu must be <= 0, got {self.nu}")
        if not 0.0 <= self.s_minus <= self.s_plus < 1.0:
            raise ValueError(f"need 0 <= s_minus <= s_plus < 1, got {self.s_minus}, {self.s_plus}")

    @classmethod
    def from_s_minus(cls, s_minus: float, nu: float) -> "TiltBand":
        return cls(s_minus, s_plus_from_s_minus(s_minus, nu), nu)

    @property
    def c_plus(self) -> float:
        """``cos(theta_max)``."""
        return math.sqrt((1.0 - self.s_minus**2) / (1.0 - self.nu))

    def residual(self) -> float:
        """Residual of ``s_plus^2 + (1 - s_plus^2) nu = s_minus^2``."""
        return self.s_plus**2 + (1.0 - self.s_plus**2) * self.nu - self.s_minus**2


def s_plus_from_s_minus(s_minus: float, nu: float) -> float:
    if not 0.0 <= s_minus < 1.0:
        raise EllipticDomainError(f"s_minus must lie in [0, 1), got {s_minus}")
    if nu > 0:
        raise EllipticDomainError(f"nu must be <= 0, got {nu}")
    # s_plus >= s_minus exactly, even where rounding would put it an ulp below
    return max(s_minus, math.sqrt((s_minus * s_minus - nu) / (1.0 - nu)))


def s_minus_from_s_plus(s_plus: float, nu: float) -> float:
    sm2 = s_plus * s_plus + (1.0 - s_plus * s_plus) * nu
    if -1e-15 < sm2 < 0:
        sm2 = 0.0  # rounding at the separatrix itself
    if sm2 < 0:
        raise SeparatrixError(f"s_plus = {s_plus} lies inside the separatrix for nu = {nu}")
    return math.sqrt(sm2)


def rho_hat_from_band(band: TiltBand, gamma: float) -> float:
    """Scaled rotor strength ``rho (1 + delta)`` whose stage-2 orbit ends at ``s_plus``.

    From the turning point of the rotor-on orbit, ``(gamma - delta) z^2 -
    2 rho_hat z - gamma = 0`` with ``z = -cos(theta_max)``, which rearranges to
    ``rho_hat = gamma s_minus^2 / (2 cos(theta_max))``.
    """
    return gamma * band.s_minus**2 / (2.0 * band.c_plus)


def rho_from_band(band: TiltBand, gamma: float) -> float:
    delta = band.nu * gamma
    return rho_hat_from_band(band, gamma) / (1.0 + delta)


def turning_point_sin(rho: float, gamma: float, delta: float) -> float:
    """``sin(theta~_max)`` at the end of the rotor-on arc (negative for rho > 0)."""
    rho_hat = rho * (1.0 + delta)
    return (rho_hat - math.sqrt(rho_hat * rho_hat + gamma * (gamma - delta))) / (gamma - delta)


def band_from_rho(rho: float, gamma: float, delta: float) -> TiltBand:
    """Tilt band reached by switching the rotor on at strength ``rho`` from pure somersault."""
    if rho <= 0:
        raise ValueError(f"rho must be positive, got {rho}")
    nu = delta / gamma
    c_plus = -turning_point_sin(rho, gamma, delta)
    s_plus = math.sqrt(1.0 - c_plus * c_plus)
    return TiltBand(s_minus_from_s_plus(s_plus, nu), s_plus, nu)


def _params(band: TiltBand, gamma: float) -> dict:
    if band.s_minus <= 0.0:
        raise SeparatrixError("s_minus = 0 is the separatrix")
    return {"s_minus": band.s_minus, "gamma": gamma, "delta": band.nu * gamma}


def twist_modulus(band: TiltBand) -> float:
    return (band.s_plus - band.s_minus) / (band.s_plus + band.s_minus)


def twist_period_and_somersault(
    band: TiltBand, gamma: float, method: str = "quad"
) -> tuple[float, float]:
    """Scaled twist period ``P3`` and somersault per period ``Phi3`` (rotor off)."""
    k = twist_modulus(band)
    if k * k > 1.0 - SEPARATRIX_MARGIN:
        raise SeparatrixError(f"twist modulus k^2 = {k * k!r} too close to 1")
    if method == "quad":
        p = _params(band, gamma)
        P3 = quad_defining_integral("p3_gen", p)
        return P3, P3 - quad_defining_integral("p3_minus_phi3_gen", p)
    if method != "legendre":
        raise ValueError(f"unknown method {method!r}")
    sp, sm = band.s_plus, band.s_minus
    pre = 8.0 / ((sp + sm) * math.sqrt(1.0 - band.nu))
    m = k * k
    P3 = pre * ellip_k(m) / gamma
    n_plus = k * (1.0 + sm) / (1.0 - sm)
    n_minus = k * (1.0 - sm) / (1.0 + sm)
    # the third-kind difference carries a factor s_minus
    dPhi = sm * pre * (ellip_pi(n_minus, m) - ellip_pi(n_plus, m))
    return P3, P3 + dPhi


def twist_period_and_somersault_printed(band: TiltBand, gamma: float) -> tuple[float, float]:
    """Uncorrected normal form: no ``s_minus`` factor on the Pi difference. Kept for comparison."""
    k = twist_modulus(band)
    sp, sm = band.s_plus, band.s_minus
    pre = 8.0 / ((sp + sm) * math.sqrt(1.0 - band.nu))
    P3 = pre * ellip_k(k * k) / gamma
    n_plus = k * (1.0 + sm) / (1.0 - sm)
    n_minus = k * (1.0 - sm) / (1.0 + sm)
    return P3, P3 + pre * (ellip_pi(n_minus, k * k) - ellip_pi(n_plus, k * k))


def t2_modulus_sq(band: TiltBand) -> float:
    sm2, nu = band.s_minus**2, band.nu
    return (1.0 / sm2 - 1.0) * (sm2 * (1.0 - nu) + nu) / ((2.0 - sm2) * (1.0 - nu))


def t2_general(band: TiltBand, gamma: float, method: str = "quad") -> float:
    """Scaled rotor-on time from pure somersault to the turning point."""
    if method == "quad":
        return quad_defining_integral("t2_gen", _params(band, gamma))
    if method != "legendre":
        raise ValueError(f"unknown method {method!r}")
    m = t2_modulus_sq(band)
    sm = band.s_minus
    # m < 0 for small s_minus; K(m) = R_F(0, 1 - m, 1) stays valid there
    return 2.0 * band.c_plus * carlson_rf(0.0, 1.0 - m, 1.0) / (gamma * sm * math.sqrt(2.0 - sm * sm))


def t2_general_printed(band: TiltBand, gamma: float) -> float:
    """Uncorrected normal form ``K(k^2) / (gamma k sqrt(s^2 (1 - nu) + nu))``. Kept for comparison."""
    x = band.s_minus**2 * (1.0 - band.nu) + band.nu
    if x <= 0:
        raise EllipticDomainError(f"s_minus^2 (1 - nu) + nu = {x} <= 0")
    m = t2_modulus_sq(band)
    return ellip_k(m) / (gamma * math.sqrt(m) * math.sqrt(x))


def phi2_tilde_general(band: TiltBand, gamma: float) -> float:
    """Advance of the rotor-last somersault angle over the rotor-on arc."""
    return quad_defining_integral("phi2_tilde_gen", _params(band, gamma))


def phi2_tilde_general_printed(band: TiltBand, gamma: float) -> float:
    """Uncorrected ``T2 + f_+ Pi(n_+) + f_- Pi(n_-)``; it misses the defining integral. Kept for comparison."""
    sm, nu = band.s_minus, band.nu
    sm2 = sm * sm
    m = t2_modulus_sq(band)
    g = sm * math.sqrt((1.0 - sm2) * (2.0 - sm2) * (1.0 - nu))
    r = math.sqrt((1.0 - sm2) / (1.0 - nu))
    n_plus = 1.0 - 1.0 / sm2 + r / sm2
    n_minus = 1.0 - 1.0 / sm2 - r / sm2
    root = math.sqrt((1.0 - sm2) * (1.0 - nu))
    f_plus = g * (1.0 - sm2 - root)
    f_minus = g * (1.0 - sm2 + root)
    return t2_general(band, gamma) + f_plus * ellip_pi(n_plus, m) + f_minus * ellip_pi(n_minus, m)


def phi2_general(band: TiltBand, gamma: float) -> float:
    """Somersault angle over the rotor-on arc, equal to ``phi~_2 - pi/2``.

    Evaluated as ``T2 - (T2 - phi2)``: in the rotor-last chart the ``pi/2``
    comes from a peak of width ``s_minus^2`` at the arc's end, which is
    poorly conditioned for small tilt.
    """
    return t2_general(band, gamma) - t2_minus_phi2_general(band, gamma)


def t2_minus_phi2_general(band: TiltBand, gamma: float) -> float:
    """``T2 - phi2`` integrated directly in the somersault-tilt-twist angle."""
    return quad_defining_integral("t2_minus_phi2_gen", _params(band, gamma))


@dataclass(frozen=True)
class GeneralStageTimes:
    That1: float
    That2: float
    That3: float
    That_tot: float
    phi2: float
    P3_hat: float
    Phi3: float
    feasible: bool


def stage_times_general(
    band: TiltBand, gamma: float, m: float, n: float, method: str = "quad"
) -> GeneralStageTimes:
    That2 = t2_general(band, gamma)
    d2 = t2_minus_phi2_general(band, gamma)
    p2 = That2 - d2
    P3, Phi3 = twist_period_and_somersault(band, gamma, method=method)
    w = n - 0.5
    That3 = P3 * w
    That1 = 0.5 * (_TWO_PI * m - 2.0 * p2 - Phi3 * w)
    That_tot = _TWO_PI * m + 2.0 * d2 + (P3 - Phi3) * w
    return GeneralStageTimes(That1, That2, That3, That_tot, p2, P3, Phi3, That1 >= 0.0)


def separatrix_s_minus(nu: float, margin: float = SEPARATRIX_MARGIN) -> float:
    """Smallest ``s_minus`` whose twist modulus satisfies ``k^2 <= 1 - margin``."""
    if nu == 0.0:
        return 0.0
    k = math.sqrt(1.0 - margin)
    r = (1.0 - k) / (1.0 + k)  # s_minus / s_plus
    return r * math.sqrt(-nu / (1.0 - nu - r * r)) * (1.0 + 1e-9)


def _excess(s_minus: float, nu: float, gamma: float, n: float) -> float:
    st = stage_times_general(TiltBand.from_s_minus(s_minus, nu), gamma, 0.0, n)
    return st.That_tot


def solve_band_for_ttot(That_tot: float, m: float, n: float, gamma: float, delta: float) -> TiltBand:
    """Solve the general master equation for ``s_minus`` by bracketed root finding.

    Unlike the symmetric case, the total time is not monotone in ``s_minus``
    (the twisting stage adds a term that grows toward the separatrix), so
    every sign change on a geometric grid is polished. The smallest root with
    a non-negative stage-1 time is returned; if none has one, the root with
    the largest stage-1 time is returned so the caller can report why it is
    infeasible.
    """
    nu = delta / gamma
    excess = That_tot - _TWO_PI * m
    if excess <= 0.0:
        raise NoRootError("no time beyond 2*pi*m", "zero-tilt")
    lo = max(separatrix_s_minus(nu), 1e-6)
    grid = np.geomspace(lo, S_MINUS_MAX, 64)
    vals = np.array([_excess(float(s), nu, gamma, n) for s in grid]) - excess
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0.0:
            roots.append(float(a))
        elif fa * fb < 0.0:
            roots.append(
                optimize.brentq(
                    lambda x: _excess(x, nu, gamma, n) - excess,
                    float(a),
                    float(b),
                    xtol=1e-14,
                    rtol=1e-15,
                    maxiter=200,
                )
            )
    if not roots:
        if np.all(vals > 0.0):
            raise NoRootError(
                f"excess {excess:.6g} is below the smallest attainable {excess + vals.min():.6g}",
                "separatrix",
            )
        raise NoRootError(f"excess {excess:.6g} needs s_minus beyond {S_MINUS_MAX}", "beyond-bracket")
    bands = [TiltBand.from_s_minus(r, nu) for r in roots]
    t1 = [stage_times_general(b, gamma, m, n).That1 for b in bands]
    for band, t in zip(bands, t1):
        if t >= 0.0:
            return band
    return bands[int(np.argmax(t1))]


def min_tilt_general(m: float, n: float, gamma: float, delta: float) -> float:
    """Smallest ``s_minus`` for which the stage-1 time is non-negative."""
    nu = delta / gamma

    def that1(s: float) -> float:
        return stage_times_general(TiltBand.from_s_minus(s, nu), gamma, m, n).That1

    lo = max(separatrix_s_minus(nu), 1e-6)
    grid = np.geomspace(lo, S_MINUS_MAX, 40)
    vals = [that1(float(s)) for s in grid]
    if vals[0] >= 0.0:
        raise NoRootError("stage 1 time positive at the separatrix limit", "separatrix")
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa < 0.0 <= fb:
            return optimize.brentq(that1, float(a), float(b), xtol=1e-14, rtol=1e-15, maxiter=200)
    raise NoRootError(f"n = {n} twists infeasible for every s_minus", "infeasible-for-all-s")


def plan_dive_general(req: DiveRequest) -> DivePlan:
    """Solve the tri-axial master equation for ``req``; infeasibility is reported, not raised."""
    body = req.body
    d = derive_dimensionless(body)
    if d.delta > 0.0:
        raise ValueError("plan_dive_general needs I1 <= I2")
    That_tot = d.to_scaled_time(req.T_tot)
    plan = DivePlan(
        case="general",
        m=req.m,
        n=req.n,
        T_tot=req.T_tot,
        gamma=d.gamma,
        delta=d.delta,
        time_scale=d.time_scale,
        That_tot=That_tot,
    )
    try:
        band = solve_band_for_ttot(That_tot, req.m, req.n, d.gamma, d.delta)
    except NoRootError as exc:
        plan.reason = f"{exc.diagnostic}: {exc}"
        plan.warnings = ballpark_warnings(None, body.l, req.T_tot)
        return plan
    st = stage_times_general(band, d.gamma, req.m, req.n)
    rho = rho_from_band(band, d.gamma)
    plan.s = band.s_plus
    plan.s_minus = band.s_minus
    plan.rho = rho
    plan.beta = rho / d.gamma
    plan.h = rho * body.l
    plan.That1, plan.That2, plan.That3 = st.That1, st.That2, st.That3
    plan.P3_hat, plan.Phi3 = st.P3_hat, st.Phi3
    plan.phi1 = st.That1
    plan.phi2 = st.phi2
    plan.phi3 = st.Phi3 * (req.n - 0.5)
    plan.psi3 = _TWO_PI * (req.n - 0.5)
    plan.feasible = st.feasible
    if not st.feasible:
        plan.reason = f"That1 < 0 ({st.That1:.6g}): {req.n} twists need a larger s_minus than {band.s_minus:.6g}"
    plan.warnings = ballpark_warnings(plan.h, body.l, req.T_tot)
    return plan
