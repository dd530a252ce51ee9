"""Complete elliptic integrals and the quadrature oracles behind them.

All functions take the *parameter* ``m = k**2`` (never the modulus ``k``).
The fast path uses Carlson's symmetric forms (scipy.special); the
defining integrals are also available through :func:`quad_defining_integral`
so every closed form in the package can be checked against an independent
adaptive quadrature.
"""

from __future__ import annotations

import math
import warnings
from typing import Callable

from scipy import integrate, special

__all__ = [
    "EllipticDomainError",
    "QuadratureError",
    "carlson_rc",
    "carlson_rd",
    "carlson_rf",
    "carlson_rj",
    "ellip_e",
    "ellip_k",
    "ellip_pi",
    "between_roots",
    "quad_defining_integral",
    "DEFINING_INTEGRALS",
]

class EllipticDomainError(ValueError):
    """Argument outside the domain where the complete integral is finite."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested error target."""


# Carlson symmetric forms -------------------------------------------------
# thin wrappers over scipy.special that raise on the boundary cases the
# planners must never silently pass through


def carlson_rc(x: float, y: float) -> float:
    """Degenerate form R_C(x, y) for x >= 0, y != 0 (principal value for y < 0)."""
    if x < 0 or y == 0:
        raise EllipticDomainError(f"R_C undefined for x={x}, y={y}")
    return float(special.elliprc(x, y))


def carlson_rf(x: float, y: float, z: float) -> float:
    """R_F(x, y, z) for nonnegative arguments, at most one of them zero."""
    if min(x, y, z) < 0 or (x == 0) + (y == 0) + (z == 0) > 1:
        raise EllipticDomainError(f"R_F undefined for ({x}, {y}, {z})")
    return float(special.elliprf(x, y, z))


def carlson_rd(x: float, y: float, z: float) -> float:
    """R_D(x, y, z) = R_J(x, y, z, z); requires z > 0 and x + y > 0."""
    if min(x, y) < 0 or z <= 0 or x + y == 0:
        raise EllipticDomainError(f"R_D undefined for ({x}, {y}, {z})")
    return float(special.elliprd(x, y, z))


def carlson_rj(x: float, y: float, z: float, p: float) -> float:
    """R_J(x, y, z, p) for nonnegative x, y, z (at most one zero) and p > 0."""
    if min(x, y, z) < 0 or (x == 0) + (y == 0) + (z == 0) > 1 or p <= 0:
        raise EllipticDomainError(f"R_J undefined for ({x}, {y}, {z}, {p})")
    return float(special.elliprj(x, y, z, p))


# Legendre complete integrals ---------------------------------------------


def ellip_k(m: float) -> float:
    """Complete integral of the first kind K(m), 0 <= m < 1."""
    if not 0.0 <= m < 1.0:
        raise EllipticDomainError(f"K(m) requires 0 <= m < 1, got m={m}")
    return carlson_rf(0.0, 1.0 - m, 1.0)


def ellip_e(m: float) -> float:
    """Complete integral of the second kind E(m), 0 <= m <= 1."""
    if not 0.0 <= m <= 1.0:
        raise EllipticDomainError(f"E(m) requires 0 <= m <= 1, got m={m}")
    if m == 1.0:
        return 1.0
    y = 1.0 - m
    return carlson_rf(0.0, y, 1.0) - m * carlson_rd(0.0, y, 1.0) / 3.0


def ellip_pi(n: float, m: float) -> float:
    """Complete integral of the third kind.

    ``Pi(n, m) = int_0^{pi/2} dt / ((1 - n sin^2 t) sqrt(1 - m sin^2 t))``,
    defined here for characteristic ``n < 1`` (negative values included) and
    ``0 <= m < 1``.
    """
    if not n < 1.0:
        raise EllipticDomainError(f"Pi(n, m) requires n < 1, got n={n}")
    if not 0.0 <= m < 1.0:
        raise EllipticDomainError(f"Pi(n, m) requires 0 <= m < 1, got m={m}")
    y = 1.0 - m
    rf = carlson_rf(0.0, y, 1.0)
    if n == 0.0:
        return rf
    return rf + n * carlson_rj(0.0, y, 1.0, 1.0 - n) / 3.0


# Quadrature oracles -------------------------------------------------------


def _quad(
    f: Callable[[float], float],
    a: float,
    b: float,
    epsabs: float,
    breaks: list[float] | None = None,
) -> float:
    edges = [a, *(x for x in sorted(breaks or ()) if a < x < b), b]
    total = 0.0
    total_err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        with warnings.catch_warnings():
            # the error estimate is checked below; quad's own warnings add nothing
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            value, err = integrate.quad(f, lo, hi, epsabs=epsabs * 1e-2, epsrel=1e-13, limit=400)
        total += value
        total_err += err
    # large values (near a pole) cannot be resolved below ~1e-12 relative
    if not math.isfinite(total) or total_err > max(epsabs, 1e-12 * abs(total)):
        raise QuadratureError(f"quadrature error estimate {total_err:.3e} exceeds {epsabs:.1e}")
    return total


def _geometric_breaks(width: float) -> list[float]:
    out = []
    while width < 1.0:
        out.append(width)
        width *= 2.0
    return out


def between_roots(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    g: Callable[[float], float],
    epsabs: float = 1e-10,
    near_lo: float | None = None,
    near_hi: float | None = None,
) -> float:
    """Integrate ``f(z) / sqrt((z - lo) (hi - z) g(z))`` over ``[lo, hi]``.

    The substitution ``z = lo + (hi - lo) (1 - cos u) / 2`` absorbs both
    square-root endpoint singularities, leaving ``int_0^pi f / sqrt(g) du``.
    ``g`` must be positive on the closed interval; ``lo == hi`` is allowed and
    gives ``pi f(lo) / sqrt(g(lo))``.

    ``near_lo`` / ``near_hi`` give the distance from an endpoint to a root of
    ``g`` just outside the interval. When that root is close, the integrand
    has a narrow peak at the endpoint and the ``u`` range is split
    geometrically around the peak width.
    """
    half = (hi - lo) / 2.0

    def smooth(u: float) -> float:
        # measure z from the nearer endpoint so roots of g just outside stay resolved
        if u <= math.pi / 2:
            z = lo + 2.0 * half * math.sin(u / 2) ** 2
        else:
            z = hi - 2.0 * half * math.cos(u / 2) ** 2
        return f(z) / math.sqrt(g(z))

    breaks: list[float] = []
    if half > 0:
        if near_lo is not None:
            breaks += _geometric_breaks(2.0 * math.sqrt(near_lo / (2.0 * half)))
        if near_hi is not None:
            breaks += [math.pi - w for w in _geometric_breaks(2.0 * math.sqrt(near_hi / (2.0 * half)))]
    return _quad(smooth, 0.0, math.pi, epsabs, breaks)


def _quad_k(p: dict) -> float:
    m = p["m"]
    return _quad(lambda t: 1.0 / math.sqrt(1.0 - m * math.sin(t) ** 2), 0.0, math.pi / 2, 1e-12)


def _quad_e(p: dict) -> float:
    m = p["m"]
    return _quad(lambda t: math.sqrt(1.0 - m * math.sin(t) ** 2), 0.0, math.pi / 2, 1e-12)


def _quad_pi(p: dict) -> float:
    n, m = p["n"], p["m"]

    def f(t: float) -> float:
        s2 = math.sin(t) ** 2
        return 1.0 / ((1.0 - n * s2) * math.sqrt(1.0 - m * s2))

    return _quad(f, 0.0, math.pi / 2, 1e-10)


def _sym_setup(p: dict) -> tuple[float, float]:
    s = p["s"]
    if not 0.0 < s < 1.0:
        raise EllipticDomainError(f"tilt s must lie in (0, 1), got {s}")
    return s, s * s / (1.0 - s * s)


# Symmetric stage 2.  With z = sin(theta) the tilting arc satisfies
#   dtau = 2 dz / (gamma sqrt((s^2 - z^2)(z^2 + a^2))),  a^2 = s^2 / (1 - s^2),
# and the integrands are even in z, so integrate over [-s, s] and halve.


def _t2_sym(p: dict) -> float:
    s, a2 = _sym_setup(p)
    inner = between_roots(lambda z: 1.0, -s, s, lambda z: z * z + a2)
    return inner / p["gamma"]


def _t2_minus_phi2_sym(p: dict) -> float:
    s, a2 = _sym_setup(p)
    return 0.5 * between_roots(lambda z: z * z / (1.0 - z * z), -s, s, lambda z: z * z + a2)


def _phi2_sym(p: dict) -> float:
    s, a2 = _sym_setup(p)
    gamma = p["gamma"]
    return 0.5 * between_roots(
        lambda z: 2.0 / gamma - z * z / (1.0 - z * z), -s, s, lambda z: z * z + a2
    )


def _gen_setup(p: dict) -> dict:
    s_minus, gamma, delta = p["s_minus"], p["gamma"], p["delta"]
    if not 0.0 < s_minus < 1.0:
        raise EllipticDomainError(f"s_minus must lie in (0, 1), got {s_minus}")
    nu = delta / gamma
    c_plus = math.sqrt((1.0 - s_minus**2) / (1.0 - nu))
    s_plus = math.sqrt((s_minus**2 - nu) / (1.0 - nu))
    rho_hat = gamma * s_minus**2 / (2.0 * c_plus)
    return {
        "s_minus": s_minus,
        "s_plus": s_plus,
        "c_plus": c_plus,
        "nu": nu,
        "gamma": gamma,
        "delta": delta,
        "rho_hat": rho_hat,
        # second root of (gamma - delta) z^2 - 2 rho_hat z - gamma, the first being -c_plus
        "r_plus": gamma / ((gamma - delta) * c_plus),
    }


# General stage 2 in the rotor-last chart, z = sin(theta~) running from 0 to
# -c_plus (rho_hat > 0).  The orbit polynomial
#   P(z) = z (delta z + 2 rho_hat)((gamma - delta) z^2 - 2 rho_hat z - gamma)
# factors as (z + c_plus)(0 - z) g(z) on that interval.


def _gen_g(q: dict) -> Callable[[float], float]:
    gd, delta, rho_hat, r_plus = q["gamma"] - q["delta"], q["delta"], q["rho_hat"], q["r_plus"]
    return lambda z: gd * (delta * z + 2.0 * rho_hat) * (r_plus - z)


def _gen_near(q: dict) -> dict:
    # the root -2 rho_hat / delta approaches z = 0 at the separatrix
    if q["delta"] == 0.0:
        return {}
    return {"near_hi": -2.0 * q["rho_hat"] / q["delta"]}


def _t2_gen(p: dict) -> float:
    q = _gen_setup(p)
    return between_roots(lambda z: 1.0, -q["c_plus"], 0.0, _gen_g(q), **_gen_near(q))


def _phi2_tilde_gen(p: dict) -> float:
    q = _gen_setup(p)
    delta, rho_hat = q["delta"], q["rho_hat"]

    # d(phi~)/dtau = 1 + gamma sin^2(psi~) expressed through z on the orbit
    def rate(z: float) -> float:
        return 1.0 - z * (delta * z + 2.0 * rho_hat) / (1.0 - z * z)

    # the rate has a pole at z = -1, just beyond the end of the arc
    c = q["c_plus"]
    gap = (1.0 - c * c) / (1.0 + c)
    return between_roots(rate, -c, 0.0, _gen_g(q), near_lo=gap, **_gen_near(q))


def _phi2_direct_gen(p: dict) -> float:
    q = _gen_setup(p)
    gamma, delta, rho_hat = q["gamma"], q["delta"], q["rho_hat"]

    # d(phi)/dtau in the somersault-tilt-twist chart, with L2 = -z
    def rate(z: float) -> float:
        return 1.0 + gamma * z * (delta * z + rho_hat) / (gamma + delta * z * z + 2.0 * rho_hat * z)

    return between_roots(rate, -q["c_plus"], 0.0, _gen_g(q), **_gen_near(q))


def _t2_minus_phi2_gen(p: dict) -> float:
    q = _gen_setup(p)
    gamma, delta, rho_hat = q["gamma"], q["delta"], q["rho_hat"]

    def rate(z: float) -> float:
        return -gamma * z * (delta * z + rho_hat) / (gamma + delta * z * z + 2.0 * rho_hat * z)

    return between_roots(rate, -q["c_plus"], 0.0, _gen_g(q), **_gen_near(q))


# General rotor-off twisting with z = sin(theta) oscillating in [s_minus, s_plus]:
#   dz/dtau = gamma sqrt(1 - nu) sqrt((s_plus^2 - z^2)(z^2 - s_minus^2)),
# four such quarter-swings per twist period.


def _twist_g(q: dict) -> Callable[[float], float]:
    sp, sm = q["s_plus"], q["s_minus"]
    return lambda z: (sp + z) * (z + sm)


def _p3_gen(p: dict) -> float:
    q = _gen_setup(p)
    inner = between_roots(
        lambda z: 1.0, q["s_minus"], q["s_plus"], _twist_g(q), near_lo=2.0 * q["s_minus"]
    )
    return 4.0 * inner / (q["gamma"] * math.sqrt(1.0 - q["nu"]))


def _p3_minus_phi3_gen(p: dict) -> float:
    q = _gen_setup(p)
    sm2 = q["s_minus"] ** 2
    inner = between_roots(
        lambda z: (z * z - sm2) / (1.0 - z * z),
        q["s_minus"],
        q["s_plus"],
        _twist_g(q),
        near_lo=2.0 * q["s_minus"],
    )
    return 4.0 * inner / math.sqrt(1.0 - q["nu"])


def _phi3_gen(p: dict) -> float:
    return _p3_gen(p) - _p3_minus_phi3_gen(p)


DEFINING_INTEGRALS: dict[str, Callable[[dict], float]] = {
    "K": _quad_k,
    "E": _quad_e,
    "Pi": _quad_pi,
    "t2_sym": _t2_sym,
    "phi2_sym": _phi2_sym,
    "t2_minus_phi2_sym": _t2_minus_phi2_sym,
    "t2_gen": _t2_gen,
    "phi2_tilde_gen": _phi2_tilde_gen,
    "phi2_direct_gen": _phi2_direct_gen,
    "t2_minus_phi2_gen": _t2_minus_phi2_gen,
    "p3_gen": _p3_gen,
    "phi3_gen": _phi3_gen,
    "p3_minus_phi3_gen": _p3_minus_phi3_gen,
}


def quad_defining_integral(kind: str, params: dict) -> float:
    """Evaluate one of the defining integrals by adaptive quadrature.

    ``kind`` selects an entry of :data:`DEFINING_INTEGRALS`. Symmetric kinds
    take ``s`` (and ``gamma`` where it enters); general kinds take
    ``s_minus``, ``gamma`` and ``delta``. Raises :class:`QuadratureError`
    when the absolute error estimate exceeds 1e-10 (1e-12 for K, E, Pi), or
    1e-12 relative for values so large that the absolute target is below
    double-precision roundoff.
    """
    try:
        fn = DEFINING_INTEGRALS[kind]
    except KeyError:
        raise ValueError(f"unknown integral kind {kind!r}") from None
    return fn(params)
