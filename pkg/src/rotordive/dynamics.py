"""Rigid body with a switchable rotor: parameters, equations of motion, energy.

Reference configuration: axis 1 is the somersault (lateral) axis, the rotor
spins about body axis 2 so the internal momentum is ``A = (0, h, 0)``, and the
space-fixed angular momentum is ``(l, 0, 0)``. Time is scaled as
``tau = t * l / I1`` so a pure somersault has unit angular rate.

Two Euler-angle charts are supported:

* ``"somersault-tilt-twist"``: ``R = R1(phi) R2(theta) R3(psi)`` giving
  ``L / l = (cos(theta) cos(psi), -cos(theta) sin(psi), sin(theta))``.
* ``"tilde"``: ``R = R1(phi~) R3(theta~) R2(psi~)`` (rotor axis last) giving
  ``L / l = (cos(theta~) cos(psi~), -sin(theta~), cos(theta~) sin(psi~))``.

Angles are never reduced modulo 2 pi here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

STT = "somersault-tilt-twist"
TILDE = "tilde"
CONVENTIONS = (STT, TILDE)

# chart rejected this close to |theta| = pi/2
CHART_MARGIN = 1e-9


class ChartSingularityError(ValueError):
    """State too close to the coordinate singularity of an Euler-angle chart."""


@dataclass(frozen=True)
class BodyParams:
    """Physical parameters of the diver model (SI units).

    Attributes:
        I1, I2, I3: principal moments of inertia, kg m^2.
        l: magnitude of the total angular momentum, kg m^2 / s.
        omega_d: rotor angular velocity, rad / s (0 means rotor off).
        I_d: rotor moment of inertia about its spin axis, kg m^2.
    """

    I1: float
    I2: float
    I3: float
    l: float
    omega_d: float = 0.0
    I_d: float = 0.0

    def __post_init__(self) -> None:
        if min(self.I1, self.I2, self.I3) <= 0:
            raise ValueError("moments of inertia must be positive")
        if self.l <= 0:
            raise ValueError("angular momentum l must be positive")

    @property
    def h(self) -> float:
        return self.omega_d * self.I_d

    @property
    def inertia(self) -> np.ndarray:
        return np.array([self.I1, self.I2, self.I3])

    def in_planner_regime(self) -> bool:
        """True when ``I3 < I1 <= I2`` (somersault about the middle or a doubled axis)."""
        return self.I3 < self.I1 <= self.I2


@dataclass(frozen=True)
class DimensionlessParams:
    delta: float
    gamma: float
    rho: float = 0.0
    time_scale: float = 1.0
    rho_hat: float = field(init=False)
    beta: float = field(init=False)
    nu: float = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "rho_hat", self.rho * (1.0 + self.delta))
        object.__setattr__(self, "beta", self.rho / self.gamma)
        object.__setattr__(self, "nu", self.delta / self.gamma)

    @property
    def symmetric(self) -> bool:
        return self.delta == 0.0

    @property
    def rotor_on(self) -> bool:
        return self.rho != 0.0

    @property
    def inertia_ratios(self) -> np.ndarray:
        """``I1 * I^-1`` as a diagonal: ``(1, 1 + delta, 1 + gamma)``."""
        return np.array([1.0, 1.0 + self.delta, 1.0 + self.gamma])

    def with_rho(self, rho: float) -> "DimensionlessParams":
        return replace(self, rho=rho)

    def to_physical_time(self, tau: float) -> float:
        return tau * self.time_scale

    def to_scaled_time(self, t: float) -> float:
        return t / self.time_scale


def derive_dimensionless(p: BodyParams) -> DimensionlessParams:
    return DimensionlessParams(
        delta=p.I1 / p.I2 - 1.0,
        gamma=p.I1 / p.I3 - 1.0,
        rho=p.h / p.l,
        time_scale=p.I1 / p.l,
    )


@dataclass(frozen=True)
class AngleState:
    phi: float
    theta: float
    psi: float
    convention: str = STT

    def __post_init__(self) -> None:
        if self.convention not in CONVENTIONS:
            raise ValueError(f"unknown convention {self.convention!r}")


@dataclass(frozen=True)
class MomentumState:
    """Body-frame angular momentum ``L`` and internal rotor momentum ``A_int``."""

    L: np.ndarray
    A_int: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @classmethod
    def with_rotor(cls, L, h: float) -> "MomentumState":
        return cls(np.asarray(L, dtype=float), np.array([0.0, h, 0.0]))


def _check_chart(theta: float) -> None:
    if abs(theta) >= math.pi / 2 - CHART_MARGIN:
        raise ChartSingularityError(f"|theta| = {abs(theta)!r} at the chart singularity")


def unit_momentum(s: AngleState) -> np.ndarray:
    """``L / l`` in the body frame for an angle state in either chart."""
    ct, st = math.cos(s.theta), math.sin(s.theta)
    cp, sp = math.cos(s.psi), math.sin(s.psi)
    if s.convention == STT:
        return np.array([ct * cp, -ct * sp, st])
    return np.array([ct * cp, -st, ct * sp])


def angles_from_momentum(L, convention: str = STT, phi: float = 0.0) -> AngleState:
    """Tilt and twist of a body-frame momentum vector (``phi`` is passed through).

    ``psi`` is returned in (-pi, pi]; callers that track winding unwrap it.
    """
    L = np.asarray(L, dtype=float)
    u = L / np.linalg.norm(L)
    if convention == STT:
        theta = math.asin(max(-1.0, min(1.0, u[2])))
        psi = math.atan2(-u[1], u[0])
    elif convention == TILDE:
        theta = math.asin(max(-1.0, min(1.0, -u[1])))
        psi = math.atan2(u[2], u[0])
    else:
        raise ValueError(f"unknown convention {convention!r}")
    return AngleState(phi, theta, psi, convention)


def eom_angles(s: AngleState, d: DimensionlessParams) -> np.ndarray:
    """``(phi', theta', psi')`` in the somersault-tilt-twist chart (scaled time)."""
    if s.convention != STT:
        raise ValueError("eom_angles needs the somersault-tilt-twist convention")
    _check_chart(s.theta)
    delta, gamma, rh = d.delta, d.gamma, d.rho_hat
    ct, st = math.cos(s.theta), math.sin(s.theta)
    cp, sp = math.cos(s.psi), math.sin(s.psi)
    dphi = 1.0 + delta * sp * sp + rh * sp / ct
    dtheta = -delta * ct * cp * sp - rh * cp
    dpsi = gamma * st - delta * st * sp * sp - rh * (st / ct) * sp
    return np.array([dphi, dtheta, dpsi])


def eom_tilde_angles(s: AngleState, d: DimensionlessParams) -> np.ndarray:
    """``(phi~', theta~', psi~')`` in the rotor-last chart (scaled time)."""
    if s.convention != TILDE:
        raise ValueError("eom_tilde_angles needs the tilde convention")
    _check_chart(s.theta)
    delta, gamma = d.delta, d.gamma
    ct, st = math.cos(s.theta), math.sin(s.theta)
    cp, sp = math.cos(s.psi), math.sin(s.psi)
    dphi = 1.0 + gamma * sp * sp
    dtheta = gamma * ct * sp * cp
    dpsi = -d.rho_hat + st * (gamma * sp * sp - delta)
    return np.array([dphi, dtheta, dpsi])


def eom_momentum(s: MomentumState, p: BodyParams) -> np.ndarray:
    """Physical ``dL/dt = L x Omega`` with ``Omega = I^-1 (L - A)``."""
    L = np.asarray(s.L, dtype=float)
    omega = (L - np.asarray(s.A_int, dtype=float)) / p.inertia
    return np.cross(L, omega)


def scaled_momentum_rhs(L: np.ndarray, d: DimensionlessParams) -> np.ndarray:
    """``d(L/l)/dtau`` for the unit momentum vector."""
    omega = d.inertia_ratios * (L - np.array([0.0, d.rho, 0.0]))
    return np.cross(L, omega)


def scaled_angular_velocity(L: np.ndarray, d: DimensionlessParams) -> np.ndarray:
    """Body angular velocity in units of ``l / I1`` for unit momentum ``L``."""
    return d.inertia_ratios * (np.asarray(L) - np.array([0.0, d.rho, 0.0]))


def energy(state: AngleState | MomentumState, d: DimensionlessParams) -> float:
    """Scaled energy ``E = I1 / l^2 * (L - A)^T I^-1 (L - A) / 2``.

    For a :class:`MomentumState` the rotor momentum is taken from ``d.rho``
    and ``l`` from ``|L|``; ``A_int`` is ignored.
    """
    if isinstance(state, MomentumState):
        L = np.asarray(state.L, dtype=float)
        u = L / np.linalg.norm(L)
        w = u - np.array([0.0, d.rho, 0.0])
        return 0.5 * float(np.dot(w, d.inertia_ratios * w))
    ct, st = math.cos(state.theta), math.sin(state.theta)
    sp = math.sin(state.psi)
    if state.convention == STT:
        return 0.5 * (1.0 + d.gamma * st * st + d.delta * ct * ct * sp * sp) + 0.5 * d.rho_hat * (
            d.rho + 2.0 * ct * sp
        )
    return 0.5 * ((1.0 + d.gamma * sp * sp) * ct * ct + (1.0 + d.delta) * (d.rho + st) ** 2)


def sin_psi_from_energy(theta: float, E: float, d: DimensionlessParams) -> float:
    """Solve the symmetric-case energy for ``sin(psi)``.

    A result with magnitude above 1 means ``theta`` is outside the band the
    orbit can reach; use :func:`in_band` to test for that.
    """
    if d.delta != 0.0:
        raise ValueError("sin_psi_from_energy is only valid for delta = 0")
    if d.rho == 0.0:
        raise ValueError("sin_psi_from_energy needs the rotor on (rho != 0)")
    _check_chart(theta)
    rho, gamma = d.rho, d.gamma
    return (E - 0.5 * (1.0 + rho * rho)) / (rho * math.cos(theta)) - gamma / (
        2.0 * rho
    ) * math.sin(theta) * math.tan(theta)


def in_band(sin_psi: float) -> bool:
    return abs(sin_psi) <= 1.0
