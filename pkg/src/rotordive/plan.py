"""Dive requests, dive plans and the checks shared by both planners."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from rotordive.dynamics import BodyParams

# Human-diver ballparks; exceeding them gives a warning, not an error.
H_BALLPARK = 8 * math.pi
L_BALLPARK = 50 * math.pi
T_TOT_BALLPARK = (0.8, 3.0)


class NoRootError(ValueError):
    """A planning equation has no root in its bracket.

    ``diagnostic`` is a short machine-friendly tag such as ``"zero-tilt"``,
    ``"beyond-bracket"`` or ``"infeasible-for-all-s"``.
    """

    def __init__(self, message: str, diagnostic: str):
        super().__init__(message)
        self.diagnostic = diagnostic


def is_half_multiple(x: float) -> bool:
    return abs(2 * x - round(2 * x)) < 1e-12


@dataclass(frozen=True)
class DiveRequest:
    m: float
    n: float
    T_tot: float
    body: BodyParams

    def __post_init__(self) -> None:
        if not self.m > 0 or not is_half_multiple(self.m):
            raise ValueError(f"somersault count m must be a positive multiple of 1/2, got {self.m}")
        if not self.n >= 0.5 or not is_half_multiple(self.n):
            raise ValueError(f"twist count n must be a multiple of 1/2 and >= 1/2, got {self.n}")
        if not self.T_tot > 0:
            raise ValueError(f"total time must be positive, got {self.T_tot}")

    @property
    def integer_twists(self) -> bool:
        return abs(self.n - round(self.n)) < 1e-12


@dataclass
class DivePlan:
    """Stage schedule for a twisting somersault.

    Scaled durations ``That*`` are in units of ``I1 / l``; ``T1``..``T5`` are
    seconds with ``T4 = T2`` and ``T5 = T1``. ``s`` is the sine of the maximal
    tilt (``s_plus`` in the tri-axial case, where ``s_minus`` is the solved
    parameter). ``rho`` and ``h`` are magnitudes; the rotor direction of each
    stage is fixed by the stage schedule.
    """

    case: str
    m: float
    n: float
    T_tot: float
    gamma: float
    delta: float
    time_scale: float
    That_tot: float
    feasible: bool = False
    reason: str | None = None
    warnings: list[str] = field(default_factory=list)
    s: float | None = None
    s_minus: float | None = None
    beta: float | None = None
    rho: float | None = None
    h: float | None = None
    That1: float | None = None
    That2: float | None = None
    That3: float | None = None
    P3_hat: float | None = None
    Phi3: float | None = None
    phi1: float | None = None
    phi2: float | None = None
    phi3: float | None = None
    psi2: float = math.pi / 2
    psi3: float | None = None

    @property
    def terminal_sign(self) -> int:
        """+1 if the dive ends somersaulting about L = (l,0,0), -1 for (-l,0,0)."""
        return 1 if abs(self.n - round(self.n)) < 1e-12 else -1

    @property
    def solved(self) -> bool:
        return self.That1 is not None

    def physical(self, scaled: float | None) -> float | None:
        return None if scaled is None else scaled * self.time_scale

    @property
    def stage_durations(self) -> tuple[float, float, float, float, float] | None:
        """Physical ``(T1, T2, T3, T4, T5)`` in seconds."""
        if not self.solved:
            return None
        t1, t2, t3 = (self.physical(x) for x in (self.That1, self.That2, self.That3))
        return (t1, t2, t3, t2, t1)

    @property
    def scaled_durations(self) -> tuple[float, float, float, float, float] | None:
        if not self.solved:
            return None
        return (self.That1, self.That2, self.That3, self.That2, self.That1)


def ballpark_warnings(h: float | None, l: float, T_tot: float) -> list[str]:
    out = []
    if h is not None and h > H_BALLPARK:
        out.append(f"rotor momentum h = {h:.4g} exceeds the human ballpark 8*pi")
    if l > L_BALLPARK:
        out.append(f"angular momentum l = {l:.4g} exceeds the human ballpark 50*pi")
    lo, hi = T_TOT_BALLPARK
    if not lo <= T_tot <= hi:
        out.append(f"total time {T_tot:.4g} s is outside the ballpark [{lo}, {hi}] s")
    return out
