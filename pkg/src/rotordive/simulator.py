"""Switched-ODE simulation of the five dive stages.

The state is ``y = (L1, L2, L3, phi, psi)``: the unit body-frame angular
momentum (scaled time, so ``|L| = 1``) plus the somersault angle and the
unwrapped twist angle, both accumulated by quadrature of chart-free rates.
Euler angles are derived views; ``theta = asin(L3)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.integrate import OdeSolution, solve_ivp

from rotordive.dynamics import DimensionlessParams
from rotordive.plan import DivePlan

ROTOR_OFF = "rotor-off"
ROTOR_ON = "rotor-on"

# stop modes
DURATION = "duration"
PSI_CROSSING = "psi-crossing"  # cos(psi) = 0, i.e. L1 changes sign
PSI_TARGET = "psi-target"  # unwrapped psi reaches a given value
THETA_TURN = "theta-turn"  # theta' changes sign

CSV_COLUMNS = ("tau", "phi", "theta", "psi", "L1", "L2", "L3", "E", "stage")


class IntegrationError(RuntimeError):
    """Integrator failure, or a stop event that never happened."""


@dataclass(frozen=True)
class Tolerances:
    rtol: float = 1e-10
    atol: float = 1e-12
    first_step: float = 1e-3
    max_step: float = 0.1
    # horizon for event stops, scaled time
    max_tau: float = 500.0


@dataclass(frozen=True)
class StageSpec:
    """One stage of a dive.

    ``duration`` is the scaled duration for ``stop="duration"`` (negative
    integrates backwards) and is ignored otherwise. ``psi_target`` is the
    absolute unwrapped twist angle for ``stop="psi-target"``.
    """

    kind: str
    rho_signed: float = 0.0
    stop: str = DURATION
    duration: float | None = None
    psi_target: float | None = None
    index: int = 0

    def __post_init__(self) -> None:
        if self.kind not in (ROTOR_OFF, ROTOR_ON):
            raise ValueError(f"unknown stage kind {self.kind!r}")
        if self.kind == ROTOR_OFF and self.rho_signed != 0.0:
            raise ValueError("a rotor-off stage must have rho_signed = 0")
        if self.stop == DURATION:
            if self.duration is None:
                raise ValueError("duration stop needs a duration")
        elif self.stop == PSI_TARGET:
            if self.psi_target is None:
                raise ValueError("psi-target stop needs psi_target")
        elif self.stop not in (PSI_CROSSING, THETA_TURN):
            raise ValueError(f"unknown stop mode {self.stop!r}")


def rhs(y: np.ndarray, delta: float, gamma: float, rho: float) -> np.ndarray:
    """Time derivative of ``(L1, L2, L3, phi, psi)`` for signed rotor strength ``rho``."""
    L1, L2, L3 = y[0], y[1], y[2]
    w1 = L1
    w2 = (1.0 + delta) * (L2 - rho)
    w3 = (1.0 + gamma) * L3
    d1 = L2 * w3 - L3 * w2
    d2 = L3 * w1 - L1 * w3
    d3 = L1 * w2 - L2 * w1
    c2 = L1 * L1 + L2 * L2
    dphi = 1.0 + (delta * L2 * L2 - rho * (1.0 + delta) * L2) / c2
    dpsi = (L2 * d1 - L1 * d2) / c2
    return np.array([d1, d2, d3, dphi, dpsi])


def stage_energy(L: np.ndarray, d: DimensionlessParams, rho: float) -> np.ndarray:
    """Scaled energy of momentum samples ``L`` (shape (3,) or (3, N))."""
    w2 = L[1] - rho
    return 0.5 * (L[0] ** 2 + (1.0 + d.delta) * w2**2 + (1.0 + d.gamma) * L[2] ** 2)


def initial_state(theta: float = 0.0, psi: float = 0.0, phi: float = 0.0) -> np.ndarray:
    """State vector at tilt ``theta`` and twist ``psi`` (somersault-tilt-twist chart)."""
    ct = math.cos(theta)
    return np.array([ct * math.cos(psi), -ct * math.sin(psi), math.sin(theta), phi, psi])


@dataclass
class StageSegment:
    index: int
    spec: StageSpec
    d: DimensionlessParams
    tau0: float
    tau1: float
    sol: OdeSolution
    # integrator step points (tau, y); y has shape (5, N)
    ts: np.ndarray
    ys: np.ndarray
    # crossing times of cos(psi) = 0 seen during the stage (absolute tau)
    crossings: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def rho(self) -> float:
        return self.spec.rho_signed

    @property
    def y0(self) -> np.ndarray:
        return self.ys[:, 0]

    @property
    def y1(self) -> np.ndarray:
        return self.ys[:, -1]

    @property
    def duration(self) -> float:
        return self.tau1 - self.tau0

    def __call__(self, tau) -> np.ndarray:
        return self.sol(tau)

    def energy_drift(self) -> float:
        E = stage_energy(self.ys[:3], self.d, self.rho)
        return float(np.max(np.abs(E - E[0])))

    def norm_drift(self) -> float:
        n = np.linalg.norm(self.ys[:3], axis=0)
        return float(np.max(np.abs(n - n[0])))


@dataclass
class Trajectory:
    """Concatenated stage segments; ``tau`` runs continuously across stages."""

    segments: list[StageSegment] = field(default_factory=list)

    @property
    def end(self) -> np.ndarray:
        return self.segments[-1].y1

    @property
    def start(self) -> np.ndarray:
        return self.segments[0].y0

    @property
    def tau_end(self) -> float:
        return self.segments[-1].tau1

    def samples(self, per_unit: float = 50.0) -> dict[str, np.ndarray]:
        """Uniform-in-tau samples of every stage, with strictly increasing tau.

        The first point of each later stage duplicates the last of the
        previous stage and is dropped.
        """
        cols: dict[str, list] = {c: [] for c in CSV_COLUMNS}
        for k, seg in enumerate(self.segments):
            n = max(2, int(math.ceil(abs(seg.duration) * per_unit)) + 1)
            tau = np.linspace(seg.tau0, seg.tau1, n)
            if k > 0:
                tau = tau[1:]
            y = seg(tau)
            cols["tau"].append(tau)
            cols["phi"].append(y[3])
            cols["theta"].append(np.arcsin(np.clip(y[2] / np.linalg.norm(y[:3], axis=0), -1, 1)))
            cols["psi"].append(y[4])
            for i in range(3):
                cols[f"L{i + 1}"].append(y[i])
            cols["E"].append(stage_energy(y[:3], seg.d, seg.rho))
            cols["stage"].append(np.full(tau.size, seg.index, dtype=int))
        return {c: np.concatenate(v) for c, v in cols.items()}

    def to_csv(self, path, l: float = 1.0, per_unit: float = 50.0) -> None:
        """Write samples; ``L`` and ``E`` are given in physical units for momentum ``l``."""
        s = self.samples(per_unit)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for i in range(s["tau"].size):
                w.writerow(
                    [
                        repr(float(s["tau"][i])),
                        repr(float(s["phi"][i])),
                        repr(float(s["theta"][i])),
                        repr(float(s["psi"][i])),
                        repr(float(s["L1"][i] * l)),
                        repr(float(s["L2"][i] * l)),
                        repr(float(s["L3"][i] * l)),
                        repr(float(s["E"][i])),
                        int(s["stage"][i]),
                    ]
                )


def _events(spec: StageSpec, delta: float, gamma: float, rho: float):
    def crossing(t, y):
        return y[0]

    crossing.terminal = spec.stop == PSI_CROSSING
    crossing.direction = 0
    events = [crossing]
    if spec.stop == PSI_TARGET:

        def target(t, y):
            return y[4] - spec.psi_target

        target.terminal = True
        target.direction = 0
        events.append(target)
    elif spec.stop == THETA_TURN:

        def turn(t, y):
            return rhs(y, delta, gamma, rho)[2]

        turn.terminal = True
        turn.direction = 0
        events.append(turn)
    return events


def integrate_stage(
    start: np.ndarray,
    spec: StageSpec,
    d: DimensionlessParams,
    tol: Tolerances = Tolerances(),
    tau0: float = 0.0,
) -> StageSegment:
    """Integrate one stage from state ``start`` beginning at scaled time ``tau0``.

    ``d`` supplies ``delta`` and ``gamma``; the rotor strength is taken from
    ``spec.rho_signed``. Event stops are localized on the dense output by
    Brent's method, which meets ``|event| <= 1e-10`` comfortably.
    """
    delta, gamma, rho = d.delta, d.gamma, spec.rho_signed
    d_stage = d.with_rho(rho)
    if spec.stop == DURATION:
        t_end = tau0 + spec.duration
    else:
        t_end = tau0 + tol.max_tau
    y0 = np.asarray(start, dtype=float)
    if spec.stop == PSI_TARGET and y0[4] == spec.psi_target:
        t_end = tau0
    if t_end == tau0:
        ts = np.array([tau0])
        ys = y0.reshape(5, 1)
        return StageSegment(spec.index, spec, d_stage, tau0, tau0, _ConstantSolution(y0), ts, ys)
    events = _events(spec, delta, gamma, rho)
    res = solve_ivp(
        lambda t, y: rhs(y, delta, gamma, rho),
        (tau0, t_end),
        y0,
        method="DOP853",
        rtol=tol.rtol,
        atol=tol.atol,
        first_step=tol.first_step,
        max_step=tol.max_step,
        dense_output=True,
        events=events,
    )
    if res.status == -1:
        raise IntegrationError(f"stage {spec.index}: {res.message} near tau = {res.t[-1]:.6g}")
    if spec.stop != DURATION and res.status != 1:
        raise IntegrationError(
            f"stage {spec.index}: {spec.stop} event not reached within tau horizon {tol.max_tau}"
        )
    ts, ys = res.t, res.y
    if spec.stop != DURATION:
        # solve_ivp ends the step arrays at the localized event
        ev = res.t_events[0] if spec.stop == PSI_CROSSING else res.t_events[1]
        t_stop = float(ev[0])
        ts = np.append(res.t[res.t < t_stop], t_stop)
        ys = np.column_stack([res.y[:, res.t < t_stop], res.sol(t_stop)])
    crossings = np.asarray(res.t_events[0], dtype=float)
    return StageSegment(spec.index, spec, d_stage, tau0, float(ts[-1]), res.sol, ts, ys, crossings)


class _ConstantSolution:
    """Dense output of a zero-length stage."""

    def __init__(self, y: np.ndarray):
        self.y = y

    def __call__(self, t):
        t = np.asarray(t)
        if t.ndim == 0:
            return self.y.copy()
        return np.repeat(self.y[:, None], t.size, axis=1)


def run_stages(
    start: np.ndarray,
    specs: list[StageSpec],
    d: DimensionlessParams,
    tol: Tolerances = Tolerances(),
) -> Trajectory:
    traj = Trajectory()
    y, tau = np.asarray(start, dtype=float), 0.0
    for spec in specs:
        seg = integrate_stage(y, spec, d, tol, tau)
        traj.segments.append(seg)
        y, tau = seg.y1, seg.tau1
    return traj


def relocalize_event(seg: StageSegment, window: float = 1e-3) -> float:
    """Re-solve ``L1 = 0`` on the dense output around the segment end; returns the shift."""
    f = lambda t: float(seg(t)[0])  # noqa: E731
    a = max(seg.tau0, seg.tau1 - window)
    b = seg.tau1 + window
    if f(a) * f(b) > 0:
        raise IntegrationError("no sign change of cos(psi) around the stage end")
    t = optimize.brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return t - seg.tau1


@dataclass(frozen=True)
class TransitResult:
    That2: float
    phi2: float
    end: np.ndarray
    segment: StageSegment

    @property
    def sin_tilt(self) -> float:
        return float(self.end[2])


def transit(d: DimensionlessParams, tol: Tolerances = Tolerances()) -> TransitResult:
    """Rotor-on motion from ``L = (1, 0, 0)`` to the ``psi = pi/2`` turning point.

    The rotor is applied with the sign that tilts toward positive ``theta``
    and twists toward positive ``psi`` (``rho_signed = -|rho|``).
    """
    if d.rho == 0.0:
        raise ValueError("transit needs the rotor on (rho != 0)")
    spec = StageSpec(ROTOR_ON, -abs(d.rho), PSI_CROSSING, index=2)
    seg = integrate_stage(initial_state(), spec, d, tol)
    return TransitResult(seg.duration, float(seg.y1[3]), seg.y1, seg)


def transit_oracle(d: DimensionlessParams, tol: Tolerances = Tolerances()) -> tuple[float, float]:
    """``(T2_hat, phi2)`` by direct integration of the tilting stage."""
    r = transit(d, tol)
    return r.That2, r.phi2


@dataclass
class ClosureReport:
    m: float
    n: float
    delta_phi: float
    delta_psi: float
    theta_final: float
    energy_drift: tuple[float, ...]
    norm_drift: tuple[float, ...]
    # tau at which cos(psi) first vanished during stage 2, relative to its start
    stage2_event_tau: float | None
    stage2_planned_tau: float
    trajectory: Trajectory

    @property
    def phi_error(self) -> float:
        return self.delta_phi - 2.0 * math.pi * self.m

    @property
    def psi_error(self) -> float:
        return self.delta_psi - 2.0 * math.pi * self.n

    @property
    def max_closure_error(self) -> float:
        return max(abs(self.phi_error), abs(self.psi_error))

    def ok(self, tol: float = 1e-4) -> bool:
        return self.max_closure_error <= tol

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "delta_phi": self.delta_phi,
            "delta_psi": self.delta_psi,
            "phi_error": self.phi_error,
            "psi_error": self.psi_error,
            "theta_final": self.theta_final,
            "energy_drift": list(self.energy_drift),
            "norm_drift": list(self.norm_drift),
            "stage2_event_tau": self.stage2_event_tau,
            "stage2_planned_tau": self.stage2_planned_tau,
        }


def plan_stage_specs(plan: DivePlan) -> list[StageSpec]:
    """The five stages of ``plan`` with their rotor signs.

    Stage 2 uses ``-rho``. Stage 4 flips that sign for integer ``n`` and keeps
    it for half-integer ``n`` (the dive then ends about ``L = (-1, 0, 0)``).
    """
    rho = abs(plan.rho)
    sign4 = 1.0 if plan.terminal_sign > 0 else -1.0
    return [
        StageSpec(ROTOR_OFF, 0.0, DURATION, plan.That1, index=1),
        StageSpec(ROTOR_ON, -rho, DURATION, plan.That2, index=2),
        StageSpec(ROTOR_OFF, 0.0, DURATION, plan.That3, index=3),
        StageSpec(ROTOR_ON, sign4 * rho, DURATION, plan.That2, index=4),
        StageSpec(ROTOR_OFF, 0.0, DURATION, plan.That1, index=5),
    ]


def simulate_plan(
    plan: DivePlan,
    d: DimensionlessParams | None = None,
    tol: Tolerances = Tolerances(),
) -> ClosureReport:
    """Replay all five stages of a feasible plan and measure closure."""
    if not plan.feasible:
        raise ValueError(f"plan is not feasible: {plan.reason}")
    if d is None:
        d = DimensionlessParams(plan.delta, plan.gamma, abs(plan.rho), plan.time_scale)
    traj = run_stages(initial_state(), plan_stage_specs(plan), d, tol)
    y0, y1 = traj.start, traj.end
    seg2 = traj.segments[1]
    ev = seg2.crossings
    return ClosureReport(
        m=plan.m,
        n=plan.n,
        delta_phi=float(y1[3] - y0[3]),
        delta_psi=float(y1[4] - y0[4]),
        theta_final=math.asin(max(-1.0, min(1.0, float(y1[2])))),
        energy_drift=tuple(s.energy_drift() for s in traj.segments),
        norm_drift=tuple(s.norm_drift() for s in traj.segments),
        stage2_event_tau=float(ev[0] - seg2.tau0) if ev.size else None,
        stage2_planned_tau=plan.That2,
        trajectory=traj,
    )
