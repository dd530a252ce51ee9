"""Command line: ``rotordive plan | simulate | curves``.

Exit codes: 0 ok, 1 usage or domain error, 2 infeasible plan,
3 simulation closure failed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from rotordive import __version__
from rotordive.dynamics import BodyParams, DimensionlessParams, derive_dimensionless
from rotordive.elliptic import EllipticDomainError, QuadratureError
from rotordive.gen_planner import (
    S_MINUS_MAX,
    TiltBand,
    min_tilt_general,
    plan_dive_general,
    separatrix_s_minus,
    stage_times_general,
)
from rotordive.plan import DivePlan, DiveRequest, NoRootError
from rotordive.simulator import (
    DURATION,
    ROTOR_ON,
    StageSpec,
    Tolerances,
    initial_state,
    plan_stage_specs,
    run_stages,
)
from rotordive.sym_planner import min_tilt, plan_dive, stage_times, t2_hat

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_VERIFY = 3

SCHEMA_VERSION = 1
FIGURES = ("t2", "t1", "ttot", "general-t1", "general-ttot")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


# --- plan document ---------------------------------------------------------


@dataclass
class PlanDocument:
    """Serializable plan: request, dimensionless numbers, solution, stages, feasibility."""

    request: dict
    dimensionless: dict
    solution: dict
    stages: list[dict]
    feasibility: dict
    planner: str
    notes: list[str] = field(default_factory=list)
    plan: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, allow_nan=False)

    @classmethod
    def from_json(cls, text: str) -> "PlanDocument":
        raw = json.loads(text)
        if not isinstance(raw, dict):
            raise ValueError("plan document must be a JSON object")
        if raw.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {raw.get('schema_version')!r}")
        names = {f.name for f in fields(cls)}
        missing = names - raw.keys() - {"notes", "plan"}
        if missing:
            raise ValueError(f"plan document lacks {sorted(missing)}")
        return cls(**{k: v for k, v in raw.items() if k in names})

    def dive_plan(self) -> DivePlan:
        return DivePlan(**self.plan)


def build_document(
    plan: DivePlan, body: BodyParams, planner: str, notes: list[str], I_d=None, omega_d=None
) -> PlanDocument:
    d = derive_dimensionless(body)
    request = {
        "m": plan.m,
        "n": plan.n,
        "T_tot": plan.T_tot,
        "body": {"I1": body.I1, "I2": body.I2, "I3": body.I3, "l": body.l, "I_d": I_d, "omega_d": omega_d},
    }
    rho = plan.rho
    dimensionless = {
        "delta": d.delta,
        "gamma": d.gamma,
        "nu": d.nu,
        "rho": rho,
        "rho_hat": None if rho is None else rho * (1.0 + d.delta),
        "beta": plan.beta,
        "time_scale": d.time_scale,
        "That_tot": plan.That_tot,
    }
    solution = {"case": plan.case, "s": plan.s, "s_minus": plan.s_minus, "h": plan.h}
    if plan.h is not None and I_d is not None:
        solution["omega_d"] = plan.h / I_d
    if plan.h is not None and omega_d is not None:
        solution["I_d"] = plan.h / omega_d
    stages = []
    if plan.solved:
        specs = plan_stage_specs(plan)
        dphi = (plan.phi1, plan.phi2, plan.phi3, plan.phi2, plan.phi1)
        dpsi = (0.0, math.pi / 2, plan.psi3, math.pi / 2, 0.0)
        for spec, ph, ps in zip(specs, dphi, dpsi):
            stages.append(
                {
                    "index": spec.index,
                    "kind": spec.kind,
                    "rho_signed": spec.rho_signed,
                    "duration_s": spec.duration * plan.time_scale,
                    "duration_scaled": spec.duration,
                    "delta_phi": ph,
                    "delta_psi": ps,
                }
            )
    feasibility = {"feasible": plan.feasible, "reason": plan.reason, "warnings": list(plan.warnings)}
    return PlanDocument(request, dimensionless, solution, stages, feasibility, planner, notes, asdict(plan))


def _body_from_args(a) -> BodyParams:
    try:
        return BodyParams(a.I1, a.I2, a.I3, a.l)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_plan(a) -> int:
    if a.omega_d is not None and a.I_d is not None:
        raise UsageError("--omega-d and --I-d are exclusive: the planner fixes h = omega_d * I_d")
    body = _body_from_args(a)
    try:
        req = DiveRequest(a.m, a.n, a.ttot, body)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    d = derive_dimensionless(body)
    if d.delta > 0:
        raise UsageError("need I1 <= I2 (somersault about the middle or a doubled axis)")
    if not d.gamma > 0:
        raise UsageError("need I3 < I1")
    notes = []
    if a.general or d.delta < 0:
        if not a.general:
            notes.append("I1 < I2: general tri-axial planner selected automatically")
        planner = "general"
        plan = plan_dive_general(req)
    else:
        planner = "symmetric"
        plan = plan_dive(req)
    doc = build_document(plan, body, planner, notes, I_d=a.I_d, omega_d=a.omega_d)
    text = doc.to_json()
    if a.output:
        with open(a.output, "w") as fh:
            fh.write(text + "\n")
    print(text)
    if not plan.feasible:
        return EXIT_INFEASIBLE
    if a.strict_ballpark and plan.warnings:
        print("ballpark exceeded: " + "; ".join(plan.warnings), file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def _specs_from_document(doc: PlanDocument) -> tuple[list[StageSpec], DimensionlessParams]:
    ts = doc.dimensionless["time_scale"]
    d = DimensionlessParams(doc.dimensionless["delta"], doc.dimensionless["gamma"], 0.0, ts)
    specs = []
    for st in doc.stages:
        kind = st["kind"]
        rho = float(st["rho_signed"]) if kind == ROTOR_ON else 0.0
        # physical duration is authoritative; the scaled copy is informational
        specs.append(StageSpec(kind, rho, DURATION, float(st["duration_s"]) / ts, index=int(st["index"])))
    return specs, d


def cmd_simulate(a) -> int:
    try:
        with open(a.plan) as fh:
            doc = PlanDocument.from_json(fh.read())
        specs, d = _specs_from_document(doc)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot read plan {a.plan!r}: {exc}") from exc
    if not doc.feasibility.get("feasible") or not specs:
        print(f"plan is not feasible: {doc.feasibility.get('reason')}", file=sys.stderr)
        return EXIT_INFEASIBLE
    tol = Tolerances(rtol=a.tol, atol=a.tol * 1e-2)
    traj = run_stages(initial_state(), specs, d, tol)
    m, n = doc.request["m"], doc.request["n"]
    y0, y1 = traj.start, traj.end
    dphi, dpsi = float(y1[3] - y0[3]), float(y1[4] - y0[4])
    report = {
        "m": m,
        "n": n,
        "delta_phi": dphi,
        "delta_psi": dpsi,
        "phi_error": dphi - 2 * math.pi * m,
        "psi_error": dpsi - 2 * math.pi * n,
        "theta_final": math.asin(max(-1.0, min(1.0, float(y1[2])))),
        "energy_drift": [s.energy_drift() for s in traj.segments],
        "norm_drift": [s.norm_drift() for s in traj.segments],
        "closure_tol": a.closure_tol,
    }
    worst = max(abs(report["phi_error"]), abs(report["psi_error"]))
    report["closed"] = worst <= a.closure_tol
    if a.export:
        traj.to_csv(a.export, l=doc.request["body"]["l"])
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK if report["closed"] else EXIT_VERIFY


# --- curves ----------------------------------------------------------------


def _parse_pair(text: str) -> tuple[float, float]:
    try:
        a, b = (float(x) for x in text.split(","))
    except ValueError as exc:
        raise UsageError(f"expected 'lo,hi', got {text!r}") from exc
    if not 0 < a < b < 1:
        raise UsageError(f"need 0 < lo < hi < 1, got {text!r}")
    return a, b


def _parse_list(text: str) -> list[float]:
    try:
        out = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --n-list {text!r}") from exc
    if not out:
        raise UsageError("--n-list is empty")
    return out


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def _fmt_n(n: float) -> str:
    return str(int(n)) if n == int(n) else repr(n)


def _safe(f):
    try:
        return f()
    except (EllipticDomainError, QuadratureError, NoRootError, ValueError):
        return None


def cmd_curves(a) -> int:
    fig = a.figure
    general = fig.startswith("general")
    if general and (a.delta is None or not a.delta < 0):
        raise UsageError("general figures need --delta < 0")
    ns = _parse_list(a.n_list)
    gamma, m = a.gamma, a.m
    nu = a.delta / gamma if general else 0.0
    if a.s_range:
        lo, hi = _parse_pair(a.s_range)
    elif general:
        lo, hi = max(separatrix_s_minus(nu), 1e-6), S_MINUS_MAX
    else:
        lo, hi = 1e-3, 0.99
    if a.samples < 2:
        raise UsageError("--samples must be >= 2")
    grid = np.linspace(lo, hi, a.samples)
    out = sys.stdout
    out.write(f"# rotordive {__version__} curves figure={fig} gamma={gamma!r} m={m!r}")
    if general:
        out.write(f" delta={a.delta!r}")
    out.write("\n# scaled units; empty cells mark domain errors (s -> 0 pole or separatrix)\n")
    absc = "s_minus" if general else "s"
    if fig in ("t2", "ttot"):
        cols = [fig]
    else:
        cols = [f"n={_fmt_n(n)}" for n in ns]
    out.write(",".join([absc, *cols]) + "\n")

    def row_values(s: float) -> list:
        if fig == "t2":
            return [_safe(lambda: t2_hat(s, gamma))]
        if fig == "ttot":
            return [_safe(lambda: stage_times(s, gamma, m, 1.0).That_tot)]
        if fig == "t1":
            return [_safe(lambda n=n: stage_times(s, gamma, m, n).That1) for n in ns]
        band = TiltBand.from_s_minus(s, nu)
        key = "That1" if fig == "general-t1" else "That_tot"
        return [_safe(lambda n=n: getattr(stage_times_general(band, gamma, m, n), key)) for n in ns]

    for s in grid:
        out.write(",".join([repr(float(s)), *(_fmt(v) for v in row_values(float(s)))]) + "\n")

    if fig in ("t1", "general-t1", "general-ttot"):
        out.write("\n# minimal tilt per n (stage-1 time zero)\n")
        out.write(f"n,{absc},value\n")
        for n in ns:
            if general:
                s_star = _safe(lambda n=n: min_tilt_general(m, n, gamma, a.delta))
                val = None
                if s_star is not None:
                    st = stage_times_general(TiltBand.from_s_minus(s_star, nu), gamma, m, n)
                    val = st.That1 if fig == "general-t1" else st.That_tot
            else:
                s_star = _safe(lambda n=n: min_tilt(m, n, gamma))
                val = None if s_star is None else 0.0
            out.write(f"{_fmt_n(n)},{_fmt(s_star)},{_fmt(val)}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rotordive", description="Plan and verify rotor-driven twisting somersaults.")
    p.add_argument("--version", action="version", version=f"rotordive {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    pp = sub.add_parser("plan", help="compute a dive plan (JSON on stdout)")
    pp.add_argument("--m", type=float, required=True, help="somersaults (multiple of 1/2)")
    pp.add_argument("--n", type=float, required=True, help="twists (multiple of 1/2, >= 1/2)")
    pp.add_argument("--ttot", type=float, required=True, help="total airborne time, s")
    pp.add_argument("--I1", type=float, required=True)
    pp.add_argument("--I2", type=float, required=True)
    pp.add_argument("--I3", type=float, required=True)
    pp.add_argument("--l", type=float, required=True, help="angular momentum, kg m^2/s")
    pp.add_argument("--omega-d", type=float, default=None, help="rotor speed; report the needed I_d")
    pp.add_argument("--I-d", type=float, default=None, help="rotor inertia; report the needed omega_d")
    pp.add_argument("--general", action="store_true", help="force the tri-axial planner")
    pp.add_argument(
        "--strict-ballpark", action="store_true", help="exit 2 when a human ballpark is exceeded"
    )
    pp.add_argument("--output", "-o", default=None, help="also write the JSON to this file")
    pp.set_defaults(func=cmd_plan)

    ps = sub.add_parser("simulate", help="replay a plan and check closure")
    ps.add_argument("--plan", required=True, help="plan document (JSON)")
    ps.add_argument("--tol", type=float, default=1e-10, help="integrator relative tolerance")
    ps.add_argument("--closure-tol", type=float, default=1e-3, help="allowed closure error, rad")
    ps.add_argument("--export", default=None, help="write the trajectory CSV here")
    ps.set_defaults(func=cmd_simulate)

    pc = sub.add_parser("curves", help="emit figure curves as CSV")
    pc.add_argument("--figure", choices=FIGURES, required=True)
    pc.add_argument("--gamma", type=float, default=19.0)
    pc.add_argument("--m", type=float, default=1.5)
    pc.add_argument("--n-list", default="1,2,3,4,5")
    pc.add_argument("--delta", type=float, default=None)
    pc.add_argument("--s-range", default=None, help="'lo,hi' for the abscissa")
    pc.add_argument("--samples", type=int, default=50)
    pc.set_defaults(func=cmd_curves)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"rotordive: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
