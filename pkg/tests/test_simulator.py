import csv
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from rotordive.dynamics import STT, AngleState, DimensionlessParams, eom_angles
from rotordive.plan import DivePlan, DiveRequest
from rotordive.simulator import (
    CSV_COLUMNS,
    DURATION,
    PSI_CROSSING,
    PSI_TARGET,
    ROTOR_OFF,
    ROTOR_ON,
    THETA_TURN,
    IntegrationError,
    StageSpec,
    Tolerances,
    initial_state,
    integrate_stage,
    plan_stage_specs,
    relocalize_event,
    rhs,
    run_stages,
    simulate_plan,
    transit,
    transit_oracle,
)
from rotordive.sym_planner import beta_from_tilt, phi2, plan_dive, t2_hat, twist_period

from conftest import GAMMA, symmetric_body


def sym_rotor(s):
    return DimensionlessParams(0.0, GAMMA, GAMMA * beta_from_tilt(s))


def test_stage_spec_validation():
    with pytest.raises(ValueError):
        StageSpec(ROTOR_OFF, 0.3, DURATION, 1.0)
    with pytest.raises(ValueError):
        StageSpec(ROTOR_ON, 0.3, DURATION)
    with pytest.raises(ValueError):
        StageSpec(ROTOR_ON, 0.3, PSI_TARGET)
    with pytest.raises(ValueError):
        StageSpec(ROTOR_ON, 0.3, "forever")
    with pytest.raises(ValueError):
        StageSpec("spinning")


def test_rhs_matches_angle_chart():
    d = DimensionlessParams(-0.3, GAMMA, 0.4)
    a = AngleState(0.0, 0.3, 1.1, STT)
    y = initial_state(0.3, 1.1)
    r = rhs(y, d.delta, d.gamma, d.rho)
    e = eom_angles(a, d)
    assert r[3] == pytest.approx(e[0], rel=1e-13)
    assert r[4] == pytest.approx(e[2], rel=1e-13)


def test_pure_somersault_stage():
    d = DimensionlessParams(0.0, GAMMA)
    seg = integrate_stage(initial_state(), StageSpec(ROTOR_OFF, 0.0, DURATION, 3.7, index=1), d)
    assert seg.y1[3] == pytest.approx(3.7, abs=1e-12)
    assert np.max(np.abs(seg.ys[1:3])) == 0.0
    assert seg.y1[4] == 0.0


@pytest.mark.parametrize("s", [0.05, 0.14, 0.3])
def test_tilting_stage_reaches_turning_point(s):
    d = sym_rotor(s)
    r = transit(d)
    assert r.That2 == pytest.approx(t2_hat(s, GAMMA), abs=1e-8)
    assert r.sin_tilt == pytest.approx(s, abs=1e-8)
    # turning point relation sin^2 theta - 2 beta cos theta = 0
    c = math.sqrt(1 - r.sin_tilt**2)
    assert r.sin_tilt**2 - 2 * d.beta * c == pytest.approx(0.0, abs=1e-8)
    assert abs(r.end[0]) <= 1e-10
    assert r.end[4] == pytest.approx(math.pi / 2, abs=1e-9)


def test_transit_needs_rotor():
    with pytest.raises(ValueError):
        transit(DimensionlessParams(0.0, GAMMA))


def test_twist_stage_one_period():
    s = 0.14
    d = DimensionlessParams(0.0, GAMMA)
    P3 = twist_period(s, GAMMA)
    start = initial_state(math.asin(s), math.pi / 2)
    seg = integrate_stage(start, StageSpec(ROTOR_OFF, 0.0, DURATION, P3, index=3), d)
    assert seg.y1[4] - seg.y0[4] == pytest.approx(2 * math.pi, abs=1e-8)
    assert seg.y1[3] - seg.y0[3] == pytest.approx(P3, abs=1e-8)


def test_psi_target_stop():
    d = DimensionlessParams(0.0, GAMMA)
    start = initial_state(math.asin(0.2), 0.0)
    seg = integrate_stage(start, StageSpec(ROTOR_OFF, 0.0, PSI_TARGET, psi_target=2 * math.pi), d)
    assert seg.duration == pytest.approx(twist_period(0.2, GAMMA), abs=1e-9)
    # already at the target: zero-length stage
    seg0 = integrate_stage(seg.y1, StageSpec(ROTOR_OFF, 0.0, PSI_TARGET, psi_target=float(seg.y1[4])), d)
    assert seg0.duration == 0.0
    assert np.array_equal(seg0(seg0.tau0), seg.y1)


def test_theta_turn_stop():
    d = sym_rotor(0.2)
    seg = integrate_stage(initial_state(), StageSpec(ROTOR_ON, -d.rho, THETA_TURN), d)
    assert seg.duration == pytest.approx(t2_hat(0.2, GAMMA), abs=1e-8)


def test_event_not_reached():
    d = DimensionlessParams(0.0, GAMMA)
    with pytest.raises(IntegrationError):
        integrate_stage(initial_state(), StageSpec(ROTOR_OFF, 0.0, PSI_CROSSING), d, Tolerances(max_tau=5.0))


def test_event_idempotence():
    r = transit(sym_rotor(0.14))
    assert abs(relocalize_event(r.segment)) <= 1e-12


def test_time_reversal():
    d = sym_rotor(0.14)
    r = transit(d)
    back = integrate_stage(r.end, StageSpec(ROTOR_ON, -d.rho, DURATION, -r.That2), d, tau0=r.That2)
    assert back.y1 == pytest.approx(initial_state(), abs=1e-8)


def test_chart_independence():
    d = DimensionlessParams(-0.2, GAMMA, 0.3)
    T = 0.6
    seg = integrate_stage(initial_state(0.1, 0.2), StageSpec(ROTOR_ON, 0.3, DURATION, T), d)

    def f(t, y):
        return eom_angles(AngleState(y[0], y[1], y[2]), d)

    sol = solve_ivp(f, (0, T), [0.0, 0.1, 0.2], method="DOP853", rtol=1e-12, atol=1e-13)
    assert seg.y1[3] == pytest.approx(sol.y[0, -1], abs=1e-8)
    assert seg.y1[4] == pytest.approx(sol.y[2, -1], abs=1e-8)
    assert math.asin(seg.y1[2]) == pytest.approx(sol.y[1, -1], abs=1e-8)


def test_transit_oracle_matches_quadrature():
    T2, p2 = transit_oracle(DimensionlessParams(0.0, GAMMA, GAMMA * 0.009898))
    from rotordive.sym_planner import tilt_from_beta

    s = tilt_from_beta(0.009898)
    assert T2 == pytest.approx(0.98, abs=0.01)
    assert T2 == pytest.approx(t2_hat(s, GAMMA, method="quad"), abs=1e-8)
    assert p2 == pytest.approx(phi2(s, GAMMA), abs=1e-8)


@pytest.fixture(scope="module")
def report():
    plan = plan_dive(DiveRequest(1.5, 1, 1.5, symmetric_body(128.0)))
    return plan, simulate_plan(plan)


def test_simulate_plan_closes(report):
    plan, r = report
    assert r.ok(1e-4)
    assert abs(r.phi_error) <= 1e-4 and abs(r.psi_error) <= 1e-4
    assert abs(r.theta_final) <= 1e-6
    assert max(r.energy_drift) <= 1e-9
    assert max(r.norm_drift) <= 1e-9
    assert r.to_dict()["m"] == 1.5


def test_stage_signs():
    plan = plan_dive(DiveRequest(1.5, 1, 1.5, symmetric_body(128.0)))
    specs = plan_stage_specs(plan)
    assert specs[1].rho_signed < 0 < specs[3].rho_signed
    plan.n = 1.5
    specs = plan_stage_specs(plan)
    assert specs[1].rho_signed == specs[3].rho_signed


def test_half_integer_twist_ends_reversed():
    plan = plan_dive(DiveRequest(1.5, 1.5, 1.5, symmetric_body(128.0)))
    r = simulate_plan(plan)
    assert r.ok(1e-4)
    assert r.trajectory.end[0] == pytest.approx(-1.0, abs=1e-8)


def test_zero_twist_degenerate_plan():
    plan = DivePlan("symmetric", 1.5, 0.5, 1.0, GAMMA, 0.0, 1.0, 3 * math.pi, feasible=True)
    plan.rho = 0.0
    plan.That1, plan.That2, plan.That3 = 1.5 * math.pi, 0.0, 0.0
    r = simulate_plan(plan)
    assert r.delta_phi == pytest.approx(3 * math.pi, abs=1e-12)
    assert r.delta_psi == 0.0


def test_simulate_rejects_infeasible():
    plan = plan_dive(DiveRequest(1.5, 5, 1.5, symmetric_body(128.0)))
    with pytest.raises(ValueError):
        simulate_plan(plan)


def test_csv_export(report, tmp_path):
    _, r = report
    path = tmp_path / "traj.csv"
    r.trajectory.to_csv(path, l=128.0)
    rows = list(csv.reader(open(path)))
    assert tuple(rows[0]) == CSV_COLUMNS
    tau = np.array([float(x[0]) for x in rows[1:]])
    assert np.all(np.diff(tau) > 0)
    assert float(rows[1][4]) == pytest.approx(128.0)
    assert sorted({int(x[8]) for x in rows[1:]}) == [1, 2, 3, 4, 5]


def test_samples_are_strictly_increasing(report):
    _, r = report
    s = r.trajectory.samples(20)
    assert np.all(np.diff(s["tau"]) > 0)
    assert s["tau"][-1] == pytest.approx(r.trajectory.tau_end)


def test_run_stages_continues_time():
    d = DimensionlessParams(0.0, GAMMA)
    traj = run_stages(
        initial_state(),
        [StageSpec(ROTOR_OFF, 0.0, DURATION, 1.0, index=1), StageSpec(ROTOR_OFF, 0.0, DURATION, 2.0, index=2)],
        d,
    )
    assert traj.segments[1].tau0 == traj.segments[0].tau1 == 1.0
    assert traj.tau_end == pytest.approx(3.0)
