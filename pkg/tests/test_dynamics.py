import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rotordive.dynamics import (
    STT,
    TILDE,
    AngleState,
    BodyParams,
    ChartSingularityError,
    DimensionlessParams,
    MomentumState,
    angles_from_momentum,
    derive_dimensionless,
    energy,
    eom_angles,
    eom_momentum,
    eom_tilde_angles,
    in_band,
    scaled_angular_velocity,
    scaled_momentum_rhs,
    sin_psi_from_energy,
    unit_momentum,
)

angles = st.floats(min_value=-1.4, max_value=1.4)
twists = st.floats(min_value=-7.0, max_value=7.0)
deltas = st.floats(min_value=-0.5, max_value=0.0)
rhos = st.floats(min_value=-1.0, max_value=1.0)


def test_derive_dimensionless_reference_body():
    d = derive_dimensionless(BodyParams(20.0, 21.0, 1.0, 100.0, omega_d=2.0, I_d=5.0))
    assert d.delta == pytest.approx(20 / 21 - 1)
    assert d.gamma == pytest.approx(19.0)
    assert d.rho == pytest.approx(0.1)
    assert d.rho_hat == pytest.approx(0.1 * 20 / 21)
    assert d.beta == pytest.approx(0.1 / 19)
    assert d.nu == pytest.approx((20 / 21 - 1) / 19)
    assert d.time_scale == pytest.approx(0.2)
    assert d.to_scaled_time(d.to_physical_time(3.0)) == pytest.approx(3.0)


def test_symmetric_and_rotor_flags():
    d = DimensionlessParams(0.0, 19.0)
    assert d.symmetric and not d.rotor_on
    assert d.with_rho(0.2).rotor_on


@pytest.mark.parametrize("kw", [dict(I1=0.0), dict(I3=-1.0), dict(l=0.0)])
def test_body_validation(kw):
    base = dict(I1=20.0, I2=20.0, I3=1.0, l=100.0)
    base.update(kw)
    with pytest.raises(ValueError):
        BodyParams(**base)


def test_planner_regime():
    assert BodyParams(20, 21, 1, 1).in_planner_regime()
    assert BodyParams(20, 20, 1, 1).in_planner_regime()
    assert not BodyParams(20, 19, 1, 1).in_planner_regime()


def test_unknown_convention():
    with pytest.raises(ValueError):
        AngleState(0, 0, 0, "xyz")


@settings(max_examples=50, deadline=None)
@given(angles, twists)
def test_chart_round_trip(theta, psi):
    for conv in (STT, TILDE):
        L = unit_momentum(AngleState(0.0, theta, psi, conv))
        assert np.linalg.norm(L) == pytest.approx(1.0)
        back = angles_from_momentum(L, conv)
        assert back.theta == pytest.approx(theta, abs=1e-12)
        assert math.remainder(back.psi - psi, 2 * math.pi) == pytest.approx(0.0, abs=1e-12)


def test_reference_states():
    assert unit_momentum(AngleState(0, 0, 0)) == pytest.approx([1, 0, 0])
    assert unit_momentum(AngleState(0, 0, math.pi / 2)) == pytest.approx([0, -1, 0], abs=1e-16)
    assert unit_momentum(AngleState(0, 0, math.pi / 2, TILDE)) == pytest.approx([0, 0, 1], abs=1e-16)


@settings(max_examples=50, deadline=None)
@given(angles, twists, deltas, rhos)
def test_angle_eom_matches_momentum_sphere(theta, psi, delta, rho):
    # d/dtau of L(theta, psi) via the chain rule equals L x Omega
    d = DimensionlessParams(delta, 19.0, rho)
    for conv, eom in ((STT, eom_angles), (TILDE, eom_tilde_angles)):
        s = AngleState(0.0, theta, psi, conv)
        rates = eom(s, d)
        h = 1e-6
        dLdth = (unit_momentum(AngleState(0, theta + h, psi, conv)) - unit_momentum(AngleState(0, theta - h, psi, conv))) / (2 * h)
        dLdps = (unit_momentum(AngleState(0, theta, psi + h, conv)) - unit_momentum(AngleState(0, theta, psi - h, conv))) / (2 * h)
        lhs = dLdth * rates[1] + dLdps * rates[2]
        rhs = scaled_momentum_rhs(unit_momentum(s), d)
        assert lhs == pytest.approx(rhs, abs=1e-7)


@settings(max_examples=50, deadline=None)
@given(angles, twists, deltas, rhos)
def test_energy_is_conserved_by_the_flow(theta, psi, delta, rho):
    d = DimensionlessParams(delta, 19.0, rho)
    L = unit_momentum(AngleState(0, theta, psi))
    grad = scaled_angular_velocity(L, d)  # dE/dL
    assert float(np.dot(grad, scaled_momentum_rhs(L, d))) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(angles, twists, deltas, rhos)
def test_energy_agrees_across_charts(theta, psi, delta, rho):
    d = DimensionlessParams(delta, 19.0, rho)
    a = AngleState(0, theta, psi)
    L = unit_momentum(a)
    e_mom = energy(MomentumState(L * 7.0), d)
    assert energy(a, d) == pytest.approx(e_mom, abs=1e-12)
    t = angles_from_momentum(L, TILDE)
    assert energy(t, d) == pytest.approx(e_mom, abs=1e-12)


def test_somersault_is_unit_rate():
    d = DimensionlessParams(0.0, 19.0)
    assert eom_angles(AngleState(0, 0, 0), d) == pytest.approx([1, 0, 0])
    assert energy(AngleState(0, 0, 0), d) == pytest.approx(0.5)


def test_physical_equations_scale():
    p = BodyParams(20.0, 21.0, 1.0, 50.0, omega_d=3.0, I_d=2.0)
    d = derive_dimensionless(p)
    u = unit_momentum(AngleState(0, 0.2, 0.7))
    phys = eom_momentum(MomentumState.with_rotor(u * p.l, p.h), p)
    # dL/dt = l * (l / I1) * dLhat/dtau
    assert phys == pytest.approx(p.l * scaled_momentum_rhs(u, d) / d.time_scale, rel=1e-12)


def test_chart_singularity():
    d = DimensionlessParams(0.0, 19.0)
    with pytest.raises(ChartSingularityError):
        eom_angles(AngleState(0, math.pi / 2, 0), d)
    with pytest.raises(ChartSingularityError):
        eom_tilde_angles(AngleState(0, -math.pi / 2, 0, TILDE), d)


def test_sin_psi_from_energy_recovers_state():
    d = DimensionlessParams(0.0, 19.0, 0.2)
    a = AngleState(0, 0.1, 0.4)
    E = energy(a, d)
    sp = sin_psi_from_energy(0.1, E, d)
    assert sp == pytest.approx(math.sin(0.4), abs=1e-12)
    assert in_band(sp)
    assert not in_band(sin_psi_from_energy(1.2, E, d))


def test_sin_psi_from_energy_requires_symmetric_rotor_on():
    with pytest.raises(ValueError):
        sin_psi_from_energy(0.1, 0.5, DimensionlessParams(-0.1, 19.0, 0.2))
    with pytest.raises(ValueError):
        sin_psi_from_energy(0.1, 0.5, DimensionlessParams(0.0, 19.0))


@pytest.mark.parametrize("delta", [-0.1, -0.4, 0.0])
def test_linearization_about_somersault(delta):
    # the (theta, psi) linearization at theta = psi = 0, rho = 0 has eigenvalues +-sqrt(-delta gamma)
    d = DimensionlessParams(delta, 19.0)
    h = 1e-6

    def f(x):
        r = eom_angles(AngleState(0.0, x[0], x[1]), d)
        return np.array([r[1], r[2]])

    J = np.column_stack([(f(np.eye(2)[i] * h) - f(-np.eye(2)[i] * h)) / (2 * h) for i in range(2)])
    ev = np.sort(np.linalg.eigvals(J).astype(complex))
    lam = np.sqrt(complex(-delta * 19.0))
    expected = np.sort(np.array([-lam, lam]))
    assert np.max(np.abs(ev - expected)) <= 1e-6


def test_convention_consistency_random_states():
    # angle rates pushed through the analytic Jacobian of the chart equal the physical dL/dt
    rng = np.random.default_rng(7)
    for _ in range(100):
        I1 = rng.uniform(5, 30)
        p = BodyParams(I1, I1 / (1 + rng.uniform(-0.5, 0.0)), rng.uniform(0.5, 4), rng.uniform(20, 200),
                       omega_d=rng.uniform(0, 50), I_d=rng.uniform(0, 1))
        d = derive_dimensionless(p)
        th, ps = rng.uniform(-1.4, 1.4), rng.uniform(-7, 7)
        ct, st, cp, sp = math.cos(th), math.sin(th), math.cos(ps), math.sin(ps)
        dL_dth = np.array([-st * cp, st * sp, ct])
        dL_dps = np.array([-ct * sp, -ct * cp, 0.0])
        rates = eom_angles(AngleState(0.0, th, ps), d)
        u = unit_momentum(AngleState(0.0, th, ps))
        phys = eom_momentum(MomentumState.with_rotor(u * p.l, p.h), p)
        # dL/dt = l * dLhat/dtau / time_scale
        lhs = p.l * (dL_dth * rates[1] + dL_dps * rates[2]) / d.time_scale
        assert np.max(np.abs(lhs - phys)) <= 1e-10 * max(1.0, np.max(np.abs(phys)))
