import math

import pytest

from rotordive.dynamics import AngleState, DimensionlessParams, energy
from rotordive.gen_planner import TiltBand, twist_period_and_somersault
from rotordive.phase import (
    OpenLoopError,
    dynamic_phase,
    pure_somersault,
    reverse,
    rotor_off_period_loop,
    solid_angle,
    switched_loop,
    total_delta_phi,
    verify_phase_decomposition,
)
from rotordive.simulator import DURATION, ROTOR_OFF, ROTOR_ON, StageSpec, initial_state, integrate_stage
from rotordive.sym_planner import twist_period

from conftest import GAMMA

SYM = DimensionlessParams(0.0, GAMMA)


@pytest.mark.parametrize("theta", [0.05, 0.14, 0.3])
def test_twist_circle(theta):
    loop = rotor_off_period_loop(SYM, theta)
    r = verify_phase_decomposition(loop)
    assert r.geometric_phase == pytest.approx(2 * math.pi * math.sin(theta), abs=1e-9)
    E = energy(AngleState(0.0, theta, math.pi / 2), SYM)
    assert r.dynamic_phase == pytest.approx(2 * E * loop.duration, abs=1e-9)
    assert r.total_delta_phi == pytest.approx(twist_period(math.sin(theta), GAMMA), abs=1e-9)
    assert abs(r.residual) <= 1e-9


def test_near_pole_solid_angle_approaches_hemisphere():
    S = solid_angle(rotor_off_period_loop(SYM, 1.5))
    assert S == pytest.approx(2 * math.pi * math.sin(1.5), abs=1e-9)
    assert 2 * math.pi - S < 0.03


def test_equator_loop_has_no_solid_angle():
    loop = pure_somersault(SYM, 2 * math.pi)
    r = verify_phase_decomposition(loop)
    assert r.geometric_phase == 0.0
    assert r.dynamic_phase == pytest.approx(2 * math.pi, abs=1e-9)
    assert abs(r.residual) <= 1e-9


def test_general_rotor_off_matches_planner():
    d = DimensionlessParams(-0.4, GAMMA)
    band = TiltBand.from_s_minus(0.1, d.nu)
    loop = rotor_off_period_loop(d, math.asin(band.s_plus))
    r = verify_phase_decomposition(loop)
    P3, Phi3 = twist_period_and_somersault(band, GAMMA)
    assert r.total_delta_phi == pytest.approx(Phi3, abs=1e-8)
    assert abs(r.residual) <= 1e-9


@pytest.mark.parametrize("n", [1, 1.5, 2])
def test_switched_loop(n):
    d = DimensionlessParams(-0.4, GAMMA, 1.0)
    loop = switched_loop(d, n)
    r = verify_phase_decomposition(loop, d, allow_equator=True)
    assert abs(r.residual) <= 1e-9


def test_rotor_on_dynamic_phase_is_not_twice_energy_time():
    d = DimensionlessParams(0.0, GAMMA, 0.5)
    seg = integrate_stage(initial_state(), StageSpec(ROTOR_ON, 0.5, DURATION, 0.7), d)
    E = energy(AngleState(0.0, 0.0, 0.0), d)
    assert abs(dynamic_phase(seg) - 2 * E * 0.7) > 1e-3


def test_reversal_negates():
    loop = rotor_off_period_loop(SYM, 0.3)
    a = verify_phase_decomposition(loop)
    b = verify_phase_decomposition(reverse(loop))
    assert b.geometric_phase == pytest.approx(-a.geometric_phase, abs=1e-15)
    assert b.dynamic_phase == pytest.approx(-a.dynamic_phase, abs=1e-15)
    assert b.total_delta_phi == -a.total_delta_phi
    assert b.residual == pytest.approx(-a.residual, abs=1e-15)
    assert reverse(reverse(loop)).reversed is False


def test_open_loop_is_rejected():
    d = SYM
    seg = integrate_stage(initial_state(0.3, math.pi / 2), StageSpec(ROTOR_OFF, 0.0, DURATION, 0.1), d)
    with pytest.raises(OpenLoopError):
        verify_phase_decomposition(seg)
    with pytest.raises(OpenLoopError):
        solid_angle(seg)


def test_no_reduction_mod_two_pi():
    # three twist periods give three times the solid angle, not a wrapped value
    theta = 1.2
    d = SYM
    P3 = twist_period(math.sin(theta), GAMMA)
    seg = integrate_stage(initial_state(theta, math.pi / 2), StageSpec(ROTOR_OFF, 0.0, DURATION, 3 * P3), d)
    r = verify_phase_decomposition(seg)
    assert r.geometric_phase == pytest.approx(3 * 2 * math.pi * math.sin(theta), abs=1e-8)
    assert total_delta_phi(seg) == pytest.approx(3 * P3, abs=1e-8)
    assert r.geometric_phase > 4 * math.pi


def test_parameter_mismatch():
    loop = rotor_off_period_loop(SYM, 0.2)
    with pytest.raises(ValueError):
        dynamic_phase(loop, DimensionlessParams(-0.1, GAMMA))


def test_switched_loop_requires_half_integer():
    with pytest.raises(ValueError):
        switched_loop(DimensionlessParams(0.0, GAMMA, 0.3), 1.2)


def test_half_and_three_halves_somersaults_differ():
    # both end at L = (-1, 0, 0); the decomposition keeps the winding
    a = verify_phase_decomposition(pure_somersault(SYM, math.pi), allow_equator=True)
    b = verify_phase_decomposition(pure_somersault(SYM, 3 * math.pi), allow_equator=True)
    assert a.total_delta_phi == pytest.approx(math.pi, abs=1e-12)
    assert b.total_delta_phi == pytest.approx(3 * math.pi, abs=1e-12)
    assert b.dynamic_phase - a.dynamic_phase == pytest.approx(2 * math.pi, abs=1e-9)
