import math

import pytest

from intphase.core import LabEnvironment, TrapSpec, ValidationError, ViolationModel, WavePacketSpec
from intphase.geometry import (DslEvent, build_ai_guided, build_ai_levitated, build_ai_mach_zehnder,
                               build_ai_symmetric_transitions, build_clock_free_fall, build_clock_guided,
                               build_clock_static, build_custom, solve_branches)
from intphase.phase import (PhaseBreakdown, UnsupportedConfiguration, differential_virial, member_phases,
                            perturbation_density, proper_time, proper_time_shift, wavepacket_phase_clock,
                            wavepacket_phase_interferometer)
from intphase.trajectory import pair_kinematics
from intphase.analysis import differential_phase

from conftest import K_MZ

G0 = 9.81


def test_breakdown_arithmetic_keeps_components():
    a = PhaseBreakdown(phi0=3.8e8, rest_energy=-2.7e15, dynamical=0.1)
    b = PhaseBreakdown(phi0=3.8e8, rest_energy=-2.7e15, dynamical=0.3)
    d = a - b
    assert d.phi0 == 0.0 and d.rest_energy == 0.0
    assert d.total == pytest.approx(-0.2)
    assert (a + b).dynamical == pytest.approx(0.4)


def test_density_at_rest_in_static_trap(sr):
    s = build_clock_static(1.0, 1.0)
    up, _ = solve_branches(s)
    z = 1.0 - G0 / s.trap.gamma ** 2
    c = sr.constants.c
    h = perturbation_density(1, 0.0, sr, G0, up, 0.5)
    assert h == pytest.approx(sr.dm / 2 * (c * c + G0 * z), rel=1e-15)
    h_a = perturbation_density(-1, 1e-9, sr, G0, up, 0.5)
    assert h_a == pytest.approx(-sr.dm / 2 * (c * c + G0 * z) + sr.m * 1e-9 * G0 * z, rel=1e-15)


def test_density_trap_term_needs_trap(sr):
    up, _ = solve_branches(build_ai_mach_zehnder(K_MZ, 0.1))
    with pytest.raises(ValidationError):
        perturbation_density(1, 0.0, sr, G0, up, 0.0, with_trap_term=True)


def test_rest_energy_term_is_exact(sr):
    T = 0.7
    s = build_clock_static(1.0, T)
    mem = member_phases(s, solve_branches(s))
    for v in mem.values():
        assert v.rest_energy == -sr.clock_frequency * T


@pytest.mark.parametrize("spec", [
    build_ai_mach_zehnder(K_MZ, 0.1, violation=ViolationModel(1e-10, 3e-10)),
    build_ai_mach_zehnder(K_MZ, 0.1, velocity_transfer=True),
    build_ai_levitated(K_MZ, 4.5e-3, 30),
    build_ai_symmetric_transitions(K_MZ, 0.5, 2.0),
    build_ai_guided(0.005, 1.0, 2.0, gamma=2 * math.pi * 20.5),
    build_clock_static(1.0, 1.0, delta_gamma2=40.0),
    build_clock_guided(0.005, 1.0, 2.0),
    build_clock_free_fall(1.0, 0.5),
], ids=lambda s: s.name)
def test_partial_integration_identity(spec):
    arms = solve_branches(spec)
    direct = member_phases(spec, arms)
    virial = differential_virial(spec, pair_kinematics(*arms))
    if spec.mode == "clock":
        d = direct["upper"] - direct["lower"]
        pairs = [(d, virial["differential"])]
    else:
        pairs = [(direct[k], virial[k]) for k in virial]
    for dr, vr in pairs:
        lhs = dr.rest_energy + dr.dynamical
        rhs = vr.dynamical + vr.boundary
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-13)


@pytest.mark.parametrize("dg", [-5.0, 5.0, 10.0])
def test_mach_zehnder_g_invariant_without_uff_violation(dg):
    vi = ViolationModel(2e-10, 2e-10)
    base = differential_phase(build_ai_mach_zehnder(K_MZ, 0.1, violation=vi))
    other = differential_phase(build_ai_mach_zehnder(K_MZ, 0.1, violation=vi,
                                                     environment=LabEnvironment(G0 + dg)))
    s = build_ai_mach_zehnder(K_MZ, 0.1, violation=vi)
    scale = abs(member_phases(s, solve_branches(s))["b"].perturbation)
    assert scale > 1e-4
    assert abs(other - base) <= 1e-12 * scale


def test_phase_linear_in_alpha(sr):
    vals = [differential_phase(build_clock_static(1.0, 1.0, violation=ViolationModel.from_alpha(a, sr)))
            for a in (-1e-3, 0.0, 1e-3)]
    second = vals[0] - 2 * vals[1] + vals[2]
    assert abs(second) <= 1e-12 * abs(vals[1])
    assert vals[2] - vals[1] == pytest.approx(1e-3 * vals[1], rel=1e-6)


def test_proper_time_difference_static(sr):
    s = build_clock_static(1.0, 1.0)
    up, lo = solve_branches(s)
    c = sr.constants.c
    dtau = proper_time(up, G0, c) - proper_time(lo, G0, c)
    assert dtau == pytest.approx(G0 * 1.0 * 1.0 / c ** 2, rel=1e-9)
    assert proper_time_shift(lo, G0, c) == pytest.approx(G0 * (-G0 / s.trap.gamma ** 2) / c ** 2, rel=1e-9)


def test_released_wavepacket_phase(sr):
    wp = WavePacketSpec.ground_state(sr.m, 2 * math.pi * 100)
    s = build_clock_free_fall(1.0, 1.0, wavepacket=wp)
    res = wavepacket_phase_clock(s)
    expected = sr.ratio * wp.var_p0 / (2 * sr.constants.hbar * sr.m) * 1.0
    assert res.valid and res.value == pytest.approx(expected, rel=1e-15)


def test_trapped_wavepacket_phase_ground_state(sr):
    G = 2 * math.pi * 100
    wp = WavePacketSpec.ground_state(sr.m, G)
    T = 1.0
    res = wavepacket_phase_clock(build_clock_static(1.0, T, gamma=G, wavepacket=wp))
    # ground state without trap splitting: (dm/m) <p^2>/(2 m hbar) T
    assert res.value == pytest.approx(sr.ratio * G * T / 4, rel=1e-12)


def test_trapped_wavepacket_validity_flag(sr):
    G = 2 * math.pi * 100
    wp = WavePacketSpec.ground_state(sr.m, G)
    res = wavepacket_phase_clock(build_clock_static(1.0, 1.0, gamma=G, delta_gamma2=G, wavepacket=wp))
    assert not res.valid and "unreliable" in res.message


def test_wavepacket_requires_spec():
    with pytest.raises(ValidationError):
        wavepacket_phase_clock(build_clock_static(1.0, 1.0))


def test_wavepacket_unknown_trap_program(sr):
    wp = WavePacketSpec.ground_state(sr.m, 100.0)
    with pytest.raises(UnsupportedConfiguration):
        wavepacket_phase_clock(build_clock_static(1.0, 1.0, wavepacket=wp), mode="ramped")


def test_interferometer_wavepacket_phase():
    assert wavepacket_phase_interferometer(build_ai_mach_zehnder(K_MZ, 0.1)) == 0.0
    open_spec = build_custom("open", "interferometer", 0.2, [DslEvent(0.0, "upper", "kick", K_MZ)])
    with pytest.raises(UnsupportedConfiguration):
        wavepacket_phase_interferometer(open_spec)
    with pytest.raises(UnsupportedConfiguration):
        wavepacket_phase_interferometer(build_ai_guided(0.005, 1.0, 1.0))


def _switched_clock(sr, t_off, dg2=0.0, G=2 * math.pi * 100):
    wp = WavePacketSpec.ground_state(sr.m, G)
    return build_custom("switched", "clock", 1.0, [DslEvent(t_off, "both", "trap_off")],
                        trap=TrapSpec(G, dg2), z0=(None, None), trap_initially_on=True, wavepacket=wp)


def test_trap_program_modes(sr):
    from intphase.geometry import trap_program
    s = _switched_clock(sr, 0.4)
    assert s.wp_mode == "piecewise"
    assert trap_program(s.upper) == [(0.0, 0.4, True), (0.4, 1.0, False)]
    assert _switched_clock(sr, 0.0).wp_mode == "released"
    assert _switched_clock(sr, 1.0).wp_mode == "trapped"


def test_piecewise_wavepacket_needs_opt_in(sr):
    with pytest.raises(UnsupportedConfiguration, match="experimental"):
        wavepacket_phase_clock(_switched_clock(sr, 0.4))


@pytest.mark.parametrize("dg2", [0.0, 30.0])
def test_piecewise_wavepacket_composition(sr, dg2):
    G = 2 * math.pi * 100
    res = wavepacket_phase_clock(_switched_clock(sr, 0.4, dg2, G), experimental=True)
    # the ground state is stationary while trapped and keeps <p^2> after release
    expected = sr.ratio * G * 1.0 / 4 - dg2 / G ** 2 * G * 0.4 / 4
    assert res.value == pytest.approx(expected, rel=1e-12)
    assert "experimental" in res.message


@pytest.mark.parametrize("T", [0.013, 0.5, 1.0])
def test_piecewise_matches_closed_forms(sr, T):
    G = 2 * math.pi * 37
    wp = WavePacketSpec(3e-14, sr.constants.hbar ** 2 / (4 * 3e-14) * 5)
    trapped = build_clock_static(1.0, T, gamma=G, delta_gamma2=15.0, wavepacket=wp)
    released = build_clock_free_fall(1.0, T, gamma0=G, wavepacket=wp)
    for s in (trapped, released):
        closed = wavepacket_phase_clock(s).value
        composed = wavepacket_phase_clock(s, mode="piecewise", experimental=True).value
        assert composed == pytest.approx(closed, rel=1e-12)
