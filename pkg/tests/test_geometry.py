import numpy as np
import pytest
from scipy.integrate import trapezoid

from intphase.core import LabEnvironment, ValidationError
from intphase.geometry import (BUILDERS, DslEvent, StateProgram, build_ai_doubly_differential,
                               build_ai_guided, build_ai_levitated, build_ai_mach_zehnder,
                               build_ai_symmetric_transitions, build_clock_free_fall, build_clock_guided,
                               build_clock_static, build_custom, closure_check, solve_branches,
                               spec_kinematics)
from intphase.phase import separation_integral

from conftest import K_MZ


def test_registry_has_all_builders():
    assert set(BUILDERS) == {"clock_static", "clock_free_fall", "clock_guided", "ai_mach_zehnder",
                             "ai_levitated", "ai_guided", "ai_doubly_differential",
                             "ai_symmetric_transitions"}


def test_state_program():
    p = StateProgram(-1, ((1.0, 1), (2.0, -1)))
    assert [p.at(t) for t in (0.5, 1.0, 1.5, 2.0)] == [-1, 1, 1, -1]
    assert p.intervals(0.0, 3.0) == [(0.0, 1.0, -1), (1.0, 2.0, 1), (2.0, 3.0, -1)]
    with pytest.raises(ValidationError):
        StateProgram(0)
    with pytest.raises(ValidationError):
        StateProgram(1, ((2.0, -1), (1.0, 1)))


@pytest.mark.parametrize("spec", [
    build_ai_mach_zehnder(K_MZ, 0.1),
    build_ai_mach_zehnder(K_MZ, 0.1, velocity_transfer=True),
    build_ai_levitated(K_MZ, 4.5e-3, 20),
    build_ai_doubly_differential(K_MZ, 0.1, 0.5, 1.5),
    build_ai_symmetric_transitions(K_MZ, 0.5, 2.0),
    build_ai_guided(0.005, 1.0, 1.0),
], ids=lambda s: s.name)
def test_builtin_interferometers_close(spec):
    rep = closure_check(spec)
    assert rep.applicable and rep.closed


def test_clocks_report_not_applicable():
    rep = closure_check(build_clock_static(1.0, 1.0))
    assert not rep.applicable
    assert rep.branch_returns == {"upper": True, "lower": True}


def _dsl_mz(final_kick):
    ev = [DslEvent(0.0, "upper", "kick", K_MZ), DslEvent(0.1, "upper", "kick", -K_MZ),
          DslEvent(0.1, "lower", "kick", K_MZ), DslEvent(0.2, "lower", "kick", final_kick)]
    return build_custom("dsl", "interferometer", 0.2, ev)


def test_dsl_mz_closes():
    assert closure_check(_dsl_mz(-K_MZ)).closed


def test_short_final_kick_is_not_closed(sr):
    rep = closure_check(_dsl_mz(-0.9 * K_MZ))
    assert not rep.closed
    dv = 0.1 * sr.constants.hbar * K_MZ / sr.m
    assert abs(rep.dv_final) == pytest.approx(dv, rel=1e-9)


def test_require_closed_rejects_open_dsl():
    ev = [DslEvent(0.0, "upper", "kick", K_MZ)]
    with pytest.raises(ValidationError, match="clos"):
        build_custom("open", "interferometer", 0.2, ev, require_closed=True)


@pytest.mark.parametrize("fn,kw", [
    (build_clock_static, dict(dzeta0=1.0, T=-1.0)),
    (build_clock_static, dict(dzeta0=0.0, T=1.0)),
    (build_clock_guided, dict(v=0.0, T=1.0, Tp=1.0)),
    (build_ai_mach_zehnder, dict(k=K_MZ, T=0.0)),
    (build_ai_levitated, dict(k=K_MZ, dz0=0.01)),
    (build_ai_levitated, dict(k=K_MZ, N=0)),
    (build_ai_levitated, dict(k=K_MZ, a=1.0, a_ratio=1.0)),
    (build_ai_doubly_differential, dict(k=K_MZ, T=0.1, t1=1.0, t2=0.5)),
    (build_ai_doubly_differential, dict(k=K_MZ, T=0.1, t1=0.01, t2=0.5)),
])
def test_builder_rejects_invalid(fn, kw):
    with pytest.raises(ValidationError, match="geometry"):
        fn(**kw)


def test_unknown_dsl_branch():
    with pytest.raises(ValidationError):
        build_custom("x", "interferometer", 1.0, [DslEvent(0.0, "middle", "kick", 1.0)])


def test_guided_trap_separation_integral():
    v, T, Tp = 0.005, 1.0, 10.0
    s = build_clock_guided(v, T, Tp)
    cu = s.upper.center
    cl = s.lower.center
    ts = np.linspace(0, 2 * T + Tp, 200001)
    dzeta = cu(ts) - cl(ts)
    assert trapezoid(dzeta, ts) == pytest.approx(2 * v * T * (T + Tp), rel=1e-9)


def test_guided_separation_tracks_trap():
    s = build_clock_guided(0.005, 1.0, 10.0)
    pair = spec_kinematics(s)
    area = separation_integral(pair, 0.0, s.t_end)
    sag_free = 2 * 0.005 * 1.0 * 11.0
    assert area == pytest.approx(sag_free, rel=1e-5)


def test_free_fall_zero_duration_gives_zero_phase():
    from intphase.analysis import differential_phase
    assert differential_phase(build_clock_free_fall(1.0, 0.0)) == 0.0


def test_levitated_dz0_option(sr):
    s = build_ai_levitated(dz0=0.02, T=4.5e-3, N=10)
    assert s.reference_separation == pytest.approx(0.02, rel=1e-15)
    assert s.diagnostics["k"] == pytest.approx(sr.m * 0.02 / (sr.constants.hbar * 4.5e-3), rel=1e-15)


def test_rebuild_keeps_parameters():
    s = build_ai_mach_zehnder(K_MZ, 0.1)
    r = s.rebuild(environment=LabEnvironment(5.0))
    assert r.params == s.params and r.environment.g == 5.0


def test_levitated_a_ratio_tracks_g():
    s = build_ai_levitated(K_MZ, 4.5e-3, 5, a_ratio=0.5)
    r = s.rebuild(environment=LabEnvironment(4.0))
    assert r.diagnostics["a"] == pytest.approx(2.0)


def test_oracle_agrees_for_mach_zehnder():
    s = build_ai_mach_zehnder(K_MZ, 0.1)
    ts = np.linspace(0, 0.2, 101)
    for a, b in zip(solve_branches(s), solve_branches(s, oracle=True)):
        assert np.max(np.abs(a.z(ts) - b.z(ts))) < 1e-9 * 0.1
