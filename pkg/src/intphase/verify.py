"""Built-in verification suite: table reproductions, identities and convergence fits.

Each check belongs to one numbered acceptance criterion. Oracle checks integrate
the equations of motion numerically and can be switched off (reported as skipped).
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .analysis import (ACCEL, GOLD, SensitivityInputs, closed_form_members, closed_form_reference,
                       doubly_differential, doubly_differential_reference, sensitivity, simulate,
                       ugr_classifier)
from .core import LabEnvironment, ViolationModel, WavePacketSpec, strontium88
from .geometry import (build_ai_doubly_differential, build_ai_levitated, build_ai_mach_zehnder,
                       build_ai_symmetric_transitions, build_clock_free_fall, build_clock_guided,
                       build_clock_static, solve_branches)
from .phase import differential_virial, member_phases, wavepacket_phase_clock
from .trajectory import cosine_center, pair_kinematics, quad_tol_default, ramp_center, solve_trap_exact

G0 = 9.81
K_MZ = 1.54586e7
REL_TOL = 1e-9
ORACLE_REL_TOL = 1e-6
REQUIRED_QUAD_TOL = 1e-12

# expected values, evaluated from the closed forms at full precision
STATIC_PHI = -0.29421496709011385
GUIDED_PHI = -0.03236364637991252
LEVITATED_PHI = -0.05295869407622049
DD_PHI = -0.0029421496709011387
DELTA_ALPHA = 1.7913645995e-3


@dataclass
class Check:
    criterion: int
    name: str
    passed: bool | None
    detail: str = ""

    @property
    def status(self) -> str:
        return {True: "PASS", False: "FAIL", None: "SKIP"}[self.passed]


@dataclass
class Criterion:
    number: int
    title: str
    checks: list[Check] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed is not False for c in self.checks)

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def line(self) -> str:
        failed = [c.name for c in self.checks if c.passed is False]
        skipped = sum(c.passed is None for c in self.checks)
        extra = f"; failed: {', '.join(failed)}" if failed else ""
        extra += f"; {skipped} skipped" if skipped else ""
        return f"criterion {self.number:2d}: {self.status} - {self.title} ({self.seconds:.2f} s{extra})"


def rel_err(x: float, ref: float) -> float:
    if ref == 0:
        return abs(x)
    return abs(x - ref) / abs(ref)


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


class _Ctx:
    def __init__(self, oracle: bool, quad_tol: float | None):
        self.oracle = oracle
        self.quad_tol = quad_tol_default() if quad_tol is None else quad_tol
        self.checks: list[Check] = []
        self.criterion = 0

    def add(self, name: str, passed: bool | None, detail: str = "") -> None:
        self.checks.append(Check(self.criterion, name, passed, detail))

    def close(self, name: str, value: float, ref: float, tol: float = REL_TOL, certified: bool = True) -> None:
        """Relative comparison; needs the quadrature tolerance fine enough to certify tol."""
        err = rel_err(value, ref)
        ok = err <= tol
        detail = f"value={value:.12e} ref={ref:.12e} rel={err:.2e} tol={tol:.0e}"
        if certified and self.quad_tol > REQUIRED_QUAD_TOL:
            ok = False
            detail += f"; quadrature tolerance {self.quad_tol:.0e} cannot certify (need <= {REQUIRED_QUAD_TOL:.0e})"
        self.add(name, ok, detail)

    def skip(self, name: str, why: str) -> None:
        self.add(name, None, why)


def _phi(spec, ctx, oracle=False) -> float:
    return simulate(spec, ctx.quad_tol, oracle=oracle, classify=False).phi


def _sr():
    return strontium88()


# ------------------------------------------------------------ criteria

def crit1(ctx: _Ctx) -> None:
    sp = _sr()
    t = time.perf_counter()
    for g in (0.5 * G0, G0, 1.5 * G0):
        for a in (0.0, 1e-3, -1e-3):
            s = build_clock_static(1.0, 1.0, environment=LabEnvironment(g),
                                   violation=ViolationModel.from_alpha(a, sp))
            ctx.close(f"static g={g:g} alpha={a:g}", _phi(s, ctx), closed_form_reference(s))
    elapsed = time.perf_counter() - t
    ctx.add("static grid runtime < 1 s", elapsed < 1.0, f"{elapsed:.3f} s")
    s = build_clock_static(1.0, 1.0)
    phi = _phi(s, ctx)
    ctx.close("static Sr-88 value", phi, STATIC_PHI)
    ctx.add("static sign", phi < 0, f"{phi:.6e}")
    if not ctx.oracle:
        ctx.skip("static grid, ODE oracle", "oracle disabled")
        return
    for g in (0.5 * G0, G0, 1.5 * G0):
        for a in (0.0, 1e-3, -1e-3):
            s = build_clock_static(1.0, 1.0, environment=LabEnvironment(g),
                                   violation=ViolationModel.from_alpha(a, sp))
            ctx.close(f"static oracle g={g:g} alpha={a:g}", _phi(s, ctx, oracle=True),
                      closed_form_reference(s), ORACLE_REL_TOL, certified=False)


GUIDED_FREQS_HZ = (10.5, 20.5, 40.5, 80.5)


def crit2(ctx: _Ctx) -> None:
    sp = _sr()
    t = time.perf_counter()
    for g in (0.5 * G0, G0, 1.5 * G0):
        for a in (0.0, 1e-3):
            vi = ViolationModel.from_alpha(a, sp)
            env = LabEnvironment(g)
            s = build_clock_free_fall(1.0, 1.0, violation=vi, environment=env)
            ctx.close(f"free fall g={g:g} alpha={a:g}", _phi(s, ctx), closed_form_reference(s))
    for a in (0.0, 1e-3):
        s = build_clock_guided(0.005, 1.0, 10.0, violation=ViolationModel.from_alpha(a, sp))
        ctx.close(f"guided alpha={a:g}", _phi(s, ctx), closed_form_reference(s))
    ctx.close("guided value", _phi(build_clock_guided(0.005, 1.0, 10.0), ctx), GUIDED_PHI)
    gammas = [2 * math.pi * f for f in GUIDED_FREQS_HZ]
    res, dev = [], []
    for G in gammas:
        s = build_clock_guided(0.005, 1.0, 10.0, gamma=G)
        res.append(abs(_phi(s, ctx) - closed_form_reference(s)))
        pair = pair_kinematics(*solve_branches(s, quad_tol=ctx.quad_tol))
        ts = np.linspace(s.t_start, s.t_end, 24001)
        dev.append(float(np.max(np.abs(pair.dz(ts) - pair.dzeta(ts)))))
    slope = loglog_slope(gammas, res)
    ctx.add("guided phase residual slope -1 +- 0.2", abs(slope + 1) <= 0.2,
            f"slope={slope:.3f}; residuals={['%.3e' % r for r in res]}")
    dslope = loglog_slope(gammas, dev)
    ctx.add("guided max|dz - dzeta| slope -1 +- 0.2 (supplementary)", abs(dslope + 1) <= 0.2, f"slope={dslope:.3f}")
    ctx.add("guided phase residual slope -2 +- 0.2 (supplementary)", abs(slope + 2) <= 0.2, f"slope={slope:.3f}")
    elapsed = time.perf_counter() - t
    ctx.add("runtime < 10 s", elapsed < 10.0, f"{elapsed:.2f} s")


def crit3(ctx: _Ctx) -> None:
    T = 0.1
    vi = ViolationModel(2e-10, 7e-10)
    s = build_ai_mach_zehnder(K_MZ, T, violation=vi)
    res = simulate(s, ctx.quad_tol, classify=False)
    ref = closed_form_members(s)
    for st in ("b", "a"):
        ctx.close(f"MZ phi_{st} - phi0", res.members[st].perturbation, ref[st][1])
        ctx.close(f"MZ phi0 ({st})", res.members[st].phi0, ref[st][0])
    ctx.close("MZ Phi_AI", res.phi, -vi.delta_beta * K_MZ * G0 * T * T)
    s = build_ai_mach_zehnder(K_MZ, T, violation=ViolationModel(1e-10, 1e-10))
    phis = [_phi(s.rebuild(environment=LabEnvironment(g)), ctx) for g in (0.0, 4.9, 9.81, 19.6)]
    scale = K_MZ * G0 * T * T
    spread = max(abs(p - phis[2]) for p in phis)
    ctx.add("MZ g-invariance (dbeta=0)", spread <= 1e-12 * scale, f"max |dPhi|={spread:.3e} rad, scale={scale:.3e}")


def crit4(ctx: _Ctx) -> None:
    sp = _sr()
    base = dict(dz0=0.02, T=4.5e-3, N=2000)
    for ratio in (0.0, 0.5, 1.0):
        for a in (0.0, 1e-3):
            s = build_ai_levitated(**base, a_ratio=ratio, violation=ViolationModel.from_alpha(a, sp))
            ref = closed_form_reference(s)
            if ref == 0:
                phi = _phi(s, ctx)
                ok = abs(phi) <= REL_TOL * abs(LEVITATED_PHI)
                ctx.add(f"levitated a={ratio}g alpha={a:g}", ok, f"|Phi|={abs(phi):.3e}")
            else:
                ctx.close(f"levitated a={ratio}g alpha={a:g}", _phi(s, ctx), ref)
    s = build_ai_levitated(**base)
    phi = _phi(s, ctx)
    ctx.close("levitated value (a=g)", phi, LEVITATED_PHI)
    ctx.add("levitated value rounds to -0.052959", round(phi, 6) == -0.052959, f"{phi:.9f}")
    labels = {}
    for ratio in (0.0, 0.5, 1.0):
        labels[ratio] = ugr_classifier(build_ai_levitated(**base, a_ratio=ratio), quad_tol=ctx.quad_tol).label
    ctx.add("classifier gold only at a=g", labels[1.0] == GOLD and labels[0.5] != GOLD and labels[0.0] != GOLD,
            f"{labels}")
    ctx.add("classifier a=0.5g accelerational", labels[0.5] == ACCEL, labels[0.5])


def _dd_k(dz0: float, T: float) -> float:
    sp = _sr()
    return sp.m * dz0 / (sp.constants.hbar * T)


def crit5(ctx: _Ctx) -> None:
    sp = _sr()
    T = 0.1
    k = _dd_k(0.01, T)
    for a in (0.0, 1e-3):
        for (t1, t2) in ((0.5, 1.5), (0.2, 0.9)):
            vi = ViolationModel.from_alpha(a, sp)
            s1 = build_ai_doubly_differential(k, T, t1, t2, realization=1, violation=vi)
            s2 = build_ai_doubly_differential(k, T, t1, t2, realization=2, violation=vi)
            ctx.close(f"DD t1={t1} t2={t2} alpha={a:g}", doubly_differential(s1, s2, ctx.quad_tol),
                      doubly_differential_reference(s1, s2))
    s1 = build_ai_doubly_differential(k, T, 0.5, 1.5, realization=1)
    s2 = build_ai_doubly_differential(k, T, 0.5, 1.5, realization=2)
    ctx.close("DD value (dz0=1 cm, 1 s)", doubly_differential(s1, s2, ctx.quad_tol), DD_PHI)


def crit6(ctx: _Ctx) -> None:
    sp = _sr()
    for Tp in (2.0, 0.0):
        for vi in (ViolationModel(2e-10, 5e-10), ViolationModel.from_alpha(1e-3, sp, 1e-10)):
            s = build_ai_symmetric_transitions(K_MZ, 0.5, Tp, violation=vi)
            res = simulate(s, ctx.quad_tol, classify=False)
            ref = closed_form_members(s)
            tag = f"T'={Tp} beta=({vi.beta_a:.1e},{vi.beta_b:.1e})"
            for st in ("b", "a"):
                ctx.close(f"symmetric phi_{st} - phi0 {tag}", res.members[st].perturbation, ref[st][1])
                ctx.close(f"symmetric phi0_{st} {tag}", res.members[st].phi0, ref[st][0])
            omega_eff = sp.dm / sp.constants.hbar + sp.m * vi.delta_beta / sp.constants.hbar
            dz0 = s.reference_separation
            expected = -2 * omega_eff * dz0 * G0 * Tp + 2 * K_MZ * vi.delta_beta * G0 * 0.5 * (0.5 + Tp)
            ctx.close(f"symmetric phi_b - phi_a {tag}", res.phi, expected)


def crit7(ctx: _Ctx) -> None:
    sp = _sr()
    inp = SensitivityInputs(1e5, 1e4, 9.0, 9.0, 0.02, sp.clock_frequency, G0)
    da = sensitivity(inp)
    ctx.add("delta alpha = 1.79136e-3 +- 1e-6", abs(da - DELTA_ALPHA) <= 1e-6,
            f"delta_alpha={da:.10e}; |delta_alpha - 1.79e-3|={abs(da - 1.79e-3):.2e}")
    ctx.add("delta alpha rounds to 1.79e-3", float(f"{da:.3g}") == 1.79e-3, f"{da:.3g}")
    d2 = sensitivity(replace(inp, dz0=0.04))
    ctx.add("delta alpha ~ 1/dz0", rel_err(d2, da / 2) <= 4e-16, f"rel={rel_err(d2, da / 2):.1e}")
    d3 = sensitivity(replace(inp, T_av=4e4))
    ctx.add("delta alpha ~ 1/sqrt(T_av)", rel_err(d3, da / 2) <= 4e-16, f"rel={rel_err(d3, da / 2):.1e}")


def crit8(ctx: _Ctx) -> None:
    sp = _sr()
    clocks = [build_clock_static(1.0, 1.0), build_clock_free_fall(1.0, 1.0), build_clock_guided(0.005, 1.0, 10.0),
              build_clock_static(1.0, 1.0, delta_gamma2=50.0, violation=ViolationModel.from_alpha(1e-3, sp)),
              build_clock_guided(0.005, 1.0, 10.0, gamma=2 * math.pi * 20.5, delta_gamma2=20.0,
                                 violation=ViolationModel.from_alpha(-1e-3, sp))]
    for s in clocks:
        arms = solve_branches(s, quad_tol=ctx.quad_tol)
        mem = member_phases(s, arms, tol=ctx.quad_tol)
        d = mem["upper"] - mem["lower"]
        direct = d.dynamical + d.boundary + d.rest_energy
        vir = differential_virial(s, pair_kinematics(*arms), tol=ctx.quad_tol)["differential"]
        ctx.close(f"virial identity {s.name} dG2={s.trap.delta_gamma2:g}", vir.dynamical + vir.boundary, direct)
    if ctx.oracle:
        for s in (build_clock_guided(0.005, 1.0, 10.0), build_clock_static(1.0, 1.0)):
            ana = solve_branches(s, quad_tol=ctx.quad_tol)
            ode = solve_branches(s, oracle=True)
            ts = np.linspace(s.t_start, s.t_end, 4001)
            dz = max(float(np.max(np.abs(a.z(ts) - o.z(ts)))) for a, o in zip(ana, ode))
            amp = max(float(np.max(np.abs(tl.center(ts) - tl.center(s.t_start)))) for tl in (s.upper, s.lower))
            bound = 1e-9 * max(G0 / s.trap.gamma ** 2, amp)
            ctx.add(f"ODE oracle vs analytic trap ({s.name})", dz <= bound, f"max|dz|={dz:.3e} bound={bound:.3e}")
    else:
        ctx.skip("ODE oracle vs analytic trap", "oracle disabled")
    gammas = [2 * math.pi * f for f in (10.0, 20.0, 40.0, 80.0)]
    ts = np.linspace(0.0, 1.0, 2001)
    sag, sep = [], []
    w = 2 * math.pi
    for G in gammas:
        c = ramp_center(0.01, w)
        z = solve_trap_exact(c, G, G0, 1.0, quad_tol=ctx.quad_tol).z(ts)
        sag.append(float(np.max(np.abs(z - (c(ts) - (G0 + c.deriv(ts, 2)) / G ** 2)))))
        cu, cl = cosine_center(0.005, w), cosine_center(-0.005, w)
        zu = solve_trap_exact(cu, G, G0, 1.0, quad_tol=ctx.quad_tol).z(ts)
        zl = solve_trap_exact(cl, G, G0, 1.0, quad_tol=ctx.quad_tol).z(ts)
        sep.append(float(np.max(np.abs((zu - zl) - (cu(ts) - cl(ts))))))
    s1 = loglog_slope(gammas, sag)
    s2 = loglog_slope(gammas, sep)
    ctx.add("sag convergence slope -3 +- 0.3", abs(s1 + 3) <= 0.3, f"slope={s1:.3f}")
    ctx.add("dz - dzeta convergence slope -2 +- 0.3", abs(s2 + 2) <= 0.3, f"slope={s2:.3f}")


def crit9(ctx: _Ctx) -> None:
    sp = _sr()
    G = 2 * math.pi * 100.0
    wp = WavePacketSpec.ground_state(sp.m, G)
    for s in (build_clock_static(1.0, 1.0, wavepacket=wp), build_clock_free_fall(1.0, 1.0, wavepacket=wp),
              build_clock_guided(0.005, 1.0, 10.0, wavepacket=wp),
              build_clock_static(1.0, 1.0, delta_gamma2=30.0, wavepacket=wp)):
        on = simulate(s, ctx.quad_tol, wavepacket=True, classify=False)
        off = simulate(s, ctx.quad_tol, wavepacket=False, classify=False)
        ctx.add(f"Phi_C bit-identical with phi_WP on/off ({s.name})",
                on.phi == off.phi and on.wavepacket["value"] != 0.0,
                f"on={on.phi!r} off={off.phi!r} phi_WP={on.wavepacket['value']:.3e}")
    s = build_clock_free_fall(1.0, 1.0, gamma0=G, wavepacket=wp)
    val = wavepacket_phase_clock(s).value
    expected = sp.ratio * G / 4 * 1.0
    ctx.add("released phi_WP = (dm/m)(dp^2/2 hbar m) T", rel_err(val, expected) <= 4e-16,
            f"value={val:.15e} expected={expected:.15e}")
    T = 1.0
    thr = math.sqrt(G / T)
    ok = True
    cases = []
    for f in (0.5, 1 - 1e-9, 1.0, 1 + 1e-9, 2.0):
        dg2 = (thr * f) ** 2 if f != 1.0 else G / T
        s = build_clock_static(1.0, T, gamma=G, delta_gamma2=dg2, wavepacket=wp)
        res = wavepacket_phase_clock(s)
        warned = not res.valid
        should = math.sqrt(dg2) >= thr
        ok &= warned == should
        cases.append(f"{f}:{'warn' if warned else 'ok'}")
    ctx.add("dGamma validity warning iff dGamma >= sqrt(Gamma/T)", ok, ", ".join(cases))


CRITERIA: list[tuple[int, str, Callable[[_Ctx], None]]] = [
    (1, "static-clock reproduction", crit1),
    (2, "free-fall and guided clocks", crit2),
    (3, "Mach-Zehnder", crit3),
    (4, "levitated relaunch", crit4),
    (5, "doubly differential", crit5),
    (6, "symmetric-transition scheme", crit6),
    (7, "sensitivity", crit7),
    (8, "identities and convergence", crit8),
    (9, "wave-packet suite", crit9),
]


def run_verify(oracle: bool = True, quad_tol: float | None = None, only=None) -> list[Criterion]:
    """Run all criteria; criterion 10 aggregates runtime and overall success."""
    ctx = _Ctx(oracle, quad_tol)
    out: list[Criterion] = []
    t_all = time.perf_counter()
    for num, title, fn in CRITERIA:
        if only is not None and num not in only:
            continue
        ctx.criterion = num
        start = len(ctx.checks)
        t = time.perf_counter()
        try:
            fn(ctx)
        except Exception as exc:  # a crash fails the criterion, the suite continues
            ctx.add("exception", False, f"{type(exc).__name__}: {exc}")
        out.append(Criterion(num, title, ctx.checks[start:], time.perf_counter() - t))
    total = time.perf_counter() - t_all
    if only is None or 10 in only:
        c10 = Criterion(10, "full verify run", [], total)
        c10.checks.append(Check(10, "runtime < 60 s", total < 60.0, f"{total:.1f} s"))
        c10.checks.append(Check(10, "all checks pass", all(c.passed for c in out),
                                "failed criteria: " + ", ".join(str(c.number) for c in out if not c.passed)))
        out.append(c10)
    return out
