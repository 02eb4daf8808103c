"""Perturbative phases along unperturbed trajectories.

Sign conventions: lambda = +1 for the excited state b, -1 for a; phases are
-(1/hbar) times the action of the perturbation Hamiltonian

    H = lam (dm/2)[c^2 - zdot^2/2 + g z] + m beta g z + lam (m dG2/4)(z - zeta)^2

plus the unperturbed phase phi0 = S0/hbar. The rest-energy piece lam (dm/2) c^2
is kept in its own field because it is ~1e15 rad for optical clocks and would
swamp double precision if summed with the sub-radian terms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .core import AtomSpecies, TrapSpec, ValidationError, WavePacketSpec
from .geometry import GeometrySpec, StateProgram, closure_check, solve_branches, trap_program
from .trajectory import BranchPairKinematics, BranchTrajectory, adaptive_quad, pair_kinematics, quad_tol_default


class UnsupportedConfiguration(ValidationError):
    """Requested quantity has no formula for this geometry."""


@dataclass(frozen=True)
class PhaseBreakdown:
    """Phase contributions in rad; total = phi0 + rest_energy + dynamical + boundary + wp."""

    phi0: float = 0.0
    rest_energy: float = 0.0
    dynamical: float = 0.0
    boundary: float = 0.0
    wp: float = 0.0

    @property
    def total(self) -> float:
        return self.phi0 + self.rest_energy + self.dynamical + self.boundary + self.wp

    @property
    def perturbation(self) -> float:
        """Total minus phi0 (the part generated by the perturbation)."""
        return self.rest_energy + self.dynamical + self.boundary + self.wp

    def __sub__(self, other: "PhaseBreakdown") -> "PhaseBreakdown":
        return PhaseBreakdown(*(getattr(self, f.name) - getattr(other, f.name) for f in fields(self)))

    def __add__(self, other: "PhaseBreakdown") -> "PhaseBreakdown":
        return PhaseBreakdown(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))

    def replace(self, **kw) -> "PhaseBreakdown":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(kw)
        return PhaseBreakdown(**d)

    def as_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["total"] = self.total
        return d


def perturbation_density(lam: int, beta: float, species: AtomSpecies, g: float,
                         traj: BranchTrajectory, t: float, trap: TrapSpec | None = None,
                         with_trap_term: bool = False) -> float:
    """Perturbation Hamiltonian (J) on the classical path at time t."""
    if with_trap_term and trap is None:
        raise ValidationError("perturbation_density: trap term requested without TrapSpec")
    z, v = (float(x) for x in traj.state(t))
    c = species.constants.c
    h = lam * species.dm / 2 * (c * c - v * v / 2 + g * z) + species.m * beta * g * z
    if with_trap_term:
        h += lam * species.m * trap.delta_gamma2 / 4 * (z - float(traj.zeta(t))) ** 2
    return h


# ---------------------------------------------------------------- direct form

def _overlaps(traj: BranchTrajectory, a: float, b: float):
    for seg in traj.segments:
        lo, hi = max(a, seg.t0), min(b, seg.t1)
        if hi > lo:
            yield seg, lo, hi


def _kicks_in(traj: BranchTrajectory, a: float, b: float, closed_left: bool, closed_right: bool):
    for k in traj.kicks:
        if (a < k.time < b) or (closed_left and k.time == a) or (closed_right and k.time == b):
            yield k


def _moments(seg, lo, hi, tol, cache):
    if cache is None:
        return seg.moments(lo, hi, tol)
    key = (id(seg), lo, hi, tol)
    if key not in cache:
        cache[key] = (seg, seg.moments(lo, hi, tol))
    return cache[key][1]


def arm_phase(traj: BranchTrajectory, program: StateProgram, spec: GeometrySpec,
              tol: float | None = None, cache: dict | None = None) -> PhaseBreakdown:
    """Phase of one arm for a given internal-state program (direct quadrature form)."""
    tol = quad_tol_default() if tol is None else tol
    sp, vi, g = spec.species, spec.violation, spec.environment.g
    m, dm, hb = sp.m, sp.dm, sp.constants.hbar
    omega = sp.clock_frequency
    dg2 = spec.trap.delta_gamma2 if spec.trap is not None else 0.0
    t0, t1 = traj.t_start, traj.t_end
    S0 = 0.0
    dyn = 0.0
    rest = 0.0
    for a, b, lam in program.intervals(t0, t1):
        beta = vi.beta(lam)
        rest += -omega * (lam / 2) * (b - a)
        for seg, lo, hi in _overlaps(traj, a, b):
            iz, iv2, io2 = _moments(seg, lo, hi, tol, cache)
            G2 = seg.gamma ** 2 if seg.trap_on else 0.0
            S0 += m * iv2 / 2 - m * g * iz - m * G2 / 2 * io2
            H = lam * dm / 2 * (-iv2 / 2 + g * iz) + m * beta * g * iz
            if seg.trap_on and dg2:
                H += lam * m * dg2 / 4 * io2
            dyn -= H / hb
    phi0 = S0 / hb
    for k in traj.kicks:
        zk = float(traj.z(k.time))
        phi0 += k.momentum * zk / hb + k.laser_phase
        if k.kind == "velocity_kick" and k.state_dependent:
            dyn += program.at(k.time) * dm * k.dv * zk / (2 * hb)
    return PhaseBreakdown(phi0=phi0, rest_energy=rest, dynamical=dyn)


def member_phases(spec: GeometrySpec, arms: tuple[BranchTrajectory, BranchTrajectory],
                  mode: str | None = None, tol: float | None = None,
                  cache: dict | None = None) -> dict[str, PhaseBreakdown]:
    """Direct-form phases of the members whose difference is the observable.

    clock mode: per branch, phi_b - phi_a on that branch's path.
    interferometer mode: per component, upper minus lower arm.
    ``cache`` may be shared between calls on the same trajectories.
    """
    mode = mode or spec.mode
    up, lo = arms
    cache = {} if cache is None else cache
    if mode == "clock":
        b, a = StateProgram(1), StateProgram(-1)
        return {name: arm_phase(tr, b, spec, tol, cache) - arm_phase(tr, a, spec, tol, cache)
                for name, tr in (("upper", up), ("lower", lo))}
    return {name: arm_phase(up, prog, spec, tol, cache) - arm_phase(lo, prog, spec, tol, cache)
            for name, prog in spec.components}


def phase_dynamical(spec: GeometrySpec, mode: str | None = None, tol: float | None = None,
                    arms=None) -> dict[str, tuple[float, float]]:
    """-(1/hbar) * integral of the differential Hamiltonian, per member.

    Returns {member: (rest_energy, dynamical)}; the rest-energy part (-Omega T per clock)
    is returned separately to keep the sub-radian part at full precision.
    """
    arms = arms or solve_branches(spec, quad_tol=tol)
    return {k: (v.rest_energy, v.dynamical) for k, v in member_phases(spec, arms, mode, tol).items()}


# ---------------------------------------------------------------- partially integrated form

def _pair_pieces(pair: BranchPairKinematics, a: float, b: float):
    """Sub-intervals on which both arms stay within a single segment."""
    cuts = sorted({a, b} | {t for t in pair.breakpoints if a < t < b})
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        su = pair.upper.segments[int(pair.upper._index(lo))]
        sl = pair.lower.segments[int(pair.lower._index(lo))]
        gam = max(su.gamma, sl.gamma)
        yield lo, hi, (2 * math.pi / gam if gam > 0 else None), su, sl


def _pair_integrand(su, sl):
    """dz, mean trap acceleration times dz, and the difference of squared trap offsets."""
    gu = su.gamma ** 2 if su.trap_on else 0.0
    gl = sl.gamma ** 2 if sl.trap_on else 0.0

    def f(t):
        zu, _, cu = su.eval_scalar(t)
        zl, _, cl = sl.eval_scalar(t)
        d = zu - zl
        ou, ol = zu - cu, zl - cl
        acc = -0.5 * (gu * ou + gl * ol)
        return np.array([d, acc * d, (ou * ou if gu else 0.0) - (ol * ol if gl else 0.0)])
    return f


def separation_integral(pair: BranchPairKinematics, a: float, b: float,
                        tol: float | None = None) -> float:
    """Integral of dz(t) over [a, b]."""
    tol = quad_tol_default() if tol is None else tol
    total = 0.0
    for pa, pb, per, su, sl in _pair_pieces(pair, a, b):
        if su.kind == "ballistic" and sl.kind == "ballistic":
            total += 0.5 * (pb - pa) * float(pair.dz(pa) + pair.dz(pb))
        else:
            total += float(adaptive_quad(lambda t: _pair_integrand(su, sl)(t)[:1], pa, pb, tol, per,
                                         "separation integral")[0])
    return total


def pair_virial(pair: BranchPairKinematics, program: StateProgram, spec: GeometrySpec,
                tol: float | None = None) -> PhaseBreakdown:
    """Upper-minus-lower phase of one state program after partial integration.

    The kinetic difference zbar' dz' is integrated by parts on each interval of
    constant lambda; the equation of motion turns it into trap and kick terms plus
    boundary terms lam (dm/2) zbar' dz at the interval ends (including state flips).
    phi0 and the rest energy are not included.
    """
    tol = quad_tol_default() if tol is None else tol
    sp, vi, g = spec.species, spec.violation, spec.environment.g
    m, dm, hb = sp.m, sp.dm, sp.constants.hbar
    dg2 = spec.trap.delta_gamma2 if spec.trap is not None else 0.0
    up, lo = pair.upper, pair.lower
    t0, t1 = up.t_start, up.t_end
    dyn = 0.0
    bnd = 0.0
    for a, b, lam in program.intervals(t0, t1):
        beta = vi.beta(lam)
        acc = np.zeros(3)
        for pa, pb, per, su, sl in _pair_pieces(pair, a, b):
            if su.kind == "ballistic" and sl.kind == "ballistic":
                # dz is linear between kicks: trapezoid rule is exact
                acc[0] += 0.5 * (pb - pa) * float(pair.dz(pa) + pair.dz(pb))
            else:
                acc += adaptive_quad(_pair_integrand(su, sl), pa, pb, tol, per, "pair integrand")
        i_dz, i_trap, i_dg = (float(x) for x in acc)
        kick_sum = 0.0
        for tr in (up, lo):
            for k in _kicks_in(tr, a, b, False, False):
                kick_sum += 0.5 * k.dv * float(pair.dz(k.time))
        dyn -= (lam * dm / 2 * (i_trap + kick_sum) + m * beta * g * i_dz + lam * m * dg2 / 4 * i_dg) / hb
        bnd += lam * dm / 2 * (float(pair.vbar(b, "left")) * float(pair.dz(b))
                               - float(pair.vbar(a, "right")) * float(pair.dz(a))) / hb
    for sign, tr in ((1, up), (-1, lo)):
        for k in tr.kicks:
            if k.kind == "velocity_kick" and k.state_dependent:
                dyn += sign * program.at(k.time) * dm * k.dv * float(tr.z(k.time)) / (2 * hb)
    return PhaseBreakdown(dynamical=dyn, boundary=bnd)


def differential_virial(spec: GeometrySpec, pair: BranchPairKinematics, mode: str | None = None,
                        tol: float | None = None) -> dict[str, PhaseBreakdown]:
    """Partially integrated phases: {'differential': ...} for clocks, per component otherwise."""
    mode = mode or spec.mode
    if mode == "clock":
        return {"differential": pair_virial(pair, StateProgram(1), spec, tol)
                - pair_virial(pair, StateProgram(-1), spec, tol)}
    return {name: pair_virial(pair, prog, spec, tol) for name, prog in spec.components}


def phase_boundary(spec: GeometrySpec, mode: str | None = None, tol: float | None = None,
                   pair: BranchPairKinematics | None = None) -> dict[str, float]:
    """Partial-integration boundary terms (rad), per component or for the clock differential."""
    pair = pair or pair_kinematics(*solve_branches(spec, quad_tol=tol))
    return {k: v.boundary for k, v in differential_virial(spec, pair, mode, tol).items()}


# ---------------------------------------------------------------- wave packets

@dataclass(frozen=True)
class WavePacketPhase:
    value: float
    valid: bool = True
    message: str = ""


def _wp_piecewise(program, gamma: float, dg2: float, wp: WavePacketSpec, m: float, ratio: float,
                  hb: float) -> float:
    """Propagate the packet variances through trap-on/off intervals and integrate
    (dm/2)<dv^2> - (m dG2/2)<dz^2> (trap on) over time."""
    vz, vp, cv = wp.var_z0, wp.var_p0, wp.cross_zp
    acc = 0.0
    for a, b, on in program:
        tau = b - a
        if on and gamma > 0:
            w = gamma
            mw = m * w
            icc = tau / 2 + math.sin(2 * w * tau) / (4 * w)
            iss = tau / 2 - math.sin(2 * w * tau) / (4 * w)
            isc = math.sin(w * tau) ** 2 / (2 * w)
            iz2 = vz * icc + vp / mw ** 2 * iss + 2 * cv / mw * isc
            ip2 = mw ** 2 * vz * iss + vp * icc - 2 * mw * cv * isc
            acc += ratio * ip2 / (2 * m) - m * dg2 / 2 * iz2
            c, s = math.cos(w * tau), math.sin(w * tau)
            vz, vp, cv = (vz * c * c + vp / mw ** 2 * s * s + 2 * cv / mw * s * c,
                          mw ** 2 * vz * s * s + vp * c * c - 2 * mw * cv * s * c,
                          (vp / mw - mw * vz) * s * c + cv * (c * c - s * s))
        else:
            acc += ratio * vp * tau / (2 * m)
            vz, cv = vz + 2 * cv * tau / m + vp * tau * tau / m ** 2, cv + vp * tau / m
    return acc / hb


def wavepacket_phase_clock(spec: GeometrySpec, wp: WavePacketSpec | None = None,
                           mode: str | None = None, duration: float | None = None,
                           experimental: bool = False) -> WavePacketPhase:
    """Branch-independent wave-packet phase of a clock.

    mode 'trapped' (trap on throughout) or 'released' (trap off for t > 0).
    Other trap on/off programs ('piecewise') are composed interval by interval;
    that path is experimental and needs ``experimental=True``.
    """
    wp = wp or spec.wavepacket
    if wp is None:
        raise ValidationError("wavepacket_phase_clock: no WavePacketSpec given")
    mode = mode or spec.wp_mode
    T = spec.duration if duration is None else duration
    sp = spec.species
    m, hb, ratio = sp.m, sp.constants.hbar, sp.ratio
    if mode == "released":
        return WavePacketPhase(ratio * wp.var_p0 / (2 * hb * m) * T)
    if mode == "piecewise":
        if not experimental:
            raise UnsupportedConfiguration(
                "wave-packet phase: trap switched on/off during the sequence; no closed form. "
                "Enable the experimental piecewise composition to compute it anyway")
        trap = spec.trap
        program = trap_program(spec.upper)
        val = _wp_piecewise(program, trap.gamma, trap.delta_gamma2, wp, m, ratio, hb)
        t_on = sum(b - a for a, b, on in program if on)
        ok = t_on == 0 or trap.validity_ok(t_on)
        msg = "experimental: piecewise composition over trap on/off intervals"
        if not ok:
            msg += "; trap splitting not << sqrt(Gamma/T)"
        return WavePacketPhase(val, ok, msg)
    if mode != "trapped":
        raise UnsupportedConfiguration(f"wave-packet phase: no formula for trap program {mode!r}")
    trap = spec.trap
    if trap is None or trap.gamma <= 0:
        raise ValidationError("wavepacket_phase_clock: trapped mode needs a trap with gamma > 0")
    G = trap.gamma
    q = trap.delta_gamma2 / G ** 2
    x, s = G * T / 4, math.sin(2 * G * T) / 8
    phi_zz = ratio * (x - s) - q * (x + s)
    phi_pp = ratio * (x + s) - q * (x - s)
    val = m * G * wp.var_z0 / hb * phi_zz + wp.var_p0 / (hb * m * G) * phi_pp
    ok = trap.validity_ok(T)
    msg = "" if ok else (f"trap splitting dGamma={trap.delta_gamma:.3e} rad/s is not << "
                         f"sqrt(Gamma/T)={math.sqrt(G / T):.3e} rad/s; wave-packet phase unreliable")
    return WavePacketPhase(val, ok, msg)


def wavepacket_phase_interferometer(spec: GeometrySpec) -> float:
    """Closed interferometers with linear potentials carry no wave-packet phase."""
    rep = closure_check(spec)
    if not rep.applicable or not rep.closed:
        raise UnsupportedConfiguration("wave-packet phase is only defined here for closed interferometers")
    if spec.trap is not None:
        raise UnsupportedConfiguration("wave-packet phase for trapped interferometers is not modeled")
    return 0.0


# ---------------------------------------------------------------- proper time

def proper_time_shift(traj: BranchTrajectory, g: float, c: float, tol: float | None = None) -> float:
    """tau - (t_end - t_start) from the c^-2 expansion."""
    tol = quad_tol_default() if tol is None else tol
    iz = iv = 0.0
    for seg, lo, hi in _overlaps(traj, traj.t_start, traj.t_end):
        a, b, _ = seg.moments(lo, hi, tol)
        iz += a
        iv += b
    return (-iv / 2 + g * iz) / (c * c)


def proper_time(traj: BranchTrajectory, g: float, c: float, tol: float | None = None) -> float:
    """tau = integral of [1 - zdot^2/(2c^2) + g z/c^2] dt."""
    return (traj.t_end - traj.t_start) + proper_time_shift(traj, g, c, tol)


def sample_times(spec: GeometrySpec, n: int = 1000) -> np.ndarray:
    return np.linspace(spec.t_start, spec.t_end, n)
