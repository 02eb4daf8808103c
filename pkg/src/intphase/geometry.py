"""Catalog of clock and interferometer geometries plus a generic timeline DSL."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .core import (LabEnvironment, TrapSpec, ValidationError, ViolationModel, AtomSpecies,
                   WavePacketSpec, strontium88)
from .trajectory import (BranchPairKinematics, BranchTrajectory, PiecewiseLinearCenter,
                         PulseEvent, PulseTimeline, integrate_ode_oracle, pair_kinematics,
                         solve_timeline)

CLOSURE_RTOL = 1e-12


@dataclass(frozen=True)
class StateProgram:
    """Piecewise-constant internal state lambda(t) (+1 = b, -1 = a), right-continuous."""

    initial: int
    flips: tuple[tuple[float, int], ...] = ()

    def __post_init__(self):
        if self.initial not in (1, -1):
            raise ValidationError("state program: initial state must be +1 or -1")
        for t, lam in self.flips:
            if lam not in (1, -1):
                raise ValidationError("state program: flip target must be +1 or -1")
        times = [t for t, _ in self.flips]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValidationError("state program: flips must be strictly time-ordered")

    @classmethod
    def constant(cls, lam: int) -> "StateProgram":
        return cls(lam)

    def at(self, t: float) -> int:
        lam = self.initial
        for tf, target in self.flips:
            if t >= tf:
                lam = target
        return lam

    def intervals(self, t0: float, t1: float) -> list[tuple[float, float, int]]:
        """Maximal sub-intervals of [t0, t1] with constant lambda."""
        edges = [t0] + [t for t, _ in self.flips if t0 < t < t1] + [t1]
        return [(a, b, self.at(a)) for a, b in zip(edges[:-1], edges[1:])]


@dataclass(frozen=True)
class GeometrySpec:
    """A fully specified experiment: two branches, species, violation model and bookkeeping.

    mode 'clock': each branch carries a clock; the differential phase is
    upper minus lower of (b minus a).
    mode 'interferometer': components are state programs shared by both arms;
    the differential phase is components[pairing[0]] minus components[pairing[1]].
    """

    name: str
    mode: str
    upper: PulseTimeline
    lower: PulseTimeline
    species: AtomSpecies
    violation: ViolationModel
    environment: LabEnvironment
    components: tuple[tuple[str, StateProgram], ...]
    pairing: tuple[str, str]
    window: tuple[float, float] | None
    reference_separation: float
    trap: TrapSpec | None = None
    wavepacket: WavePacketSpec | None = None
    wp_mode: str | None = None
    builder: str | None = None
    params: dict = field(default_factory=dict, hash=False, compare=False)
    diagnostics: dict = field(default_factory=dict, hash=False, compare=False)

    def __post_init__(self):
        if self.mode not in ("clock", "interferometer"):
            raise ValidationError(f"geometry.mode: unknown mode {self.mode!r}")
        names = [n for n, _ in self.components]
        for p in self.pairing:
            if p not in names:
                raise ValidationError(f"geometry.pairing: unknown component {p!r}")

    @property
    def t_start(self) -> float:
        return self.upper.t_start

    @property
    def t_end(self) -> float:
        return self.upper.t_end

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    def component(self, name: str) -> StateProgram:
        return dict(self.components)[name]

    def redshift_window(self) -> tuple[tuple[float, float], bool]:
        """Declared window, or the full sequence flagged as a default."""
        if self.window is None:
            return (self.t_start, self.t_end), True
        return self.window, False

    def rebuild(self, **overrides) -> "GeometrySpec":
        """Rebuild with changed parameters (environment, violation, builder args...)."""
        if self.builder is not None:
            kw = dict(self.params)
            kw.update(species=self.species, violation=self.violation,
                      environment=self.environment, wavepacket=self.wavepacket)
            kw.update(overrides)
            return BUILDERS[self.builder](**kw)
        allowed = {"species", "violation", "environment", "wavepacket"}
        bad = set(overrides) - allowed
        if bad:
            raise ValidationError(f"custom geometry cannot override {sorted(bad)}")
        return replace(self, **overrides)


# ---------------------------------------------------------------- solving

def solve_branches(spec: GeometrySpec, oracle: bool = False, quad_tol: float | None = None,
                   trap_mode: str = "exact") -> tuple[BranchTrajectory, BranchTrajectory]:
    g, m = spec.environment.g, spec.species.m
    if oracle:
        return (integrate_ode_oracle(spec.upper, g, m), integrate_ode_oracle(spec.lower, g, m))
    return (solve_timeline(spec.upper, g, m, trap_mode, quad_tol=quad_tol, label="upper"),
            solve_timeline(spec.lower, g, m, trap_mode, quad_tol=quad_tol, label="lower"))


def spec_kinematics(spec: GeometrySpec, **kw) -> BranchPairKinematics:
    return pair_kinematics(*solve_branches(spec, **kw))


@dataclass(frozen=True)
class ClosureReport:
    applicable: bool
    closed: bool
    dz_final: float
    dv_final: float
    scale_z: float
    scale_v: float
    branch_returns: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"applicable": self.applicable, "closed": self.closed, "dz_final": self.dz_final,
                "dv_final": self.dv_final, "scale_z": self.scale_z, "scale_v": self.scale_v,
                "branch_returns": dict(self.branch_returns)}


def _closure_from_pair(pair: BranchPairKinematics) -> tuple[float, float, float, float]:
    up = pair.upper
    ts = np.unique(np.concatenate([np.linspace(up.t_start, up.t_end, 401), pair.breakpoints]))
    scale_z = float(np.max(np.abs(pair.dz(ts))))
    dvs = np.concatenate([pair.dv(ts), pair.dv(ts, "left"), [pair.dv_final()]])
    scale_v = float(np.max(np.abs(dvs)))
    dz_f = float(pair.dz(up.t_end))
    dv_f = pair.dv_final()
    return dz_f, dv_f, scale_z, scale_v


def closure_check(spec: GeometrySpec, pair: BranchPairKinematics | None = None) -> ClosureReport:
    """Position and velocity separation of the two branches at readout (after final kicks)."""
    pair = pair or spec_kinematics(spec)
    dz_f, dv_f, sz, sv = _closure_from_pair(pair)
    if spec.mode == "clock":
        returns = {}
        for lab, tr in (("upper", pair.upper), ("lower", pair.lower)):
            z0, z1 = float(tr.z(tr.t_start)), float(tr.z(tr.t_end))
            returns[lab] = abs(z1 - z0) <= CLOSURE_RTOL * max(abs(z0), abs(z1), 1e-300) + 1e-15
        return ClosureReport(False, False, dz_f, dv_f, sz, sv, returns)
    tz = CLOSURE_RTOL * sz if sz > 0 else 1e-300
    tv = CLOSURE_RTOL * sv if sv > 0 else 1e-300
    closed = abs(dz_f) <= tz and abs(dv_f) <= tv
    return ClosureReport(True, closed, dz_f, dv_f, sz, sv, {})


# ---------------------------------------------------------------- builders

BUILDERS: dict[str, Callable[..., GeometrySpec]] = {}


def _register(name: str):
    def deco(fn):
        BUILDERS[name] = fn
        fn.builder_name = name
        return fn
    return deco


def _defaults(species, violation, environment):
    return (species or strontium88(), violation or ViolationModel(), environment or LabEnvironment())


def _positive(**kw):
    for k, v in kw.items():
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise ValidationError(f"geometry.{k}: must be > 0 (got {v!r})")


def _nonneg(**kw):
    for k, v in kw.items():
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0):
            raise ValidationError(f"geometry.{k}: must be >= 0 (got {v!r})")


CLOCK_COMPONENTS = (("b", StateProgram(1)), ("a", StateProgram(-1)))


def _require_closed(spec: GeometrySpec) -> GeometrySpec:
    rep = closure_check(spec)
    if rep.applicable and not rep.closed:
        raise ValidationError(
            f"{spec.name}: parameters do not close the interferometer "
            f"(dz={rep.dz_final:.3e} m, dv={rep.dv_final:.3e} m/s)")
    return spec


@_register("clock_static")
def build_clock_static(dzeta0: float, T: float, gamma: float = 2 * math.pi * 100.0,
                       delta_gamma2: float = 0.0, zeta_lower: float = 0.0,
                       species=None, violation=None, environment=None, wavepacket=None) -> GeometrySpec:
    """Two clocks in static traps separated by dzeta0, interrogated for T."""
    _positive(dzeta0=dzeta0, gamma=gamma)
    _nonneg(T=T)
    sp, vi, env = _defaults(species, violation, environment)
    trap = TrapSpec(gamma, delta_gamma2)
    mk = lambda z: PulseTimeline(0.0, T, None, 0.0, (), trap, PiecewiseLinearCenter.constant(z), True)
    params = dict(dzeta0=dzeta0, T=T, gamma=gamma, delta_gamma2=delta_gamma2, zeta_lower=zeta_lower)
    return GeometrySpec("clock_static", "clock", mk(zeta_lower + dzeta0), mk(zeta_lower), sp, vi, env,
                        CLOCK_COMPONENTS, ("b", "a"), (0.0, T), dzeta0, trap, wavepacket, "trapped",
                        "clock_static", params)


@_register("clock_free_fall")
def build_clock_free_fall(dzeta0: float, T: float, gamma0: float = 2 * math.pi * 100.0,
                          zeta_lower: float = 0.0,
                          species=None, violation=None, environment=None, wavepacket=None) -> GeometrySpec:
    """Two clocks released at t=0 from the minima of traps separated by dzeta0."""
    _positive(dzeta0=dzeta0, gamma0=gamma0)
    _nonneg(T=T)
    sp, vi, env = _defaults(species, violation, environment)
    trap = TrapSpec(gamma0)
    mk = lambda z: PulseTimeline(0.0, T, None, 0.0, (PulseEvent.trap_off(0.0),), trap,
                                 PiecewiseLinearCenter.constant(z), True)
    params = dict(dzeta0=dzeta0, T=T, gamma0=gamma0, zeta_lower=zeta_lower)
    return GeometrySpec("clock_free_fall", "clock", mk(zeta_lower + dzeta0), mk(zeta_lower), sp, vi, env,
                        CLOCK_COMPONENTS, ("b", "a"), (0.0, T), dzeta0, trap, wavepacket, "released",
                        "clock_free_fall", params)


def _guided_centers(v: float, T: float, Tp: float, zeta0: float):
    ts = (0.0, T, T + Tp, 2 * T + Tp)
    up = PiecewiseLinearCenter(ts, (zeta0, zeta0 + v * T, zeta0 + v * T, zeta0))
    lo = PiecewiseLinearCenter(ts, (zeta0, zeta0 - v * T, zeta0 - v * T, zeta0))
    return up, lo


@_register("clock_guided")
def build_clock_guided(v: float, T: float, Tp: float, gamma: float = 2 * math.pi * 100.0,
                       delta_gamma2: float = 0.0, zeta0: float = 0.0,
                       species=None, violation=None, environment=None, wavepacket=None) -> GeometrySpec:
    """Two clocks in traps moved apart with +-v for T, held for Tp, and brought back."""
    _positive(v=v, T=T, gamma=gamma)
    _nonneg(Tp=Tp)
    sp, vi, env = _defaults(species, violation, environment)
    trap = TrapSpec(gamma, delta_gamma2)
    cu, cl = _guided_centers(v, T, Tp, zeta0)
    tf = 2 * T + Tp
    mk = lambda c: PulseTimeline(0.0, tf, None, 0.0, (), trap, c, True)
    params = dict(v=v, T=T, Tp=Tp, gamma=gamma, delta_gamma2=delta_gamma2, zeta0=zeta0)
    return GeometrySpec("clock_guided", "clock", mk(cu), mk(cl), sp, vi, env, CLOCK_COMPONENTS,
                        ("b", "a"), (0.0, tf), 2 * v * T, trap, wavepacket, "trapped",
                        "clock_guided", params)


AI_COMPONENTS = (("b", StateProgram(1)), ("a", StateProgram(-1)))


@_register("ai_mach_zehnder")
def build_ai_mach_zehnder(k: float, T: float, z0: float = 0.0, v0: float = 0.0,
                          velocity_transfer: bool = False,
                          species=None, violation=None, environment=None, wavepacket=None) -> GeometrySpec:
    """Mach-Zehnder: +hk on the upper arm at 0, exchanged at T, recombined at 2T.

    velocity_transfer=True replaces momentum kicks by state-dependent velocity kicks hk/m.
    """
    _positive(k=k, T=T)
    sp, vi, env = _defaults(species, violation, environment)
    p = sp.constants.hbar * k
    if velocity_transfer:
        dv = p / sp.m
        K = lambda t, s: PulseEvent.velocity_kick(t, s * dv)
    else:
        K = lambda t, s: PulseEvent.kick(t, s * p)
    up = PulseTimeline(0.0, 2 * T, z0, v0, (K(0.0, 1), K(T, -1)))
    lo = PulseTimeline(0.0, 2 * T, z0, v0, (K(T, 1), K(2 * T, -1)))
    params = dict(k=k, T=T, z0=z0, v0=v0, velocity_transfer=velocity_transfer)
    spec = GeometrySpec("ai_mach_zehnder", "interferometer", up, lo, sp, vi, env, AI_COMPONENTS,
                        ("b", "a"), (0.0, 2 * T), p * T / sp.m, None, wavepacket, None,
                        "ai_mach_zehnder", params)
    return _require_closed(spec)


@_register("ai_levitated")
def build_ai_levitated(k: float | None = None, T: float = 4.5e-3, N: int = 2000,
                       a: float | None = None, a_ratio: float | None = None,
                       offset: int = 1, z0: float = 0.0, v0: float = 0.0, dz0: float | None = None,
                       species=None, violation=None, environment=None, wavepacket=None) -> GeometrySpec:
    """Opening pair (0, T), N common relaunches m a T at cadence T, closing pair separated by T.

    Relaunches occur at (offset + l - 1) T for l = 1..N; the closing pair starts at the last
    relaunch. ``a_ratio`` sets a = a_ratio * g (tracks g when rebuilt); default a = g.
    Instead of k the arm separation dz0 may be given (k = m dz0 / (hbar T)).
    """
    _positive(T=T)
    if (k is None) == (dz0 is None):
        raise ValidationError("geometry: give exactly one of k or dz0")
    if k is None:
        _positive(dz0=dz0)
    else:
        _positive(k=k)
    if int(N) != N or N < 1:
        raise ValidationError("geometry.N: must be a positive integer")
    if int(offset) != offset or offset < 1:
        raise ValidationError("geometry.offset: must be an integer >= 1")
    N, offset = int(N), int(offset)
    sp, vi, env = _defaults(species, violation, environment)
    k_val = k if k is not None else sp.m * dz0 / (sp.constants.hbar * T)
    if a is not None and a_ratio is not None:
        raise ValidationError("geometry: give either a or a_ratio, not both")
    if a is None:
        a_ratio = 1.0 if a_ratio is None else a_ratio
        a_val = a_ratio * env.g
    else:
        a_val = a
    if not math.isfinite(a_val):
        raise ValidationError("geometry.a: non-finite")
    p = sp.constants.hbar * k_val
    kappa_p = sp.m * a_val * T
    t_rel = [(offset + l - 1) * T for l in range(1, N + 1)]
    tc = t_rel[-1]
    tf = tc + T
    relaunch = [PulseEvent.relaunch(t, kappa_p) for t in t_rel]
    ev_up = sorted([PulseEvent.kick(0.0, p), PulseEvent.kick(T, -p)] + relaunch, key=lambda e: e.time)
    ev_lo = sorted([PulseEvent.kick(tc, p), PulseEvent.kick(tf, -p)] + relaunch, key=lambda e: e.time)
    up = PulseTimeline(0.0, tf, z0, v0, tuple(ev_up), coalesce=True)
    lo = PulseTimeline(0.0, tf, z0, v0, tuple(ev_lo), coalesce=True)
    params = dict(k=k, T=T, N=N, a=a, a_ratio=a_ratio, offset=offset, z0=z0, v0=v0, dz0=dz0)
    spec = GeometrySpec("ai_levitated", "interferometer", up, lo, sp, vi, env, AI_COMPONENTS,
                        ("b", "a"), (0.0, tf), p * T / sp.m, None, wavepacket, None,
                        "ai_levitated", params, {"a": a_val, "t_close": tc, "k": k_val})
    return _require_closed(spec)


@_register("ai_guided")
def build_ai_guided(v: float, T: float, Tp: float, gamma: float = 2 * math.pi * 100.0,
                    delta_gamma2: float = 0.0, zeta0: float = 0.0,
                    species=None, violation=None, environment=None, wavepacket=None) -> GeometrySpec:
    """Single atom guided along the two clock-trap profiles in spatial superposition."""
    _positive(v=v, T=T, gamma=gamma)
    _nonneg(Tp=Tp)
    sp, vi, env = _defaults(species, violation, environment)
    trap = TrapSpec(gamma, delta_gamma2)
    cu, cl = _guided_centers(v, T, Tp, zeta0)
    tf = 2 * T + Tp
    mk = lambda c: PulseTimeline(0.0, tf, None, 0.0, (), trap, c, True)
    params = dict(v=v, T=T, Tp=Tp, gamma=gamma, delta_gamma2=delta_gamma2, zeta0=zeta0)
    return GeometrySpec("ai_guided", "interferometer", mk(cu), mk(cl), sp, vi, env, AI_COMPONENTS,
                        ("b", "a"), (0.0, tf), 2 * v * T, trap, wavepacket, None, "ai_guided", params)


@_register("ai_doubly_differential")
def build_ai_doubly_differential(k: float, T: float, t1: float, t2: float, realization: int = 1,
                                 t_close: float | None = None, z0: float = 0.0, v0: float = 0.0,
                                 species=None, violation=None, environment=None,
                                 wavepacket=None) -> GeometrySpec:
    """Ramsey-Borde-like scheme with a recoilless clock initialization at t1 (or t2).

    Opening kicks on the upper arm at 0 and T, closing kicks on the lower arm at
    t_close and t_close + T (default t_close = t2 + T).
    """
    _positive(k=k, T=T)
    if not t2 > t1:
        raise ValidationError("geometry.t2: must be > t1")
    tc = t2 + T if t_close is None else t_close
    if not (T <= t1 and t2 <= tc):
        raise ValidationError(f"geometry.t1/t2: clock initialization must lie in the parallel window [{T}, {tc}]")
    if realization not in (1, 2):
        raise ValidationError("geometry.realization: must be 1 or 2")
    sp, vi, env = _defaults(species, violation, environment)
    p = sp.constants.hbar * k
    tinit = t1 if realization == 1 else t2
    tf = tc + T
    init = PulseEvent(tinit, "clock_init")
    up = PulseTimeline(0.0, tf, z0, v0, (PulseEvent.kick(0.0, p), PulseEvent.kick(T, -p), init))
    lo = PulseTimeline(0.0, tf, z0, v0, (init, PulseEvent.kick(tc, p), PulseEvent.kick(tf, -p)))
    comps = (("a->b", StateProgram(-1, ((tinit, 1),))), ("a->a", StateProgram(-1)))
    params = dict(k=k, T=T, t1=t1, t2=t2, realization=realization, t_close=t_close, z0=z0, v0=v0)
    spec = GeometrySpec("ai_doubly_differential", "interferometer", up, lo, sp, vi, env, comps,
                        ("a->b", "a->a"), (t1, t2), p * T / sp.m, None, wavepacket, None,
                        "ai_doubly_differential", params, {"t_init": tinit, "t_close": tc})
    return _require_closed(spec)


@_register("ai_symmetric_transitions")
def build_ai_symmetric_transitions(k: float, T: float, Tp: float, z0: float = 0.0, v0: float = 0.0,
                                   species=None, violation=None, environment=None,
                                   wavepacket=None) -> GeometrySpec:
    """Symmetric diffraction at 0, state flips with reversed kicks at T and T+Tp, closing at 2T+Tp.

    Component 'b' runs a -> b -> a (central segment in b); component 'a' runs b -> a -> b.
    """
    _positive(k=k, T=T)
    _nonneg(Tp=Tp)
    sp, vi, env = _defaults(species, violation, environment)
    p = sp.constants.hbar * k
    t1, t2, tf = T, T + Tp, 2 * T + Tp
    kicks = lambda s: (PulseEvent.kick(0.0, s * p), PulseEvent.kick(t1, -s * p),
                       PulseEvent.kick(t2, -s * p), PulseEvent.kick(tf, s * p))
    coalesce = Tp == 0
    up = PulseTimeline(0.0, tf, z0, v0, kicks(1), coalesce=coalesce)
    lo = PulseTimeline(0.0, tf, z0, v0, kicks(-1), coalesce=coalesce)
    if Tp > 0:
        comps = (("b", StateProgram(-1, ((t1, 1), (t2, -1)))), ("a", StateProgram(1, ((t1, -1), (t2, 1)))))
    else:
        comps = (("b", StateProgram(-1)), ("a", StateProgram(1)))
    params = dict(k=k, T=T, Tp=Tp, z0=z0, v0=v0)
    spec = GeometrySpec("ai_symmetric_transitions", "interferometer", up, lo, sp, vi, env, comps,
                        ("b", "a"), (0.0, tf), 2 * p * T / sp.m, None, wavepacket, None,
                        "ai_symmetric_transitions", params, {"uff_beta_state": {"b": "a", "a": "b"}})
    return _require_closed(spec)


# ---------------------------------------------------------------- DSL

def trap_program(tl: PulseTimeline) -> list[tuple[float, float, bool]]:
    """Maximal intervals of [t_start, t_end] with the trap on or off (zero-length ones dropped)."""
    on = tl.trap_initially_on
    edges: list[tuple[float, bool]] = []
    for e in tl.events:
        if e.kind in ("trap_on", "trap_off"):
            edges.append((e.time, e.kind == "trap_on"))
    out = []
    t = tl.t_start
    for te, state in edges:
        if te > t and (not out or out[-1][2] != on):
            out.append((t, te, on))
        elif te > t:
            out[-1] = (out[-1][0], te, on)
        t = max(t, te)
        on = state
    if tl.t_end > t or not out:
        if out and out[-1][2] == on:
            out[-1] = (out[-1][0], tl.t_end, on)
        else:
            out.append((t, tl.t_end, on))
    return out


def _wp_mode(tls) -> str:
    progs = [[(a, b, on) for a, b, on in trap_program(tl)] for tl in tls]
    if progs[0] != progs[1]:
        return "branch_dependent"
    states = {on for _, _, on in progs[0]}
    if states == {True}:
        return "trapped"
    if states == {False}:
        return "released"
    return "piecewise"


@dataclass(frozen=True)
class DslEvent:
    time: float
    branch: str
    kind: str
    magnitude: float = 0.0


def build_custom(name: str, mode: str, t_end: float, events, components=None, pairing=None,
                 window=None, reference_separation: float = 0.0, trap: TrapSpec | None = None,
                 centers: dict | None = None, z0: tuple[float | None, float | None] = (0.0, 0.0),
                 v0: tuple[float, float] = (0.0, 0.0), trap_initially_on: bool = False,
                 coalesce: bool = False, require_closed: bool = False,
                 species=None, violation=None, environment=None, wavepacket=None) -> GeometrySpec:
    """Generic geometry from a list of DslEvent.

    Magnitudes: kick/relaunch take a wave number k (momentum hbar k), velocity_kick a
    velocity, state_flip/clock_init are markers (components carry the state programs).
    branch is 'upper', 'lower' or 'both'.
    """
    _nonneg(t_end=t_end)
    sp, vi, env = _defaults(species, violation, environment)
    hb = sp.constants.hbar
    per = {"upper": [], "lower": []}
    for ev in events:
        if ev.branch not in ("upper", "lower", "both"):
            raise ValidationError(f"event.branch: unknown branch {ev.branch!r}")
        if ev.kind in ("kick", "relaunch"):
            pe = PulseEvent(ev.time, ev.kind, momentum=hb * ev.magnitude)
        elif ev.kind == "velocity_kick":
            pe = PulseEvent.velocity_kick(ev.time, ev.magnitude)
        elif ev.kind == "state_flip":
            pe = PulseEvent(ev.time, "state_flip", target=int(ev.magnitude) or 1)
        else:
            pe = PulseEvent(ev.time, ev.kind)
        for br in (("upper", "lower") if ev.branch == "both" else (ev.branch,)):
            per[br].append(pe)
    centers = centers or {}
    tls = []
    for i, br in enumerate(("upper", "lower")):
        evs = tuple(sorted(per[br], key=lambda e: e.time))
        c = centers.get(br)
        tls.append(PulseTimeline(0.0, t_end, z0[i], v0[i], evs, trap, c, trap_initially_on, coalesce))
    if components is None:
        components = CLOCK_COMPONENTS if mode == "clock" else AI_COMPONENTS
    components = tuple(components)
    if pairing is None:
        pairing = (components[0][0], components[1][0])
    spec = GeometrySpec(name, mode, tls[0], tls[1], sp, vi, env, components, tuple(pairing),
                        None if window is None else tuple(window), reference_separation, trap,
                        wavepacket, _wp_mode(tls) if mode == "clock" else None)
    if require_closed:
        _require_closed(spec)
    return spec
