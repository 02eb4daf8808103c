"""Unperturbed classical trajectories.

Solves  z'' = -g + F/m - Gamma^2 (z - zeta)  piecewise between pulse events.
Kicks are instantaneous velocity jumps that belong to the following segment
(left-closed segments).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .core import NumericalError, TrapSpec, ValidationError

KICK_KINDS = ("kick", "relaunch", "velocity_kick")
EVENT_KINDS = KICK_KINDS + ("trap_on", "trap_off", "state_flip", "clock_init")
DEFAULT_QUAD_TOL = 1e-12
_GAUSS = np.polynomial.legendre.leggauss(16)


# ---------------------------------------------------------------- events

@dataclass(frozen=True)
class PulseEvent:
    """Instantaneous event on one branch.

    ``momentum`` (kg m/s) is used by kick/relaunch, ``dv`` (m/s) by
    velocity_kick, ``target`` (+1/-1) by state_flip.
    """

    time: float
    kind: str
    momentum: float = 0.0
    dv: float = 0.0
    state_dependent: bool = True
    target: int = 0
    laser_phase: float = 0.0

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValidationError(f"event.kind: unknown kind {self.kind!r}")
        if not math.isfinite(self.time):
            raise ValidationError("event.time: non-finite")
        if self.kind == "state_flip" and self.target not in (1, -1):
            raise ValidationError("event.target: state_flip needs target +1 or -1")

    @classmethod
    def kick(cls, t: float, momentum: float, laser_phase: float = 0.0) -> "PulseEvent":
        return cls(t, "kick", momentum=momentum, laser_phase=laser_phase)

    @classmethod
    def relaunch(cls, t: float, momentum: float) -> "PulseEvent":
        return cls(t, "relaunch", momentum=momentum)

    @classmethod
    def velocity_kick(cls, t: float, dv: float, state_dependent: bool = True) -> "PulseEvent":
        return cls(t, "velocity_kick", dv=dv, state_dependent=state_dependent)

    @classmethod
    def trap_on(cls, t: float) -> "PulseEvent":
        return cls(t, "trap_on")

    @classmethod
    def trap_off(cls, t: float) -> "PulseEvent":
        return cls(t, "trap_off")

    @property
    def is_kick(self) -> bool:
        return self.kind in KICK_KINDS

    def velocity_jump(self, m: float) -> float:
        if self.kind == "velocity_kick":
            return self.dv
        if self.kind in ("kick", "relaunch"):
            return self.momentum / m
        return 0.0


# ---------------------------------------------------------------- trap centers

class Center:
    """Trap-center trajectory zeta(t) with derivatives up to third order."""

    knots: tuple[float, ...] = ()

    def deriv(self, t, n: int = 0):
        raise NotImplementedError

    def __call__(self, t):
        return self.deriv(t, 0)

    @property
    def piecewise_linear(self) -> bool:
        return False


@dataclass(frozen=True)
class PiecewiseLinearCenter(Center):
    """Linear interpolation through knots, constant outside; slope is right-continuous."""

    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.times) != len(self.values) or not self.times:
            raise ValidationError("center: times and values must be non-empty and equal length")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValidationError("center: knot times must be strictly increasing")

    @classmethod
    def constant(cls, value: float) -> "PiecewiseLinearCenter":
        return cls((0.0,), (float(value),))

    @property
    def knots(self):
        return self.times

    @property
    def piecewise_linear(self) -> bool:
        return True

    def slope(self, t: float) -> float:
        ts, vs = self.times, self.values
        i = np.searchsorted(ts, t, side="right") - 1
        if i < 0 or i >= len(ts) - 1:
            return 0.0
        return (vs[i + 1] - vs[i]) / (ts[i + 1] - ts[i])

    def deriv(self, t, n: int = 0):
        t = np.asarray(t, dtype=float)
        if n == 0:
            return np.interp(t, self.times, self.values)
        if n == 1:
            return np.vectorize(self.slope, otypes=[float])(t) if t.ndim else self.slope(float(t))
        return np.zeros_like(t) if t.ndim else 0.0


@dataclass(frozen=True)
class SmoothCenter(Center):
    """Center given by callables for zeta and its first three derivatives."""

    funcs: tuple[Callable, Callable, Callable, Callable]
    label: str = "smooth"

    def deriv(self, t, n: int = 0):
        if not 0 <= n <= 3:
            raise ValidationError("center derivative order must be 0..3")
        return self.funcs[n](t)


def ramp_center(amplitude: float, omega: float, offset: float = 0.0) -> SmoothCenter:
    """zeta = offset + A (w t - sin w t): starts at rest with nonzero jerk."""
    A, w = amplitude, omega
    return SmoothCenter((
        lambda t: offset + A * (w * np.asarray(t) - np.sin(w * np.asarray(t))),
        lambda t: A * w * (1 - np.cos(w * np.asarray(t))),
        lambda t: A * w ** 2 * np.sin(w * np.asarray(t)),
        lambda t: A * w ** 3 * np.cos(w * np.asarray(t)),
    ), "ramp")


def cosine_center(amplitude: float, omega: float, offset: float = 0.0) -> SmoothCenter:
    """zeta = offset + A (1 - cos w t): starts at rest with nonzero acceleration."""
    A, w = amplitude, omega
    return SmoothCenter((
        lambda t: offset + A * (1 - np.cos(w * np.asarray(t))),
        lambda t: A * w * np.sin(w * np.asarray(t)),
        lambda t: A * w ** 2 * np.cos(w * np.asarray(t)),
        lambda t: -A * w ** 3 * np.sin(w * np.asarray(t)),
    ), "cosine")


# ---------------------------------------------------------------- segments

def quad_tol_default() -> float:
    """Quadrature tolerance, overridable through INTPHASE_QUAD_TOL."""
    import os
    env = os.environ.get("INTPHASE_QUAD_TOL")
    if env:
        try:
            return float(env)
        except ValueError:
            raise ValidationError(f"INTPHASE_QUAD_TOL: not a number: {env!r}") from None
    return DEFAULT_QUAD_TOL


def adaptive_quad(f: Callable[[float], object], a: float, b: float, tol: float,
                  period: float | None = None, label: str = ""):
    """Adaptive Gauss-Kronrod quadrature of a scalar or vector integrand.

    Oscillatory integrands are pre-split every four periods.
    """
    if b <= a:
        return 0.0 * np.asarray(f(a), dtype=float)
    points = None
    if period:
        n = int(math.ceil((b - a) / (4.0 * period)))
        if n > 1:
            points = list(np.linspace(a, b, n + 1)[1:-1])
    probe = np.array([np.asarray(f(x), dtype=float) for x in np.linspace(a, b, 9)])
    scale = np.max(np.abs(probe)) * (b - a)
    val, err, info = integrate.quad_vec(f, a, b, epsrel=tol, epsabs=tol * scale * 1e-3,
                                        norm="max", limit=100000, points=points, full_output=True)
    val = np.asarray(val, dtype=float)
    if not np.all(np.isfinite(val)):
        raise NumericalError(f"quadrature produced non-finite value on {label} [{a}, {b}]")
    if not info.success and err > max(tol * float(np.max(np.abs(val))), 1e-13 * scale):
        raise NumericalError(f"quadrature did not converge on {label} [{a}, {b}] (error estimate {err:.3e})")
    return val if val.ndim else float(val)


@dataclass(frozen=True)
class Segment:
    """One closed-form piece of a trajectory on [t0, t1].

    kind: ballistic | trap_exact | trap_quad | trap_expansion | ode
    """

    t0: float
    t1: float
    kind: str
    z0: float
    v0: float
    g: float
    gamma: float = 0.0
    c0: float = 0.0
    u: float = 0.0
    center: Center | None = None
    order: int = 3
    quad_tol: float = DEFAULT_QUAD_TOL
    dense: object = None

    @property
    def trap_on(self) -> bool:
        return self.kind != "ballistic"

    @property
    def period(self) -> float | None:
        return 2 * math.pi / self.gamma if self.gamma > 0 else None

    def zeta(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind in ("ballistic",):
            return np.zeros_like(t)
        if self.kind == "trap_exact":
            return self.c0 + self.u * (t - self.t0)
        if self.center is None:
            return np.zeros_like(t)
        return np.asarray(self.center(t), dtype=float) + 0.0 * t

    def eval_scalar(self, t: float) -> tuple[float, float, float]:
        """(z, zdot, zeta) at a single time; fast path for quadrature."""
        tau = t - self.t0
        if self.kind == "ballistic":
            return self.z0 + self.v0 * tau - 0.5 * self.g * tau * tau, self.v0 - self.g * tau, 0.0
        if self.kind == "trap_exact":
            G = self.gamma
            sag = self.g / (G * G)
            w0 = self.z0 - self.c0 + sag
            wd0 = self.v0 - self.u
            c, s = math.cos(G * tau), math.sin(G * tau)
            zeta = self.c0 + self.u * tau
            return zeta - sag + w0 * c + wd0 / G * s, self.u - G * w0 * s + wd0 * c, zeta
        z, v = self.eval(t)
        return float(z), float(v), float(self.zeta(t))

    def eval(self, t):
        """Return (z, zdot) at times t within the segment."""
        t = np.asarray(t, dtype=float)
        tau = t - self.t0
        g = self.g
        if self.kind == "ballistic":
            return self.z0 + self.v0 * tau - 0.5 * g * tau ** 2, self.v0 - g * tau
        G = self.gamma
        if self.kind == "trap_exact":
            sag = g / G ** 2
            w0 = self.z0 - self.c0 + sag
            wd0 = self.v0 - self.u
            c, s = np.cos(G * tau), np.sin(G * tau)
            z = self.c0 + self.u * tau - sag + w0 * c + wd0 / G * s
            v = self.u - G * w0 * s + wd0 * c
            return z, v
        if self.kind == "trap_quad":
            return self._eval_quad(t)
        if self.kind == "trap_expansion":
            return self._eval_expansion(t)
        if self.kind == "ode":
            y = self.dense(t)
            return y[0], y[1]
        raise ValueError(self.kind)

    def _quad_tables(self):
        """Cumulative integrals of zeta'(u) cos(G u) and zeta'(u) sin(G u) at panel edges."""
        tab = self.__dict__.get("_tab")
        if tab is None:
            G, ctr = self.gamma, self.center
            L = self.t1 - self.t0
            n = max(1, int(math.ceil(L / (self.period / 4))))
            edges = np.linspace(0.0, L, n + 1)
            x, w = _GAUSS
            a, b = edges[:-1, None], edges[1:, None]
            u = 0.5 * (b - a) * x + 0.5 * (a + b)
            f = np.asarray(ctr.deriv(self.t0 + u, 1), dtype=float) * (0.5 * (b - a) * w)
            C = np.concatenate([[0.0], np.cumsum(np.sum(f * np.cos(G * u), axis=1))])
            S = np.concatenate([[0.0], np.cumsum(np.sum(f * np.sin(G * u), axis=1))])
            tab = (edges, C, S)
            object.__setattr__(self, "_tab", tab)
        return tab

    def _eval_quad(self, t):
        # variation of constants for w = z - zeta + g/G^2, driven by the center velocity
        G, g, ctr = self.gamma, self.g, self.center
        zd0 = float(ctr.deriv(self.t0, 1))
        w0 = self.z0 - float(ctr(self.t0)) + g / G ** 2
        wd0 = self.v0 - zd0
        edges, C, S = self._quad_tables()
        scalar = np.ndim(t) == 0
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        tau = np.clip(tt - self.t0, 0.0, edges[-1])
        idx = np.clip(np.searchsorted(edges, tau, side="right") - 1, 0, len(edges) - 2)
        e = edges[idx][:, None]
        x, wts = _GAUSS
        h = 0.5 * (tau[:, None] - e)
        u = h * x + 0.5 * (tau[:, None] + e)
        f = np.asarray(ctr.deriv(self.t0 + u, 1), dtype=float) * (h * wts)
        cp = C[idx] + np.sum(f * np.cos(G * u), axis=1)
        sp = S[idx] + np.sum(f * np.sin(G * u), axis=1)
        c, s = np.cos(G * tau), np.sin(G * tau)
        ic = c * cp + s * sp
        js = s * cp - c * sp
        z = np.asarray(ctr(self.t0 + tau), dtype=float) - g / G ** 2 + w0 * c + (wd0 + zd0) / G * s - ic
        v = -G * w0 * s + (wd0 + zd0) * c + G * js
        if scalar:
            return float(z[0]), float(v[0])
        return z, v

    def _eval_expansion(self, t):
        G, g, ctr, k = self.gamma, self.g, self.center, self.order
        tau = t - self.t0
        a0 = float(ctr.deriv(self.t0, 2))
        j0 = float(ctr.deriv(self.t0, 3))
        c, s = np.cos(G * tau), np.sin(G * tau)
        z = np.asarray(ctr(t), dtype=float) + 0.0 * tau
        v = np.asarray(ctr.deriv(t, 1), dtype=float) + 0.0 * tau
        if k >= 2:
            z = z - (g + ctr.deriv(t, 2) - a0 * c) / G ** 2
            v = v - (ctr.deriv(t, 3) + a0 * G * s) / G ** 2
        if k >= 3:
            z = z + j0 * s / G ** 3
            v = v + j0 * c / G ** 2
        return z, v

    def moments(self, a: float, b: float, tol: float | None = None) -> tuple[float, float, float]:
        """Integrals over [a, b] of z, zdot^2 and (z - zeta)^2 (last one 0 if trap off)."""
        if b <= a:
            return 0.0, 0.0, 0.0
        if self.kind == "ballistic":
            # z = z0 + v0 s - g s^2/2 with s = t - t0
            g, z0, v0 = self.g, self.z0, self.v0
            sa, sb = a - self.t0, b - self.t0

            def Pz(s):
                return z0 * s + v0 * s ** 2 / 2 - g * s ** 3 / 6

            def Pv2(s):
                return v0 ** 2 * s - v0 * g * s ** 2 + g ** 2 * s ** 3 / 3

            return Pz(sb) - Pz(sa), Pv2(sb) - Pv2(sa), 0.0
        tol = self.quad_tol if tol is None else tol

        def f(t):
            z, v, zeta = self.eval_scalar(t)
            return np.array([z, v * v, (z - zeta) ** 2])

        iz, iv, io = adaptive_quad(f, a, b, tol, self.period, f"{self.kind} segment [{self.t0}, {self.t1}]")
        return float(iz), float(iv), float(io)


@dataclass(frozen=True)
class KickRecord:
    time: float
    dv: float
    momentum: float
    kind: str
    state_dependent: bool
    laser_phase: float


@dataclass(frozen=True)
class BranchTrajectory:
    """Piecewise trajectory of one branch on [t_start, t_end]."""

    segments: tuple[Segment, ...]
    kicks: tuple[KickRecord, ...] = ()
    v_final: float = 0.0
    label: str = ""
    marks: tuple[PulseEvent, ...] = field(default_factory=tuple)
    v_initial: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "_starts", np.array([s.t0 for s in self.segments]))
        object.__setattr__(self, "_ends", np.array([s.t1 for s in self.segments]))
        if self.v_initial is None:
            v0 = self.segments[0].v0 - sum(k.dv for k in self.kicks if k.time == self.segments[0].t0)
            object.__setattr__(self, "v_initial", v0)

    @property
    def t_start(self) -> float:
        return self.segments[0].t0

    @property
    def t_end(self) -> float:
        return self.segments[-1].t1

    @property
    def breakpoints(self) -> list[float]:
        return [s.t0 for s in self.segments] + [self.t_end]

    @property
    def ballistic(self) -> bool:
        """True when no trap acts, so the path is free fall plus kicks."""
        return all(s.kind == "ballistic" for s in self.segments)

    def _index(self, t, side: str = "right"):
        if side == "right":
            idx = np.searchsorted(self._starts, t, side="right") - 1
        else:
            idx = np.searchsorted(self._ends, t, side="left")
        n = len(self.segments) - 1
        if np.ndim(idx) == 0:
            return min(max(int(idx), 0), n)
        return np.clip(idx, 0, n)

    def state(self, t, side: str = "right"):
        """(z, zdot) at t; side='left' gives the pre-kick velocity at event times."""
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t_start - 1e-15) or np.any(t > self.t_end + 1e-15):
            raise ValidationError(f"time outside trajectory domain [{self.t_start}, {self.t_end}]")
        idx = self._index(t, side)
        if t.ndim == 0:
            return self.segments[int(idx)].eval(t)
        z = np.empty_like(t)
        v = np.empty_like(t)
        for i in np.unique(idx):
            mask = idx == i
            z[mask], v[mask] = self.segments[int(i)].eval(t[mask])
        return z, v

    def z(self, t):
        return self.state(t)[0]

    def v(self, t, side: str = "right"):
        if side == "final":
            return self.v_final
        return self.state(t, side)[1]

    def zeta(self, t):
        t = np.asarray(t, dtype=float)
        idx = self._index(t)
        if t.ndim == 0:
            return self.segments[int(idx)].zeta(t)
        out = np.empty_like(t)
        for i in np.unique(idx):
            mask = idx == i
            out[mask] = self.segments[int(i)].zeta(t[mask])
        return out


# ---------------------------------------------------------------- timelines

@dataclass(frozen=True)
class PulseTimeline:
    """Events and initial conditions of one branch.

    z0=None starts the atom at rest in the trap minimum zeta(t_start) - g/Gamma^2.
    """

    t_start: float
    t_end: float
    z0: float | None = 0.0
    v0: float = 0.0
    events: tuple[PulseEvent, ...] = ()
    trap: TrapSpec | None = None
    center: Center | None = None
    trap_initially_on: bool = False
    coalesce: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.t_start) and math.isfinite(self.t_end)):
            raise ValidationError("timeline: non-finite horizon")
        if self.t_end < self.t_start:
            raise ValidationError("timeline: t_end must be >= t_start")
        times = [e.time for e in self.events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValidationError("timeline: events must be time-ordered")
        for e in self.events:
            if e.time < self.t_start or e.time > self.t_end:
                raise ValidationError(f"timeline: event at t={e.time} outside [{self.t_start}, {self.t_end}]")
            if e.kind in ("trap_on", "trap_off") and self.trap is None:
                raise ValidationError("timeline: trap event without trap spec")
        if self.trap_initially_on and self.trap is None:
            raise ValidationError("timeline: trap_initially_on without trap spec")
        if (self.trap is not None) and self.center is None:
            object.__setattr__(self, "center", PiecewiseLinearCenter.constant(0.0))
        if self.z0 is None and not self.trap_initially_on:
            raise ValidationError("timeline: z0=None requires the trap to be on initially")
        if not self.coalesce:
            kick_times = [e.time for e in self.events if e.is_kick]
            dup = sorted({t for t in kick_times if kick_times.count(t) > 1})
            if dup:
                raise ValidationError(
                    f"timeline: simultaneous kicks at t={dup}; set coalesce to sum them")


def _trap_segment(t0, t1, z, v, g, gamma, center: Center, mode: str, order: int, tol: float) -> Segment:
    if gamma <= 0:
        raise ValidationError("trap: gamma must be > 0 (use ballistic segments instead)")
    if mode == "expansion":
        return Segment(t0, t1, "trap_expansion", z, v, g, gamma, center=center, order=order, quad_tol=tol)
    if center.piecewise_linear:
        return Segment(t0, t1, "trap_exact", z, v, g, gamma,
                       c0=float(center(t0)), u=center.deriv(t0, 1), quad_tol=tol)
    return Segment(t0, t1, "trap_quad", z, v, g, gamma, center=center, quad_tol=tol)


def solve_timeline(tl: PulseTimeline, g: float, m: float, trap_mode: str = "exact",
                   order: int = 3, quad_tol: float | None = None, label: str = "") -> BranchTrajectory:
    """Piecewise closed-form trajectory of a branch."""
    tol = quad_tol_default() if quad_tol is None else quad_tol
    trap_on = tl.trap_initially_on
    gamma = tl.trap.gamma if tl.trap is not None else 0.0
    if tl.z0 is None:
        if gamma <= 0:
            raise ValidationError("timeline: trap minimum undefined for gamma = 0")
        z = float(tl.center(tl.t_start)) - g / gamma ** 2
    else:
        z = float(tl.z0)
    v = float(tl.v0)

    cuts = {tl.t_start, tl.t_end}
    cuts.update(e.time for e in tl.events)
    if tl.center is not None and tl.center.piecewise_linear and trap_mode != "expansion":
        cuts.update(t for t in tl.center.knots if tl.t_start < t < tl.t_end)
    cuts = sorted(cuts)

    by_time: dict[float, list[PulseEvent]] = {}
    for e in tl.events:
        by_time.setdefault(e.time, []).append(e)

    segments: list[Segment] = []
    kicks: list[KickRecord] = []

    def apply(t):
        nonlocal v, trap_on
        for e in by_time.get(t, ()):
            if e.is_kick:
                dv = e.velocity_jump(m)
                v += dv
                kicks.append(KickRecord(t, dv, m * dv, e.kind, e.state_dependent, e.laser_phase))
            elif e.kind == "trap_on":
                trap_on = True
            elif e.kind == "trap_off":
                trap_on = False

    for t0, t1 in zip(cuts[:-1], cuts[1:]):
        apply(t0)
        if trap_on:
            seg = _trap_segment(t0, t1, z, v, g, gamma, tl.center, trap_mode, order, tol)
        else:
            seg = Segment(t0, t1, "ballistic", z, v, g, quad_tol=tol)
        segments.append(seg)
        z, v = (float(x) for x in seg.eval(t1))
    if not segments:  # zero duration
        apply(tl.t_start)
        seg = Segment(tl.t_start, tl.t_end, "ballistic", z, v, g, quad_tol=tol)
        segments.append(seg)
    else:
        apply(tl.t_end)
    marks = tuple(e for e in tl.events if e.kind in ("state_flip", "clock_init"))
    return BranchTrajectory(tuple(segments), tuple(kicks), v, label, marks)


def solve_ballistic(z0: float, v0: float, kicks: Sequence[PulseEvent], g: float, horizon: float,
                    m: float = 1.0, t_start: float = 0.0, coalesce: bool = False) -> BranchTrajectory:
    """Free fall with instantaneous kicks on [t_start, horizon]."""
    for e in kicks:
        if not e.is_kick:
            raise ValidationError("solve_ballistic: only kick events allowed")
    tl = PulseTimeline(t_start, horizon, z0, v0, tuple(kicks), coalesce=coalesce)
    return solve_timeline(tl, g, m)


def solve_trap_exact(center: Center, gamma: float, g: float, t_end: float, t_start: float = 0.0,
                     quad_tol: float | None = None) -> BranchTrajectory:
    """Atom starting at rest in the trap minimum; exact for piecewise-linear centers."""
    if gamma <= 0:
        raise ValidationError("trap: gamma must be > 0 (use solve_ballistic instead)")
    tl = PulseTimeline(t_start, t_end, None, 0.0, (), TrapSpec(gamma), center, True)
    return solve_timeline(tl, g, 1.0, "exact", quad_tol=quad_tol)


def solve_trap_expansion(center: Center, gamma: float, g: float, order: int, t_end: float,
                         t_start: float = 0.0) -> BranchTrajectory:
    """Inverse-frequency expansion of the trapped trajectory up to Gamma^-order."""
    if order > 3 or order < 0:
        raise ValidationError("trap expansion: order must be 0..3")
    if gamma <= 0:
        raise ValidationError("trap: gamma must be > 0")
    if abs(float(center.deriv(t_start, 1))) > 0:
        raise ValidationError("trap expansion requires the center to start at rest")
    z0 = float(center(t_start)) - g / gamma ** 2
    seg = Segment(t_start, t_end, "trap_expansion", z0, 0.0, g, gamma, center=center, order=order)
    return BranchTrajectory((seg,), (), float(seg.eval(t_end)[1]))


# ---------------------------------------------------------------- ODE oracle

def integrate_ode_oracle(tl: PulseTimeline, g: float, m: float, rtol: float = 1e-12,
                         atol: float | None = None) -> BranchTrajectory:
    """Independent solution of the equation of motion with an adaptive integrator.

    Integrates between event/knot times with DOP853 and applies velocity jumps
    at events. Returns a trajectory backed by dense output.
    """
    if rtol > 1e-10:
        raise ValidationError("oracle: rtol must be <= 1e-10")
    gamma = tl.trap.gamma if tl.trap is not None else 0.0
    trap_on = tl.trap_initially_on
    if tl.z0 is None:
        z = float(tl.center(tl.t_start)) - g / gamma ** 2
    else:
        z = float(tl.z0)
    v = float(tl.v0)
    scale = max(abs(z), g / gamma ** 2 if gamma > 0 else 0.0, 1e-6)
    if atol is None:
        atol = rtol * scale

    cuts = {tl.t_start, tl.t_end}
    cuts.update(e.time for e in tl.events)
    if tl.center is not None:
        cuts.update(t for t in tl.center.knots if tl.t_start < t < tl.t_end)
    cuts = sorted(cuts)
    by_time: dict[float, list[PulseEvent]] = {}
    for e in tl.events:
        by_time.setdefault(e.time, []).append(e)

    segments: list[Segment] = []
    kicks: list[KickRecord] = []

    def apply(t):
        nonlocal v, trap_on
        for e in by_time.get(t, ()):
            if e.is_kick:
                dv = e.velocity_jump(m)
                v += dv
                kicks.append(KickRecord(t, dv, m * dv, e.kind, e.state_dependent, e.laser_phase))
            elif e.kind == "trap_on":
                trap_on = True
            elif e.kind == "trap_off":
                trap_on = False

    for t0, t1 in zip(cuts[:-1], cuts[1:]):
        apply(t0)
        G2 = gamma ** 2 if trap_on else 0.0
        ctr = tl.center

        def rhs(t, y, G2=G2, ctr=ctr):
            acc = -g
            if G2:
                acc -= G2 * (y[0] - float(ctr(t)))
            return [y[1], acc]

        max_step = (2 * math.pi / gamma) / 20 if (trap_on and gamma > 0) else np.inf
        sol = integrate.solve_ivp(rhs, (t0, t1), [z, v], method="DOP853", rtol=rtol,
                                  atol=[atol, atol * max(gamma, 1.0)], dense_output=True,
                                  max_step=max_step)
        if not sol.success:
            raise NumericalError(f"oracle integration failed after event at t={t0}: {sol.message}")
        kind = "ode"
        seg = Segment(t0, t1, kind, z, v, g, gamma if trap_on else 0.0,
                      center=ctr if trap_on else None, dense=sol.sol)
        segments.append(seg)
        z, v = float(sol.y[0, -1]), float(sol.y[1, -1])
    apply(tl.t_end)
    return BranchTrajectory(tuple(segments), tuple(kicks), v, "oracle")


# ---------------------------------------------------------------- pairs

@dataclass(frozen=True)
class BranchPairKinematics:
    """Mean and difference coordinates of an upper/lower branch pair.

    When neither branch is trapped, dz and its derivative are evaluated in the
    freely falling frame from the kick ledger, with kicks common to both arms
    cancelled exactly; dz is then independent of g bit for bit.
    """

    upper: BranchTrajectory
    lower: BranchTrajectory

    def __post_init__(self):
        free = self.upper.ballistic and self.lower.ballistic
        object.__setattr__(self, "free_frame", free)
        object.__setattr__(self, "_breakpoints",
                           sorted(set(self.upper.breakpoints) | set(self.lower.breakpoints)))
        if free:
            ku = [(k.time, k.dv) for k in self.upper.kicks]
            kl = [(k.time, k.dv) for k in self.lower.kicks]
            common = []
            for item in list(ku):
                if item in kl:
                    kl.remove(item)
                    ku.remove(item)
                    common.append(item)
            times = np.array([t for t, _ in ku] + [t for t, _ in kl])
            dvs = np.array([d for _, d in ku] + [-d for _, d in kl])
            object.__setattr__(self, "_ktimes", times)
            object.__setattr__(self, "_kdv", dvs)
            object.__setattr__(self, "_dz0", self.upper.segments[0].z0 - self.lower.segments[0].z0)
            object.__setattr__(self, "_dv0", self.upper.v_initial - self.lower.v_initial)

    def zbar(self, t):
        return 0.5 * (self.upper.z(t) + self.lower.z(t))

    def dz(self, t):
        if not self.free_frame:
            return self.upper.z(t) - self.lower.z(t)
        t = np.asarray(t, dtype=float)
        ts = self.upper.t_start
        lag = np.maximum(t[..., None] - self._ktimes, 0.0)
        return self._dz0 + self._dv0 * (t - ts) + np.sum(self._kdv * lag, axis=-1)

    def vbar(self, t, side: str = "right"):
        return 0.5 * (self.upper.v(t, side) + self.lower.v(t, side))

    def dv(self, t, side: str = "right"):
        if not self.free_frame:
            return self.upper.v(t, side) - self.lower.v(t, side)
        t = np.asarray(t, dtype=float)
        applied = (t[..., None] >= self._ktimes) if side == "right" else (t[..., None] > self._ktimes)
        return self._dv0 + np.sum(self._kdv * applied, axis=-1)

    def dv_final(self) -> float:
        if not self.free_frame:
            return self.upper.v_final - self.lower.v_final
        return float(self._dv0 + np.sum(self._kdv))

    def zetabar(self, t):
        return 0.5 * (self.upper.zeta(t) + self.lower.zeta(t))

    def dzeta(self, t):
        return self.upper.zeta(t) - self.lower.zeta(t)

    @property
    def breakpoints(self) -> list[float]:
        return self._breakpoints

    def reconstruct(self, t):
        zb, d = self.zbar(t), self.dz(t)
        return zb + d / 2, zb - d / 2


def pair_kinematics(upper: BranchTrajectory, lower: BranchTrajectory) -> BranchPairKinematics:
    if upper.t_start != lower.t_start or upper.t_end != lower.t_end:
        raise ValidationError(
            f"pair: mismatched domains [{upper.t_start}, {upper.t_end}] vs [{lower.t_start}, {lower.t_end}]")
    return BranchPairKinematics(upper, lower)
