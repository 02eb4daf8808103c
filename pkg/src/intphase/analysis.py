"""Observables built on the phase engine: differential phases, closed-form
references, the UGR/UFF classifier, interference signal and shot-noise sensitivity."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (LabEnvironment, PerturbativeWarning, ValidationError, ViolationModel,
                   WavePacketSpec)
from .geometry import ClosureReport, GeometrySpec, closure_check, solve_branches
from .phase import (PhaseBreakdown, UnsupportedConfiguration, member_phases, proper_time,
                    separation_integral, wavepacket_phase_clock, wavepacket_phase_interferometer)
from .trajectory import pair_kinematics

GOLD = "gold_standard_UGR"
ACCEL = "accelerational_redshift"
UFF = "UFF_null_test"
INSENSITIVE = "insensitive"
CLASSES = (GOLD, ACCEL, UFF, INSENSITIVE)

CLASSIFIER_TOL = 1e-6
GRID_G = (0.5, 1.0, 1.5)
GRID_ALPHA = (0.0, 1e-3, -1e-3)
GRID_DBETA = (0.0, 1e-12, -1e-12)
PHI0_CANCEL_TOL = 1e-15


class NoReference(UnsupportedConfiguration):
    """No closed-form reference exists for this geometry."""


# ---------------------------------------------------------------- simulation

@dataclass
class GeometryResult:
    name: str
    mode: str
    members: dict[str, PhaseBreakdown]
    differential: PhaseBreakdown
    reference: float | None
    classification: str | None
    classifier: dict = field(default_factory=dict)
    closure: ClosureReport | None = None
    proper_times: dict[str, float] = field(default_factory=dict)
    wavepacket: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def phi(self) -> float:
        return self.differential.total

    @property
    def residual(self) -> float | None:
        return None if self.reference is None else abs(self.phi - self.reference)

    @property
    def relative_residual(self) -> float | None:
        if self.reference is None:
            return None
        if self.reference == 0:
            return self.residual
        return self.residual / abs(self.reference)


def _members(spec: GeometrySpec, arms, quad_tol=None, cache=None) -> dict[str, PhaseBreakdown]:
    return member_phases(spec, arms, tol=quad_tol, cache=cache)


def _difference(spec: GeometrySpec, members: dict[str, PhaseBreakdown]) -> PhaseBreakdown:
    if spec.mode == "clock":
        return members["upper"] - members["lower"]
    a, b = spec.pairing
    d = members[a] - members[b]
    if abs(d.phi0) > PHI0_CANCEL_TOL:
        raise ValidationError(
            f"{spec.name}: unperturbed phase does not cancel between {a!r} and {b!r} "
            f"(difference {d.phi0:.3e} rad); inconsistent configuration")
    return d


def simulate(spec: GeometrySpec, quad_tol: float | None = None, oracle: bool = False,
             wavepacket: bool | WavePacketSpec = False, classify: bool = True,
             wavepacket_experimental: bool = False) -> GeometryResult:
    """Compute member phases, the differential phase, reference and classification."""
    notes: list[str] = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", PerturbativeWarning)
        arms = solve_branches(spec, oracle=oracle, quad_tol=quad_tol)
        members = _members(spec, arms, quad_tol)
        wp_info: dict = {}
        if wavepacket is not False:
            wp = wavepacket if isinstance(wavepacket, WavePacketSpec) else spec.wavepacket
            if spec.mode == "clock":
                res = wavepacket_phase_clock(spec, wp, experimental=wavepacket_experimental)
                wp_info = {"value": res.value, "valid": res.valid, "message": res.message}
                if res.message:
                    notes.append(res.message)
                # branch independent: the same value enters every member
                members = {k: v.replace(wp=v.wp + res.value) for k, v in members.items()}
            else:
                wp_info = {"value": wavepacket_phase_interferometer(spec), "valid": True, "message": ""}
        diff = _difference(spec, members)
        pair = pair_kinematics(*arms)
        closure = closure_check(spec, pair)
        if closure.applicable and not closure.closed:
            notes.append(f"geometry not closed: dz={closure.dz_final:.3e} m, dv={closure.dv_final:.3e} m/s")
        if spec.trap is not None and not spec.trap.validity_ok(spec.duration):
            notes.append("trap splitting dGamma is not << sqrt(Gamma/T); first-order trap terms unreliable")
        c = spec.species.constants.c
        taus = {"upper": proper_time(arms[0], spec.environment.g, c, quad_tol),
                "lower": proper_time(arms[1], spec.environment.g, c, quad_tol)}
        try:
            ref = closed_form_reference(spec)
        except NoReference as exc:
            ref = None
            notes.append(str(exc))
        cls, diag = (None, {})
        if classify:
            res = ugr_classifier(spec, quad_tol=quad_tol)
            cls, diag = res.label, res.diagnostics
    notes.extend(str(w.message) for w in caught if issubclass(w.category, PerturbativeWarning))
    return GeometryResult(spec.name, spec.mode, members, diff, ref, cls, diag, closure, taus, wp_info, notes)


def differential_phase(spec: GeometrySpec, pairing: str | None = None, quad_tol: float | None = None,
                       oracle: bool = False) -> float:
    """Phi = upper - lower (clock_upper_minus_lower) or b - a (state_b_minus_a)."""
    mode = {None: spec.mode, "clock_upper_minus_lower": "clock",
            "state_b_minus_a": "interferometer"}.get(pairing)
    if mode is None:
        raise ValidationError(f"differential_phase: unknown pairing {pairing!r}")
    if mode != spec.mode:
        spec = replace(spec, mode=mode)
    arms = solve_branches(spec, oracle=oracle, quad_tol=quad_tol)
    return _difference(spec, _members(spec, arms, quad_tol)).total


def doubly_differential(spec1: GeometrySpec, spec2: GeometrySpec, quad_tol: float | None = None) -> float:
    """Phi(t1) - Phi(t2) for two realizations differing only in the clock-init time."""
    t1, t2 = spec1.diagnostics.get("t_init"), spec2.diagnostics.get("t_init")
    if t1 is None or t2 is None or spec1.builder != spec2.builder:
        raise ValidationError("doubly_differential: needs two realizations of the same scheme")
    if not t2 > t1:
        raise ValidationError(f"doubly_differential: t2 must be > t1 (got t1={t1}, t2={t2})")
    return differential_phase(spec1, quad_tol=quad_tol) - differential_phase(spec2, quad_tol=quad_tol)


def dd_pair(spec: GeometrySpec) -> tuple[GeometrySpec, GeometrySpec]:
    """Both realizations (init at t1 and at t2) of a doubly differential scheme."""
    if spec.builder != "ai_doubly_differential":
        raise ValidationError("dd_pair: not a doubly differential geometry")
    return spec.rebuild(realization=1), spec.rebuild(realization=2)


# ---------------------------------------------------------------- closed forms

def _coupling(spec: GeometrySpec) -> tuple[float, float, float]:
    """(dm/hbar, m dbeta/hbar, hbar) so that Omega(1+alpha)/c^2 = dm/hbar + m dbeta/hbar."""
    sp = spec.species
    hb = sp.constants.hbar
    return sp.dm / hb, sp.m * spec.violation.delta_beta / hb, hb


def _ref_clock_static(spec):
    p, g = spec.params, spec.environment.g
    kd, kb, _ = _coupling(spec)
    return -(kd + kb) * g * p["dzeta0"] * p["T"]


def _ref_clock_free_fall(spec):
    p, g = spec.params, spec.environment.g
    kd, kb, _ = _coupling(spec)
    return -(kd + kb) * g * p["dzeta0"] * p["T"]


def _ref_guided(spec):
    p, g = spec.params, spec.environment.g
    kd, kb, _ = _coupling(spec)
    return -(kd + kb) * g * 2 * p["v"] * p["T"] * (p["T"] + p["Tp"])


def _ref_mach_zehnder(spec):
    p, g = spec.params, spec.environment.g
    kd, kb, _ = _coupling(spec)
    area = spec.reference_separation * p["T"]
    if p.get("velocity_transfer"):
        return -(kd + kb) * g * area
    return -kb * g * area


def _ref_levitated(spec):
    p, g = spec.params, spec.environment.g
    kd, kb, _ = _coupling(spec)
    dz0, T, N = spec.reference_separation, p["T"], p["N"]
    a = spec.diagnostics["a"]
    tc = spec.diagnostics["t_close"]
    return -(kd * a * N * T + kb * g * tc) * dz0


def _ref_doubly_differential(spec):
    p, g = spec.params, spec.environment.g
    kd, kb, _ = _coupling(spec)
    T = p["T"]
    dz0 = spec.reference_separation
    dv = dz0 / T
    tc, ti = spec.diagnostics["t_close"], spec.diagnostics["t_init"]
    ugr = (kd + kb) * g * dz0 * (tc - ti + T / 2)
    kinetic = kd * dv * ((p["v0"] + dv / 2 - g * tc) * T - g * T * T / 2)
    return -(ugr + kinetic)


def _sym_members(spec):
    p, g = spec.params, spec.environment.g
    kd, kb, _ = _coupling(spec)
    k, T, Tp = p["k"], p["T"], p["Tp"]
    ugr = -(kd + kb) * spec.reference_separation * g * Tp
    uff = -2 * k * g * T * (T + Tp)
    vi = spec.violation
    return {"b": (uff, ugr + uff * vi.beta_a), "a": (uff, -ugr + uff * vi.beta_b)}


def _ref_symmetric(spec):
    m = _sym_members(spec)
    # phi0 is common to both members; subtract the perturbations only
    return m["b"][1] - m["a"][1]


REFERENCES = {
    "clock_static": _ref_clock_static,
    "clock_free_fall": _ref_clock_free_fall,
    "clock_guided": _ref_guided,
    "ai_guided": _ref_guided,
    "ai_mach_zehnder": _ref_mach_zehnder,
    "ai_levitated": _ref_levitated,
    "ai_doubly_differential": _ref_doubly_differential,
    "ai_symmetric_transitions": _ref_symmetric,
}


def closed_form_reference(spec: GeometrySpec) -> float:
    """Analytic differential phase (rad) of a catalog geometry."""
    fn = REFERENCES.get(spec.builder or "")
    if fn is None:
        raise NoReference(f"{spec.name}: no closed-form reference for custom geometries")
    return float(fn(spec))


def closed_form_members(spec: GeometrySpec) -> dict[str, tuple[float, float]]:
    """Per-state (phi0, phi - phi0) references for the Mach-Zehnder and symmetric schemes."""
    if spec.builder == "ai_mach_zehnder" and not spec.params.get("velocity_transfer"):
        p, g = spec.params, spec.environment.g
        base = -p["k"] * g * p["T"] ** 2
        return {"b": (base, base * spec.violation.beta_b), "a": (base, base * spec.violation.beta_a)}
    if spec.builder == "ai_symmetric_transitions":
        return _sym_members(spec)
    raise NoReference(f"{spec.name}: no per-state closed form")


def doubly_differential_reference(spec1: GeometrySpec, spec2: GeometrySpec) -> float:
    """-Omega(1+alpha) dz0 g (t2 - t1)/c^2."""
    kd, kb, _ = _coupling(spec1)
    t1, t2 = spec1.diagnostics["t_init"], spec2.diagnostics["t_init"]
    return -(kd + kb) * spec1.reference_separation * spec1.environment.g * (t2 - t1)


# ---------------------------------------------------------------- classifier

@dataclass(frozen=True)
class Classification:
    label: str
    diagnostics: dict


def _observable(spec: GeometrySpec, quad_tol) -> tuple[callable, tuple[float, float], bool, dict]:
    """Observable Phi(spec) used by the classifier, its window, and notes."""
    notes: dict = {}
    if spec.builder == "ai_doubly_differential":
        s1, s2 = dd_pair(spec)
        window = (s1.diagnostics["t_init"], s2.diagnostics["t_init"])

        def obs(sp_g, vi, cache):
            a = sp_g.rebuild(realization=1, violation=vi)
            b = sp_g.rebuild(realization=2, violation=vi)
            return doubly_differential(a, b, quad_tol)
        notes["observable"] = "Phi(t1) - Phi(t2)"
        return obs, window, False, notes
    if spec.builder == "ai_symmetric_transitions":
        T, Tp = spec.params["T"], spec.params["Tp"]
        notes["observable"] = "phi_b - phi0 - UFF_b"
        notes["uff_term_beta"] = "beta_a (state occupied in the outer segments of component b)"

        def obs(sp_g, vi, cache, arms):
            s = replace(sp_g, violation=vi)
            mem = _members(s, arms, quad_tol, cache)["b"]
            uff = -2 * s.params["k"] * s.environment.g * T * (T + Tp) * vi.beta_a
            return mem.perturbation - uff
        return obs, (T, T + Tp), False, notes
    window, defaulted = spec.redshift_window()

    def obs(sp_g, vi, cache, arms):
        s = replace(sp_g, violation=vi)
        return _difference(s, _members(s, arms, quad_tol, cache)).total
    if spec.builder == "ai_levitated":
        notes["window_note"] = "full sequence: the accelerational template integrates dz over [0, t_f]"
    return obs, window, defaulted, notes


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(b))), float(np.max(np.abs(a))))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(a - b))) / scale


def ugr_classifier(spec: GeometrySpec, tol: float = CLASSIFIER_TOL, quad_tol: float | None = None,
                   g_factors=GRID_G, alphas=GRID_ALPHA, dbetas=GRID_DBETA) -> Classification:
    """Classify the observable as gold-standard UGR test, accelerational redshift,
    UFF null test or insensitive, by fitting templates on a (g, alpha) grid."""
    sp = spec.species
    g0 = spec.environment.g
    if g0 == 0:
        g0 = LabEnvironment().g
    beta_a = spec.violation.beta_a
    use_alpha = sp.dm > 0
    obs, window, defaulted, diag = _observable(spec, quad_tol)
    diag = dict(diag)
    diag["window"] = list(window)
    diag["window_defaulted"] = defaulted
    axis = alphas if use_alpha else dbetas
    diag["parameter"] = "alpha" if use_alpha else "delta_beta"
    phis = np.zeros((len(g_factors), len(axis)))
    areas = np.zeros(len(g_factors))
    gs = np.array([f * g0 for f in g_factors])
    for i, g in enumerate(gs):
        spec_g = spec.rebuild(environment=LabEnvironment(float(g)))
        arms = solve_branches(spec_g, quad_tol=quad_tol)
        pair = pair_kinematics(*arms)
        areas[i] = separation_integral(pair, window[0], window[1], quad_tol)
        cache: dict = {}
        for j, x in enumerate(axis):
            vi = (ViolationModel.from_alpha(x, sp, beta_a) if use_alpha
                  else ViolationModel(beta_a, beta_a + x))
            if spec.builder == "ai_doubly_differential":
                phis[i, j] = obs(spec_g, vi, cache)
            else:
                phis[i, j] = obs(spec_g, vi, cache, arms)
    diag["g"] = gs.tolist()
    diag[diag["parameter"]] = list(axis)
    diag["phi"] = phis.tolist()
    diag["template_integral"] = areas.tolist()
    x = np.asarray(axis)[None, :]
    zero = int(np.argmin(np.abs(axis)))
    base = phis[:, zero:zero + 1]
    variation = float(np.max(np.abs(phis - base)))
    scale = float(np.max(np.abs(phis)))
    sensitive = scale > 0 and variation > tol * scale
    matched = []
    if not sensitive:
        label = INSENSITIVE
        matched.append(INSENSITIVE)
    else:
        null = float(np.max(np.abs(base))) <= tol * variation
        if use_alpha:
            kd = sp.dm / sp.constants.hbar
            gold = -kd * (1 + x) * gs[:, None] * areas[:, None]
            diag["residual_gold"] = _rel(phis, gold)
            if diag["residual_gold"] <= tol:
                matched.append(GOLD)
            with np.errstate(divide="ignore", invalid="ignore"):
                a_eff = np.where(areas != 0, -base[:, 0] / (kd * areas), np.nan)
            if np.all(np.isfinite(a_eff)):
                accel = -kd * (a_eff[:, None] + x * gs[:, None]) * areas[:, None]
                diag["a_eff_over_g"] = (a_eff / gs).tolist()
                diag["residual_accelerational"] = _rel(phis, accel)
                ratio = a_eff / gs
                distinct = np.all(np.abs(ratio - 1) > tol) and np.all(np.abs(ratio) > tol)
                if diag["residual_accelerational"] <= tol and distinct:
                    matched.append(ACCEL)
        if null:
            matched.append(UFF)
        label = next((c for c in (GOLD, ACCEL, UFF) if c in matched), INSENSITIVE)
        if not matched:
            diag["unmatched"] = True
    diag["matched"] = matched
    if len([m for m in matched if m != INSENSITIVE]) > 1:
        diag["ambiguous"] = matched
    return Classification(label, diag)


# ---------------------------------------------------------------- signal and sensitivity

def interference_signal(phi, contrast: float = 1.0):
    """I = (1 + C cos phi)/2."""
    if not (0.0 <= contrast <= 1.0):
        raise ValidationError(f"contrast must lie in [0, 1] (got {contrast!r})")
    return 0.5 * (1.0 + contrast * np.cos(phi))


@dataclass(frozen=True)
class SensitivityInputs:
    n_at: float
    T_av: float
    t_cyc: float
    t_red: float
    dz0: float
    omega: float
    g: float

    def __post_init__(self):
        for name in ("n_at", "T_av", "t_cyc", "t_red", "dz0", "omega", "g"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValidationError(f"sensitivity.{name}: must be > 0 (got {v!r})")


CLOCK_BENCHMARKS = (2.5e-5, 9e-5)


def sensitivity(inp: SensitivityInputs, c: float = 299792458.0) -> float:
    """Shot-noise limited uncertainty of alpha."""
    return 1.0 / (math.sqrt(inp.n_at) * inp.omega * math.sqrt(inp.t_red ** 2 * inp.T_av / inp.t_cyc)
                  * inp.g * inp.dz0 / c ** 2)


def sensitivity_report(inp: SensitivityInputs, c: float = 299792458.0) -> dict:
    da = sensitivity(inp, c)
    return {
        "inputs": {k: getattr(inp, k) for k in ("n_at", "T_av", "t_cyc", "t_red", "dz0", "omega", "g")},
        "delta_alpha": da,
        "scaling": "delta_alpha ~ 1/(dz0 sqrt(t_red)) when t_cyc ~ t_red",
        "clock_benchmarks": [{"delta_alpha": b, "ratio": da / b} for b in CLOCK_BENCHMARKS],
    }
