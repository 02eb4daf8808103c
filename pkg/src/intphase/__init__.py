"""Perturbative phases of atomic clocks and quantum-clock interferometers in gravity,
with tools to classify geometries as redshift (UGR) or free-fall (UFF) tests."""
from .core import (AtomSpecies, IntphaseError, InvalidParametrization, LabEnvironment, NumericalError,
                   PerturbativeWarning, PhysicalConstants, TrapSpec, ValidationError, ViolationModel,
                   WavePacketSpec, make_species, strontium88, violation_alpha)
from .geometry import (BUILDERS, DslEvent, GeometrySpec, StateProgram, build_ai_doubly_differential,
                       build_ai_guided, build_ai_levitated, build_ai_mach_zehnder,
                       build_ai_symmetric_transitions, build_clock_free_fall, build_clock_guided,
                       build_clock_static, build_custom, closure_check)
from .phase import (PhaseBreakdown, UnsupportedConfiguration, phase_boundary, phase_dynamical,
                    proper_time, wavepacket_phase_clock, wavepacket_phase_interferometer)
from .analysis import (GeometryResult, SensitivityInputs, closed_form_reference, differential_phase,
                       doubly_differential, interference_signal, sensitivity, simulate, ugr_classifier)

__version__ = "0.1.0"

__all__ = [
    "AtomSpecies",
    "IntphaseError",
    "InvalidParametrization",
    "LabEnvironment",
    "NumericalError",
    "PerturbativeWarning",
    "PhysicalConstants",
    "TrapSpec",
    "ValidationError",
    "ViolationModel",
    "WavePacketSpec",
    "make_species",
    "strontium88",
    "violation_alpha",
    "BUILDERS",
    "DslEvent",
    "GeometrySpec",
    "StateProgram",
    "build_ai_doubly_differential",
    "build_ai_guided",
    "build_ai_levitated",
    "build_ai_mach_zehnder",
    "build_ai_symmetric_transitions",
    "build_clock_free_fall",
    "build_clock_guided",
    "build_clock_static",
    "build_custom",
    "closure_check",
    "PhaseBreakdown",
    "UnsupportedConfiguration",
    "phase_boundary",
    "phase_dynamical",
    "proper_time",
    "wavepacket_phase_clock",
    "wavepacket_phase_interferometer",
    "GeometryResult",
    "SensitivityInputs",
    "closed_form_reference",
    "differential_phase",
    "doubly_differential",
    "interference_signal",
    "sensitivity",
    "simulate",
    "ugr_classifier",
]
