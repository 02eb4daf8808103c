import math
import warnings

import pytest

from intphase.core import (AMU, InvalidParametrization, PerturbativeWarning, TrapSpec, ValidationError,
                           ViolationModel, WavePacketSpec, AtomSpecies, make_species, strontium88,
                           violation_alpha, PhysicalConstants)


def test_strontium_numbers(sr):
    assert sr.m == pytest.approx(87.9056 * AMU, rel=1e-15)
    assert sr.m == pytest.approx(1.4597068297291298e-25, rel=1e-14)
    assert sr.dm == pytest.approx(3.162801349977742e-36, rel=1e-14)
    assert sr.clock_frequency == pytest.approx(2 * math.pi * 429e12, rel=1e-14)
    assert sr.ratio == pytest.approx(2.1667e-11, rel=1e-3)


def test_species_validation():
    with pytest.raises(ValidationError, match="mass"):
        AtomSpecies(-1.0, 0.0)
    with pytest.raises(ValidationError):
        make_species(1e-25, -1.0)
    with pytest.raises(ValidationError):
        AtomSpecies(float("nan"), 0.0)


def test_large_mass_defect_warns():
    with pytest.warns(PerturbativeWarning):
        AtomSpecies(1.0, 1e-3)


def test_constants_positive():
    with pytest.raises(ValidationError):
        PhysicalConstants(c=0.0)


def test_violation_alpha_round_trip(sr):
    vi = ViolationModel.from_alpha(1e-3, sr, beta_a=2e-10)
    assert vi.beta_a == 2e-10
    assert violation_alpha(vi, sr) == pytest.approx(1e-3, rel=1e-9)
    assert vi.beta(+1) == vi.beta_b and vi.beta(-1) == vi.beta_a


def test_alpha_undefined_without_mass_defect():
    sp = AtomSpecies(1e-25, 0.0)
    with pytest.raises(InvalidParametrization):
        violation_alpha(ViolationModel(0.0, 1e-10), sp)


def test_beta_bound():
    with pytest.raises(ValidationError, match="beta_b"):
        ViolationModel(0.0, 0.5)


def test_trap_validity_threshold():
    G, T = 2 * math.pi * 100, 1.0
    thr = math.sqrt(G / T)
    assert TrapSpec(G, (0.99 * thr) ** 2).validity_ok(T)
    assert not TrapSpec(G, G / T).validity_ok(T)
    assert not TrapSpec(G, (1.01 * thr) ** 2).validity_ok(T)
    assert TrapSpec(G).validity_ok(T)


def test_trap_state_frequencies():
    tr = TrapSpec(10.0, 8.0)
    assert tr.gamma_state(1) ** 2 - tr.gamma_state(-1) ** 2 == pytest.approx(8.0)
    with pytest.raises(ValidationError):
        TrapSpec(1.0, 5.0)


def test_wavepacket_heisenberg(sr):
    gs = WavePacketSpec.ground_state(sr.m, 100.0)
    assert gs.var_z0 * gs.var_p0 == pytest.approx(gs.hbar ** 2 / 4, rel=1e-12)
    with pytest.raises(ValidationError, match="Heisenberg"):
        WavePacketSpec(gs.var_z0 / 10, gs.var_p0)
    with pytest.raises(ValidationError, match="cross"):
        WavePacketSpec(gs.var_z0, gs.var_p0, cross_zp=1e-40)


def test_no_warning_for_strontium():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        strontium88()
