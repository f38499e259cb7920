import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from koblab import disc, models, renormalize as Rn
from koblab.errors import ChartTooSmall, PreconditionFailed, WitnessInvalid

T2 = models.flat_torus(2)
E2 = models.euclidean(2)


# ----------------------------------------------------------------------------- Sibony

def test_sibony_identity_case():
    rep = Rn.sibony_verify(lambda z: np.abs(z) ** 2)
    assert rep.passed and rep.identity_equality and rep.laplacian_equality
    assert rep.laplacian_0 == pytest.approx(4.0, abs=1e-6)


def test_sibony_strict_case():
    rep = Rn.sibony_verify(lambda z: np.abs(z) ** 4, N=33)
    assert rep.passed and not rep.laplacian_equality and not rep.identity_equality
    assert rep.laplacian_0 == pytest.approx(0.0, abs=1e-5)


def test_sibony_flags_violation():
    rep = Rn.sibony_verify(lambda z: np.abs(z), N=33)
    assert not rep.passed and rep.violations
    assert rep.max_excess == pytest.approx(0.25, abs=1e-2)


@pytest.mark.parametrize("u", [
    lambda z: 2 * np.abs(z) ** 2,           # leaves [0, 1]
    lambda z: 0.5 + 0 * np.abs(z),          # nonzero at the origin
    lambda z: np.abs(z) ** 2 * (1 - np.abs(z) ** 2),  # log not subharmonic near the rim
])
def test_sibony_preconditions(u):
    with pytest.raises(PreconditionFailed):
        Rn.sibony_verify(u, N=33)


# ----------------------------------------------------------------------------- cut-off and family

def test_psi_values():
    assert np.allclose(Rn.psi(np.array([0.0, 0.25, 0.5, 0.75, 1.0, 4.0])), [0, 0.25, 0.5, 1, 1, 1])


@given(st.floats(0, 2), st.floats(0, 2))
def test_psi_nondecreasing(a, b):
    lo, hi = min(a, b), max(a, b)
    assert Rn.psi(lo) <= Rn.psi(hi) + 1e-15


def test_psi_cap_constant_far_away():
    Psi = Rn.psi_cap([0.0, 0.0], 0.5)
    assert Psi(np.array([[0.0, 0.0]]))[0] == 0.0
    assert Psi(np.array([[2.0, 0.0]]))[0] == pytest.approx(math.exp(0.5))
    assert Psi(np.array([[0.3, 0.0]]))[0] == pytest.approx(0.09 * math.exp(0.15))


def test_psi_cap_needs_room():
    with pytest.raises(ChartTooSmall):
        Rn.psi_cap([0.0, 0.0], 0.5, models.poincare_disc())
    Rn.psi_cap([0.0, 0.0], 0.5, models.poincare_disc(), scale=4.0)


def test_family_axioms():
    fam = Rn.psi_family(T2, 0.25)
    ax = fam.check_axioms([[1.0, 2.0]])
    assert ax["J_self"] == 0.0 and ax["decreasing"]
    assert ax["sups"][0] == pytest.approx(0.01051271096376028, rel=1e-9)
    assert fam.info["A"] == 0.5 and fam.c == 0.25
    assert fam.s(0.5) == pytest.approx(0.25)


def test_family_rejects_bad_constants():
    with pytest.raises(ValueError):
        Rn.SchwarzFamily(lambda a, b: 0, alpha_minus=0.6, alpha_plus=0.5)
    with pytest.raises(ValueError):
        Rn.SchwarzFamily(lambda a, b: 0, c=0.0)


def test_family_wraps_on_torus():
    fam = Rn.psi_family(T2, 0.25)
    near = fam.J(np.array([[0.1, 4.0]]), np.array([[7.9, 4.0]]))[0]
    assert near == pytest.approx(Rn.psi(0.04) * math.exp(0.5 * Rn.psi(0.2)))


# ----------------------------------------------------------------------------- MPSH

@pytest.fixture(scope="module")
def flat_discs():
    return Rn.stress_family(E2, [0.0, 0.0], 4, N=17)


def test_mpsh_separates_convex_from_concave(flat_discs):
    assert Rn.mpsh_test(lambda x: np.sum(x**2, -1), flat_discs, 1e-5)[0]
    assert not Rn.mpsh_test(lambda x: -np.sum(x**2, -1), flat_discs, 1e-5)[0]


def test_mpsh_passes_vacuously_at_minus_infinity():
    g = disc.disc_grid(9)
    u = disc.DiscMap.from_function(g, E2, lambda z: z + 0.05)
    ok, worst = Rn.mpsh_test(lambda x: np.full(x.shape[:-1], -np.inf), [u])
    assert ok and worst[0] == math.inf


def test_log_A_flat(flat_discs):
    assert Rn.find_log_A(E2, [0.0, 0.0], discs=flat_discs) == 0.25
    phi = Rn.log_mpsh_function(E2, [0.0, 0.0], 0.25)
    assert phi(np.array([[0.5, 0.0]]))[0] == pytest.approx(math.log(0.5) + 0.125)


def test_normal_radius_hyperbolic():
    r = Rn.log_normal_radius(models.hyperbolic_ball(2), [0.0, 0.0])
    assert r(np.array([[0.5, 0.0]]))[0] == pytest.approx(2 * math.atanh(0.5), rel=1e-6)


# ----------------------------------------------------------------------------- rescaling

def test_family_helpers():
    f = Rn.affine_family([1.0, 0.0], 3, base=[1.0, 1.0])
    assert np.allclose(f[2](np.array([0.5 + 0.5j])), [[2.5, 2.5]])
    r = Rn.radial_family(2)
    assert np.allclose(r[1](np.array([0.3j])), [[0.0, 0.2]])
    w = Rn.scheduled_witness(3, 0.6)
    assert [t for t, _ in w] == [0j] * 3
    assert np.allclose([k for _, k in w], [0.6, 0.3, 0.2])


def test_witness_errors():
    fam = Rn.psi_family(T2, 0.25)
    seq = Rn.affine_family([1.0, 0.0], 3)
    good = Rn.scheduled_witness(3)
    Rn.verify_witness(seq, fam, 0.1, good)
    with pytest.raises(WitnessInvalid):
        Rn.verify_witness(seq, fam, 0.1, good[:2])
    with pytest.raises(WitnessInvalid):
        Rn.verify_witness(seq, fam, 1.5, good)
    with pytest.raises(WitnessInvalid):
        Rn.verify_witness(seq, fam, 0.1, [(0.4 + 0j, 0.5 + 0j)] + good[1:])
    with pytest.raises(WitnessInvalid):
        Rn.verify_witness(seq, fam, 0.1, [good[0], good[0], good[2]])
    with pytest.raises(WitnessInvalid):
        Rn.verify_witness(seq, fam, 0.9, good)


def test_radial_family_has_no_valid_witness():
    P = models.poincare_disc()
    fam = Rn.psi_family(P, 0.25, scale=4.0)
    with pytest.raises(WitnessInvalid):
        Rn.zalcman_rescale(Rn.radial_family(8), fam, 0.1, Rn.scheduled_witness(8))


def test_sup_displacement_frozen():
    fam = Rn.psi_family(T2, 0.25)
    assert Rn.sup_displacement(Rn.affine_family([1.0, 0.0], 3), fam, 0.05) == pytest.approx(0.024252393394904252)


def test_torus_brody_frozen():
    res = Rn.brody_extract(Rn.affine_family([1.0, 0.0], 4), Rn.psi_family(T2, 0.25), 0.1,
                           target=T2, witness=Rn.scheduled_witness(4))
    seq = res.sequence
    assert res.verdict == Rn.NONCONSTANT
    assert seq.contractions_ok() and seq.kappa_decreasing() and seq.R_increasing()
    assert np.allclose(seq.R, [2.903316202301478, 6.306632404602956, 9.709948606904433, 13.113264809205912])
    assert res.J01 == pytest.approx(0.1, abs=1e-8)
    d = json.loads(res.to_json())
    assert d["verdict"] == Rn.NONCONSTANT and len(d["sequence"]["records"]) == 4


def test_brody_needs_target():
    with pytest.raises(ValueError):
        Rn.brody_extract(Rn.affine_family([1.0, 0.0], 2), Rn.psi_family(None, 0.25), 0.1)


def test_brody_inconclusive_without_witness():
    res = Rn.brody_extract(Rn.affine_family([1e-3, 0.0], 3), Rn.psi_family(T2, 0.25), 0.1, target=T2)
    assert res.verdict == Rn.INCONCLUSIVE and res.sequence is None
