import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from koblab import disc, geometry, kobayashi as K, models
from koblab.errors import NoAdmissibleDisc, OutOfChart, OutsideDisc, PinchNotCertified

P = models.poincare_disc()
E2 = models.euclidean(2)
inside = st.tuples(st.floats(-0.6, 0.6), st.floats(-0.6, 0.6))


# ----------------------------------------------------------------------------- closed forms

def test_poincare_metric_oracle():
    assert K.poincare_metric(0.5, 1.0) == pytest.approx(4.0 / 3.0)
    assert K.poincare_metric([0.0, 0.6], [3.0, 4.0]) == pytest.approx(5.0 / 0.64)


def test_poincare_distance_oracle():
    assert K.poincare_distance(0.0, 0.5) == pytest.approx(math.atanh(0.5))
    assert K.poincare_distance([0.3, 0.0], [0.3, 0.0]) == 0.0


def test_outside_disc_rejected():
    with pytest.raises(OutsideDisc):
        K.poincare_metric(1.0, 1.0)
    with pytest.raises(OutsideDisc):
        K.poincare_distance(0.0, [0.0, 1.5])


@given(inside, inside)
def test_poincare_distance_symmetric_and_moebius_invariant(a, b):
    z, w = complex(*a), complex(*b)
    assert K.poincare_distance(z, w) == pytest.approx(K.poincare_distance(w, z), abs=1e-12)
    c = 0.3 - 0.2j
    phi = lambda x: (x - c) / (1 - np.conj(c) * x)  # noqa: E731
    assert K.poincare_distance(phi(z), phi(w)) == pytest.approx(K.poincare_distance(z, w), abs=1e-9)


@given(inside, inside, inside)
def test_poincare_triangle_inequality(a, b, c):
    d = K.poincare_distance
    assert d(a, c) <= d(a, b) + d(b, c) + 1e-12


# ----------------------------------------------------------------------------- upper estimates

def test_upper_frozen_poincare():
    est = K.kobayashi_royden_upper(P, [0.3, -0.2], [1.0, 2.0], K.DiscBudget(N=33))
    assert est.upper == pytest.approx(2.616185019977821, rel=1e-6)
    assert est.radius == pytest.approx(2.4)
    assert est.certificate.startswith("plane0/")


def test_upper_is_homogeneous_exactly():
    budget = K.DiscBudget(N=33)
    cache = {}
    base = K.kobayashi_royden_upper(P, [0.1, 0.2], [1.0, 0.3], budget, cache).upper
    for a in (-2.0, 0.5, 3.0):
        est = K.kobayashi_royden_upper(P, [0.1, 0.2], [a, 0.3 * a], budget, cache)
        assert est.upper == pytest.approx(abs(a) * base, rel=1e-12)


@pytest.mark.parametrize("R", [1.0, 5.0, 20.0])
def test_euclidean_upper_is_inverse_radius(R):
    est = K.kobayashi_royden_upper(E2, [0.0, 0.0], [1.0, 0.0], K.DiscBudget(N=17, r_cap=R, n_radii=1))
    assert est.upper == pytest.approx(1.0 / R, rel=1e-9)


def test_upper_rejects_bad_vectors():
    with pytest.raises(ValueError):
        K.kobayashi_royden_upper(P, [0.0, 0.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        K.kobayashi_royden_upper(P, [0.0, 0.0], [1.0, 0.0, 0.0])
    with pytest.raises(OutOfChart):
        K.kobayashi_royden_upper(P, [1.5, 0.0], [1.0, 0.0])


def test_no_admissible_disc_carries_infinite_estimate():
    budget = K.DiscBudget(N=9, tol_c=1e-14, n_radii=2)
    with pytest.raises(NoAdmissibleDisc) as info:
        K.kobayashi_royden_upper(P, [0.0, 0.0], [1.0, 0.0], budget)
    est = info.value.estimate
    assert est.upper == math.inf and est.candidates == 2
    soft = K.kobayashi_royden_upper(P, [0.0, 0.0], [1.0, 0.0], budget, strict=False)
    assert soft.upper == math.inf


def test_estimate_serialisation():
    est = K.kobayashi_estimate(P, [0.0, 0.0], [1.0, 0.0], K.DiscBudget(N=17, n_radii=3), c=4.0)
    d = json.loads(est.to_json())
    assert d["upper"] == est.upper and d["lower"] == pytest.approx(1 / math.sqrt(2))
    assert "disc" not in d
    text = K.estimates_to_csv([est, est])
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["p1", "p2", "xi1", "xi2", "upper", "lower"]
    assert len(rows) == 3 and float(rows[1][4]) == est.upper


# ----------------------------------------------------------------------------- lower bounds

def test_lower_bound_on_poincare():
    assert K.kobayashi_royden_lower(P, [0.0, 0.0], [1.0, 0.0], 4.0) == pytest.approx(1 / math.sqrt(2), rel=1e-9)
    assert K.kobayashi_royden_lower(P, [0.0, 0.0], [0.0, 0.0], 4.0) == 0.0


def test_lower_bound_needs_certified_pinch():
    with pytest.raises(PinchNotCertified):
        K.kobayashi_royden_lower(E2, [0.0, 0.0], [1.0, 0.0], 1.0)
    with pytest.raises(PinchNotCertified):
        K.kobayashi_royden_lower(P, [0.0, 0.0], [1.0, 0.0], 5.0)
    with pytest.raises(ValueError):
        K.kobayashi_royden_lower(P, [0.0, 0.0], [1.0, 0.0], 0.0)


def test_hyperbolic_at_point():
    ok, lam = K.hyperbolic_at_point(P, [0.1, 0.1])
    assert ok and lam == pytest.approx(1 / math.sqrt(2), rel=1e-6)
    assert K.hyperbolic_at_point(E2, [0.0, 0.0]) == (None, None)


def test_schwarz_ratio_of_scaled_identity():
    g = disc.disc_grid(17)
    u = disc.DiscMap.from_function(g, P, lambda z: 0.5 * z)
    ok, ratio = K.schwarz_check(u, 4.0)
    assert ok and ratio == pytest.approx(0.125, rel=1e-9)


def test_schwarz_ratio_frozen_jet_disc():
    u, _ = disc.jet_disc(P, [0.0, 0.0], [1.0, 0.0], [0.0, 1.0], 1.0, N=33)
    ok, ratio = K.schwarz_check(u, 4.0)
    assert ok and ratio == pytest.approx(0.2900128292533907, rel=1e-6)


# ----------------------------------------------------------------------------- pseudodistances

def test_locate_in_disc_inverts_affine_disc():
    g = disc.disc_grid(17)
    u = disc.DiscMap.from_function(g, E2, lambda z: 2.0 * z + [1.0, 0.0])
    w = K.locate_in_disc(u, [1.6, -0.4])
    assert w == pytest.approx(0.3 - 0.2j, abs=1e-6)
    assert K.locate_in_disc(u, [5.0, 0.0]) is None


def test_chain_distance_zero_for_equal_points():
    res = K.chain_distance(P, [0.2, 0.1], [0.2, 0.1], K.ChainConfig(budget=K.DiscBudget(N=17)))
    assert res.value == 0.0


def test_integrated_distance_zero_for_equal_points():
    res = K.integrated_distance(P, [0.2, 0.1], [0.2, 0.1], K.PathConfig(budget=K.DiscBudget(N=17)))
    assert res.value == 0.0


@pytest.mark.slow
def test_chain_distance_frozen_euclidean():
    res = K.chain_distance(E2, [0.0, 0.0], [1.0, 0.0], K.ChainConfig(budget=K.DiscBudget(N=33, r_cap=2.0)))
    assert res.value == pytest.approx(0.50168, rel=1e-4)
    d = json.loads(res.to_json())
    assert d["value"] == res.value and d["chain"]


def test_decreasing_property_on_nested_balls():
    sub = geometry.ChartedMetric(2, geometry.Ball([0.0, 0.0], 0.7), P.g, P.dg, "poincare_r0.7")
    rep = K.decreasing_property_check(sub, P, [([0.1, 0.0], [1.0, 0.0])], K.DiscBudget(N=17, n_radii=8))
    assert rep.ok
    row = rep.rows[0]
    assert row["ambient"] <= row["sub"]
