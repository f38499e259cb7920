import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from koblab import geometry as G
from koblab import models
from koblab.errors import DegeneratePlane, LeftChart, NonpositiveScale, OutOfChart, SingularMetric, SpecError

coords = st.floats(-0.5, 0.5)
small = st.floats(-0.6, 0.6)


# ----------------------------------------------------------------------------- oracles

def test_poincare_curvature_is_minus_four():
    K = G.sectional_curvature(models.poincare_disc(), [0.3, -0.2], [1, 0], [0, 1])
    assert K == pytest.approx(-4.0, abs=1e-6)


@pytest.mark.parametrize("n", [2, 3])
def test_hyperbolic_ball_curvature(n):
    scan = G.curvature_bounds_scan(models.hyperbolic_ball(n), 30, rng_seed=1)
    assert scan.k_min == pytest.approx(-1.0, abs=1e-5)
    assert scan.k_max == pytest.approx(-1.0, abs=1e-5)


def test_flat_models_have_zero_curvature():
    for m in (models.euclidean(3), models.flat_torus(2)):
        k_min, k_max = G.curvature_bounds_scan(m, 20)
        assert abs(k_min) <= 1e-12 and abs(k_max) <= 1e-12


def test_warped_sinh_is_hyperbolic():
    m = models.warped_product("sinh(x1)")
    assert G.sectional_curvature(m, [1.0, 0.5], [1, 0], [0, 1]) == pytest.approx(-1.0, abs=1e-4)


def test_christoffel_vanish_at_centre_of_conformal_ball():
    assert np.allclose(G.christoffel(models.poincare_disc(), [0.0, 0.0]), 0.0)


def test_christoffel_frozen_value():
    # Poincare disc at (0.5, 0): Gamma^1_11 = 2x/(1-x^2) = 4/3
    gam = G.christoffel(models.poincare_disc(), [0.5, 0.0])
    assert gam[0, 0, 0] == pytest.approx(4.0 / 3.0, rel=1e-10)
    assert gam[1, 0, 1] == pytest.approx(4.0 / 3.0, rel=1e-10)
    assert gam[0, 1, 1] == pytest.approx(-4.0 / 3.0, rel=1e-10)


def test_riemann_symmetries():
    R = G.riemann(models.hyperbolic_ball(3), [0.1, -0.2, 0.3])
    assert np.allclose(R, -np.swapaxes(R, 0, 1), atol=1e-8)
    assert np.allclose(R, -np.swapaxes(R, 2, 3), atol=1e-8)
    assert np.allclose(R, np.transpose(R, (2, 3, 0, 1)), atol=1e-8)


def test_curvature_report_sectional_matches():
    m = models.hyperbolic_ball(3)
    rep = G.curvature_report(m, [0.1, 0.0, 0.2])
    assert rep.sectional([1, 0, 0], [0, 1, 1]) == pytest.approx(-1.0, abs=1e-5)


def test_degenerate_plane_rejected():
    with pytest.raises(DegeneratePlane):
        G.sectional_curvature(models.poincare_disc(), [0, 0], [1, 1], [2, 2])


def test_point_outside_chart_rejected():
    with pytest.raises(OutOfChart):
        G.christoffel(models.poincare_disc(), [1.2, 0.0])


def test_singular_metric_detected():
    m = models.expression_metric([["x1^2", "0"], [None, "1"]], 2, G.Box([-1, -1], [1, 1]))
    with pytest.raises(SingularMetric):
        G.christoffel(m, [0.0, 0.0])


@given(coords, coords, st.floats(0.1, 5.0), st.floats(0.1, 5.0))
def test_sectional_invariant_under_plane_rescaling(x, y, a, b):
    m = models.poincare_disc()
    assert G.sectional_curvature(m, [x, y], [a, 0.3], [0.2, b]) == pytest.approx(-4.0, abs=1e-4)


# ----------------------------------------------------------------------------- geodesics

def test_poincare_exp_from_origin():
    v = np.array([0.8, -0.6]) * 1.3
    x = G.geodesic_exp(models.poincare_disc(), [0.0, 0.0], v)
    assert np.allclose(x, math.tanh(1.3) * v / 1.3, atol=1e-10)


def test_hyperbolic_exp_from_origin():
    # |v|_g = 2|v| at the origin, d(0, x) = 2 artanh |x|
    v = np.array([0.0, 1.0])
    x = G.geodesic_exp(models.hyperbolic_ball(2), [0.0, 0.0], v)
    assert np.allclose(x, [0.0, math.tanh(1.0)], atol=1e-10)


def test_geodesic_path_endpoints():
    m = models.poincare_disc()
    xs, us = G.geodesic_path(m, [0.1, 0.2], [0.3, 0.1], steps=64)
    assert np.allclose(xs[0], [0.1, 0.2])
    assert np.allclose(xs[-1], G.geodesic_exp(m, [0.1, 0.2], [0.3, 0.1], steps=64))
    speed = np.sqrt(np.einsum("ki,kij,kj->k", us, m.metric(xs), us))
    assert np.ptp(speed) <= 1e-8


def test_geodesic_leaving_chart_raises():
    with pytest.raises(LeftChart):
        G.geodesic_exp(models.euclidean(2, half_width=1.0), [0.0, 0.0], [5.0, 0.0])


def test_reach_of_euclidean_box():
    t = G.geodesic_reach(models.euclidean(2, half_width=1.0), np.zeros((1, 2)), np.array([[4.0, 0.0]]), steps=64)
    assert t[0] == pytest.approx(0.25, abs=1 / 64)


@settings(max_examples=8)
@given(small, small, st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_log_inverts_exp(x, y, a, b):
    m = models.poincare_disc()
    p = np.array([x, y]) * 0.8
    v = np.array([a, b])
    q = G.geodesic_exp(m, p, v)
    assert np.allclose(G.geodesic_log(m, p, q), v, atol=1e-8)


def test_log_batch_matches_pointwise():
    m = models.hyperbolic_ball(2)
    p = np.array([0.2, -0.1])
    Q = np.array([[0.3, 0.3], [-0.4, 0.1], [0.0, -0.5]])
    batch = G.geodesic_log(m, p, Q)
    single = np.array([G.geodesic_log(m, p, q) for q in Q])
    assert np.allclose(batch, single, atol=1e-9)


def test_log_wraps_on_torus():
    m = models.flat_torus(2, 8.0)
    v = G.geodesic_log(m, [0.5, 4.0], [7.5, 4.0])
    assert np.allclose(v, [-1.0, 0.0], atol=1e-10)


def test_orthonormal_frame():
    m = models.hyperbolic_ball(3)
    F = G.orthonormal_frame(m, [0.2, 0.1, -0.3])
    assert np.allclose(F.T @ m.metric([0.2, 0.1, -0.3]) @ F, np.eye(3))


# ----------------------------------------------------------------------------- pullbacks and norms

def test_pullback_is_identity_at_origin():
    hp = G.pullback_exp_metric(models.hyperbolic_ball(2), [0.3, 0.2], 1.0, orthonormal=True, steps=64)
    assert np.allclose(hp.metric(np.zeros(2)), np.eye(2), atol=1e-8)


def test_pullback_matches_hyperbolic_normal_coordinates():
    # in normal coordinates of a K = -1 surface, g(r e_theta, r e_theta) = sinh(r)^2 / r^2 * r^2
    hp = G.pullback_exp_metric(models.hyperbolic_ball(2), [0.0, 0.0], 1.5, orthonormal=True, steps=128)
    h = hp.metric(np.array([1.0, 0.0]))
    assert h[0, 0] == pytest.approx(1.0, abs=1e-6)
    assert h[1, 1] == pytest.approx(math.sinh(1.0) ** 2, rel=1e-6)


def test_rescaled_metric():
    hp = G.pullback_exp_metric(models.hyperbolic_ball(2), [0.0, 0.0], 1.0, orthonormal=True, steps=64)
    ht = G.rescaled_metric(hp, 0.5)
    assert np.allclose(ht.metric(np.array([0.8, 0.0])), hp.metric(np.array([0.4, 0.0])))
    assert ht.domain.radius == pytest.approx(2.0)
    with pytest.raises(NonpositiveScale):
        G.rescaled_metric(hp, 0.0)


def test_fd_derivative_sup_on_polynomial():
    def F(X):
        x = X[..., 0]
        return np.stack([np.stack([x**3, x], -1), np.stack([x, x], -1)], -2)

    sups = G.fd_derivative_sup(F, np.array([[0.5, 0.0]]), 2, 3, 1e-3)
    assert sups[0] == pytest.approx(0.5, rel=1e-12)
    assert sups[1] == pytest.approx(1.0, rel=1e-5)
    assert sups[2] == pytest.approx(3.0, rel=1e-4)
    assert sups[3] == pytest.approx(6.0, rel=1e-4)


def test_quasi_bounded_flat_is_zero():
    rep = G.quasi_bounded_check(models.euclidean(2), [[0.0, 0.0], [1.0, 2.0]], 1.0, steps=16)
    # third-order differences of an exactly flat pullback sit at the rounding floor
    assert max(rep.A) <= 1e-4 and rep.A[0] <= 1e-8
    assert rep.failures == []


def test_multi_indices_count():
    assert len(G.multi_indices(3, 2)) == 6


# ----------------------------------------------------------------------------- spec files

def test_spec_builtin_roundtrip(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"name": "hyperbolic_ball", "kind": "builtin", "dim": 3}))
    m = models.load_spec(path)
    assert m.dim == 3 and m.name == "hyperbolic_ball"


def test_spec_expression_matches_builtin():
    spec = {"name": "pd", "kind": "expression", "dim": 2,
            "params": {"g": [["1/(1-x1^2-x2^2)^2", "0"], [None, "1/(1-x1^2-x2^2)^2"]]},
            "domain": {"type": "ball", "radius": 1.0}}
    m = models.metric_from_spec(spec)
    assert G.sectional_curvature(m, [0.2, 0.1], [1, 0], [0, 1]) == pytest.approx(-4.0, abs=1e-4)


@pytest.mark.parametrize("spec", [
    {"name": "poincare_disc", "kind": "builtin", "colour": "red"},
    {"name": "poincare_disc", "kind": "builtin", "dim": 3},
    {"name": "nope", "kind": "builtin"},
    {"kind": "expression", "dim": 2, "params": {"g": [["__import__('os')", "0"], [None, "1"]]},
     "domain": {"type": "box", "lo": [-1, -1], "hi": [1, 1]}},
    {"kind": "expression", "dim": 2, "params": {"g": [["y", "0"], [None, "1"]]},
     "domain": {"type": "box", "lo": [-1, -1], "hi": [1, 1]}},
    {"kind": "expression", "dim": 2, "params": {"g": [["1", "0"], [None, "1"]]}, "domain": {"type": "cube"}},
])
def test_spec_rejects_bad_input(spec):
    with pytest.raises(SpecError):
        models.metric_from_spec(spec)


def test_spec_unreadable_file(tmp_path):
    with pytest.raises(SpecError):
        models.load_spec(tmp_path / "missing.json")


def test_torus_wraps_coordinates():
    m = models.flat_torus(2, 8.0)
    assert np.allclose(m.wrap([9.0, -1.0]), [1.0, 7.0])
    assert m.contains([100.0, -50.0])
