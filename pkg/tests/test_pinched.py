import json
import math

import numpy as np
import pytest

from koblab import geometry as G
from koblab import models, pinched as Pn
from koblab.errors import CertificateFailure, NoScaleFound, PreconditionFailed

E2 = models.euclidean(2)
H2 = models.hyperbolic_ball(2)


@pytest.fixture(scope="module")
def t0_h2():
    return Pn.find_t0(H2, sample_count=3)


def test_flat_scale_is_maximal():
    assert Pn.find_t0(E2, sample_count=2) == pytest.approx(0.5, rel=1e-5)


def test_hyperbolic_scale_frozen(t0_h2):
    assert t0_h2 == pytest.approx(0.2134572431045013, rel=1e-6)


def test_scale_search_errors():
    with pytest.raises(ValueError):
        Pn.find_t0(E2, k0=4)
    with pytest.raises(NoScaleFound):
        Pn.find_t0(H2, eps0=1e-12, sample_count=1, t_min=0.2)


def test_tabulated_metric_tracks_source():
    hp = G.pullback_exp_metric(H2, [0.1, 0.2], 1.2, orthonormal=True, steps=64)
    tab = Pn.tabulated_metric(hp, 1.0)
    x = np.array([[0.3, -0.4], [0.0, 0.0], [0.7, 0.1]])
    assert np.abs(tab.metric(x) - hp.metric(x)).max() <= 1e-4
    assert tab.domain.radius == pytest.approx(1.0)


def test_claim_disc_on_flat_chart():
    u, alpha = Pn.claim_disc(models.euclidean(2), [2.0, 0.0], [0.0, 1.0], N=17)
    assert alpha == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(u.values, u.grid.nodes, atol=1e-9)


def test_claim_disc_preconditions():
    with pytest.raises(PreconditionFailed):
        Pn.claim_disc(E2, [1.0, 0.0], [1.0, 1.0])
    with pytest.raises(PreconditionFailed):
        Pn.claim_disc(E2, [0.0, 0.0], [1.0, 0.0])


def test_upper_bound_is_scale_formula():
    assert Pn.upper_bound_certificate(E2, [0.0, 0.0], [3.0, 4.0], 0.5) == pytest.approx(20.0)
    with pytest.raises(ValueError):
        Pn.upper_bound_certificate(E2, [0.0, 0.0], [1.0, 0.0], 0.0)


def test_composite_disc_respects_bound(t0_h2):
    bound, check = Pn.upper_bound_certificate(H2, [0.1, 0.2], [1.0, 0.5], t0_h2, verify=True)
    assert check.ok and check.admissible
    assert check.alpha >= 0.45
    assert check.measured <= bound
    assert bound == pytest.approx(2 * math.sqrt([1.0, 0.5] @ H2.metric([0.1, 0.2]) @ [1.0, 0.5]) / t0_h2)


def test_bilipschitz_on_hyperbolic_plane(t0_h2):
    cert = Pn.bilipschitz_verify(H2, 1.0, t0_h2, Pn.sample_rows(H2, 3, 1))
    assert cert.passed and len(cert.rows) == 3
    assert cert.lower_const == pytest.approx(math.sqrt(1 / 8))
    assert cert.C == pytest.approx(max(2 / t0_h2, math.sqrt(8)))
    for r in cert.rows:
        assert r["lower"] <= r["upper"] * 1.1 and r["upper"] <= r["bound"]
    assert json.loads(cert.to_json())["model"] == H2.name
    assert "row" in cert.summary()


def test_bilipschitz_requires_pinching():
    with pytest.raises(PreconditionFailed):
        Pn.bilipschitz_verify(E2, 1.0, 0.5, Pn.sample_rows(E2, 2))
    with pytest.raises(ValueError):
        Pn.bilipschitz_verify(H2, 0.0, 0.5, [])


def test_bilipschitz_empty_bracket():
    with pytest.raises(CertificateFailure):
        Pn.bilipschitz_verify(H2, 1.0, 10.0, [])
