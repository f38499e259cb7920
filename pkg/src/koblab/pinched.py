"""Two-sided bounds for negatively pinched metrics of quasi-bounded geometry.

Upper bound: in exponential coordinates at ``p`` rescaled by ``t0``, the
metric is ``eps0``-close to constant, so a near-flat conformal harmonic disc
of unit size with ``du(0) e1 = alpha v/|v|``, ``alpha >= 1/2``, exists; pushed
forward by ``exp_p`` after scaling by ``t0`` it gives ``F <= 2 |v| / t0``.
Lower bound: ``F >= sqrt(c/8) |v|`` from ``K <= -c``.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from . import disc as _disc
from .errors import (
    CertificateFailure,
    ClaimFailure,
    KoblabError,
    NoScaleFound,
    PreconditionFailed,
)
from .geometry import (
    Ball,
    ChartedMetric,
    deviation_norms,
    geodesic_exp,
    orthonormal_frame,
    pullback_exp_metric,
    rescaled_metric,
)
from .kobayashi import DiscBudget, _extract, _gnorm, kobayashi_royden_upper, pinch_certified

EPS0 = 0.05
K0 = 3
CLAIM_RADIUS = 2.0  # the C^k0 closeness is measured on this ball
TAU_ALPHA = 0.05
TAU_GAP = 0.1


def _pullbacks(m, p_samples, r0, steps):
    out = []
    for idx, p in enumerate(p_samples):
        out.append(pullback_exp_metric(m, p, 1.05 * r0, orthonormal=True, steps=steps, rng_seed=idx))
    return out


def scale_deviation(hps, t, k0=K0, x_samples=8, rng_seed=0):
    """``max_p ||h^t_p - h(p)||_{C^k0}`` on the radius-2 ball."""
    worst = 0.0
    for idx, hp in enumerate(hps):
        norms = deviation_norms(rescaled_metric(hp, t), CLAIM_RADIUS, k0, x_samples, rng_seed=rng_seed + idx)
        worst = max(worst, norms[-1])
    return worst


def find_t0(m: ChartedMetric, eps0=EPS0, k0=K0, p_samples=None, r0=1.0, sample_count=6, rng_seed=0,
            x_samples=8, t_min=1e-3, bisect_iters=12, steps=32):
    """Largest scale (up to bisection resolution, below ``r0/2``) at which the
    rescaled exponential-chart metrics are ``eps0``-close to constant in
    ``C^k0`` on the radius-2 ball, at every sampled basepoint."""
    if k0 > 3:
        raise ValueError("k0 is capped at 3 (finite differences)")
    if p_samples is None:
        rng = np.random.default_rng(rng_seed)
        p_samples = m.domain.sample(rng, sample_count, 0.5)
    hps = _pullbacks(m, p_samples, r0, steps)
    t_hi = 0.5 * r0 * (1.0 - 1e-6)

    def ok(t):
        return scale_deviation(hps, t, k0, x_samples, rng_seed) < eps0

    if ok(t_hi):
        return t_hi
    if not ok(t_min):
        raise NoScaleFound(f"deviation exceeds eps0 = {eps0:g} already at t = {t_min:g}")
    lo, hi = math.log(t_min), math.log(t_hi)
    for _ in range(bisect_iters):
        mid = 0.5 * (lo + hi)
        if ok(math.exp(mid)):
            lo = mid
        else:
            hi = mid
    return math.exp(lo)


def tabulated_metric(hp: ChartedMetric, radius, n_grid=None) -> ChartedMetric:
    """Cubic B-spline surrogate of ``hp`` on the ball of the given radius,
    tabulated on a tensor grid over the enclosing cube."""
    n = hp.dim
    n_grid = n_grid or (33 if n == 2 else 13)
    R = 1.05 * radius
    axis = np.linspace(-R, R, n_grid)
    pts = np.stack(np.meshgrid(*[axis] * n, indexing="ij"), axis=-1)
    # points outside the source chart are pulled radially onto it
    norms = np.linalg.norm(pts, axis=-1, keepdims=True)
    limit = 0.999 * hp.domain.radius if isinstance(hp.domain, Ball) and hp.domain.shape is None else R
    inside = np.where(norms > limit, pts * (limit / np.maximum(norms, 1e-300)), pts)
    table = hp.metric(inside)
    coeffs = [[ndimage.spline_filter(table[..., i, j], order=3, mode="nearest") for j in range(n)] for i in range(n)]
    spacing = axis[1] - axis[0]

    def g(x):
        x = np.asarray(x, float)
        idx = ((x + R) / spacing).reshape(-1, n).T
        out = np.empty(x.shape[:-1] + (n, n))
        for i in range(n):
            for j in range(i, n):
                val = ndimage.map_coordinates(coeffs[i][j], idx, order=3, prefilter=False, mode="nearest")
                out[..., i, j] = val.reshape(x.shape[:-1])
                out[..., j, i] = out[..., i, j]
        return out

    info = dict(hp.info)
    info["tabulated"] = {"radius": float(radius), "n_grid": int(n_grid)}
    return ChartedMetric(n, Ball(np.zeros(n), radius), g, None, name=f"table({hp.name})", fd_step=1e-4, info=info)


def claim_disc(hp_t: ChartedMetric, v, w, N=33, tau_alpha=TAU_ALPHA, tol_h=_disc.TOL_H, tol_c=_disc.TOL_C,
               max_iter=50, tabulate=True):
    """Relax the flat disc ``x v/|v| + y w/|w|`` under ``hp_t`` (coordinates
    centred at the basepoint) and measure ``alpha``, the component of
    ``du(0) e1`` along ``v/|v|``.  Returns ``(disc, alpha)``."""
    v = np.asarray(v, float)
    w = np.asarray(w, float)
    n = hp_t.dim
    zero = np.zeros(n)
    h0 = hp_t.metric(zero)
    nv, nw = math.sqrt(v @ h0 @ v), math.sqrt(w @ h0 @ w)
    if nv == 0 or nw == 0:
        raise PreconditionFailed("v and w must be nonzero")
    if abs(v @ h0 @ w) > 1e-8 * nv * nw:
        raise PreconditionFailed("v and w must be h(p)-orthogonal")
    target = tabulated_metric(hp_t, 1.6) if tabulate else hp_t
    grid = _disc.disc_grid(N)
    vals = grid.nodes[:, :1] * (v / nv) + grid.nodes[:, 1:] * (w / nw)
    try:
        u, rep = _disc.relax_centred(_disc.DiscMap(grid, target, vals), zero, tol_h, max_iter)
    except KoblabError as exc:
        raise ClaimFailure(f"claim disc relaxation failed: {exc}") from exc
    if not _disc.is_admissible(rep, tol_h, tol_c):
        raise ClaimFailure(f"claim disc not admissible: tension {rep.tension_residual:.3g}, "
                           f"defect {rep.conformality_defect:.3g}")
    alpha = float(u.jet()[:, 0] @ h0 @ (v / nv))
    if alpha < 0.5 - tau_alpha:
        raise ClaimFailure(f"alpha = {alpha:.4g} below 1/2 - {tau_alpha:g}")
    u.report = rep
    return u, alpha


@dataclass
class CompositeCheck:
    bound: float
    measured: float
    alpha: float
    admissible: bool
    ok: bool

    def to_dict(self):
        return asdict(self)


def upper_bound_certificate(m: ChartedMetric, p, v, t0, verify=False, r0=None, N=33, tau_gap=TAU_GAP,
                            steps=64):
    """``2 |v|_h / t0``.  With ``verify=True`` also returns a ``CompositeCheck``
    for the disc ``exp_p(t0 * claim disc)``, relaxed in ``m`` and measured."""
    p = np.asarray(p, float)
    v = np.asarray(v, float)
    if not t0 > 0:
        raise ValueError("t0 must be positive")
    bound = 2.0 * _gnorm(m, p, v) / t0
    if not verify:
        return bound
    n = m.dim
    F = orthonormal_frame(m, p)
    Finv = np.linalg.inv(F)
    vo = Finv @ v
    if not np.any(vo):
        raise ValueError("v must be nonzero for the composite check")
    wo = np.eye(n)[int(np.argmin(np.abs(vo)))]
    wo = wo - (wo @ vo) / (vo @ vo) * vo
    r0 = r0 if r0 is not None else 2.2 * t0
    hp = pullback_exp_metric(m, p, max(r0, 2.1 * t0), orthonormal=True, steps=steps)
    u, alpha = claim_disc(rescaled_metric(hp, t0), vo, wo, N=N)
    X = (t0 * u.values) @ F.T
    vals = geodesic_exp(m, np.broadcast_to(p, X.shape), X, steps=steps)
    U, rep = _disc.relax_centred(_disc.DiscMap(u.grid, m, vals), p)
    admissible = _disc.is_admissible(rep)
    zeta, _ = _extract(m, p, U, v / _gnorm(m, p, v))
    measured = _gnorm(m, p, v) * float(np.linalg.norm(zeta))
    ok = bool(admissible and measured <= bound * (1 + tau_gap))
    return bound, CompositeCheck(bound, measured, alpha, bool(admissible), ok)


@dataclass
class BiLipschitzCertificate:
    model: str
    c: float
    t0: float
    lower_const: float
    upper_const: float
    C: float
    rows: list
    tolerances: dict
    passed: bool = True
    offending: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def summary(self):
        lines = [f"model {self.model}  c={self.c:g}  t0={self.t0:.6g}  "
                 f"lower={self.lower_const:.6g}  upper={self.upper_const:.6g}  C={self.C:.6g}",
                 f"{'row':>4} {'|v|_g':>10} {'lower':>10} {'F_upper':>10} {'bound':>10} ok"]
        for k, r in enumerate(self.rows):
            lines.append(f"{k:>4} {r['norm']:>10.5g} {r['lower']:>10.5g} {r['upper']:>10.5g} "
                         f"{r['bound']:>10.5g} {'yes' if r['ok'] else 'NO'}")
        return "\n".join(lines)


def sample_rows(m: ChartedMetric, count, rng_seed=0, margin=0.5):
    rng = np.random.default_rng(rng_seed)
    ps = m.domain.sample(rng, count, margin)
    vs = rng.standard_normal((count, m.dim))
    return [(p, v) for p, v in zip(ps, vs)]


def bilipschitz_verify(m: ChartedMetric, c, t0, samples, tau_gap=TAU_GAP, budget=None, threads=1,
                       scan=None, strict=True):
    """Check ``sqrt(c/8)|v| <= F_upper`` and ``F_upper <= (2/t0)|v|`` (both
    up to ``1 + tau_gap``) on sampled ``(p, v)``, where ``F_upper`` is the
    disc-search estimate capped by the scale bound."""
    if not c > 0:
        raise ValueError("pinch constant must be positive")
    if not pinch_certified(m, c, scan):
        raise PreconditionFailed(f"curvature bound K <= -{c:g} is not certified for {m.name}")
    budget = budget or DiscBudget(N=33)
    lower_const = math.sqrt(c / 8.0)
    upper_const = 2.0 / t0
    if lower_const > upper_const:
        raise CertificateFailure("empty bracket: sqrt(c/8) exceeds 2/t0")

    def row(item):
        p, v = np.asarray(item[0], float), np.asarray(item[1], float)
        norm = _gnorm(m, p, v)
        bound = upper_bound_certificate(m, p, v, t0)
        est = kobayashi_royden_upper(m, p, v, budget, strict=False).upper
        upper = min(est, bound)
        lower = lower_const * norm
        ok = bool(lower <= upper * (1 + tau_gap) and upper <= bound * (1 + tau_gap))
        return {"p": p.tolist(), "v": v.tolist(), "norm": norm, "lower": lower, "upper": upper,
                "disc_upper": est, "bound": bound, "ok": ok}

    items = list(samples)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            rows = list(ex.map(row, items))
    else:
        rows = [row(it) for it in items]
    bad = [k for k, r in enumerate(rows) if not r["ok"]]
    cert = BiLipschitzCertificate(m.name, float(c), float(t0), lower_const, upper_const,
                                  max(upper_const, 1.0 / lower_const), rows,
                                  {"tau_gap": tau_gap, "tol_h": budget.tol_h, "tol_c": budget.tol_c},
                                  not bad, bad)
    if bad and strict:
        raise CertificateFailure(f"{len(bad)} of {len(rows)} rows violate the bracket", bad)
    return cert


__all__ = [
    "BiLipschitzCertificate", "CompositeCheck", "bilipschitz_verify", "claim_disc", "find_t0",
    "sample_rows", "scale_deviation", "tabulated_metric", "upper_bound_certificate",
]
