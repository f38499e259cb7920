"""Kobayashi-Royden pseudometric estimates, Poincare quantities and pseudodistances.

Upper estimates come from explicit discs: a disc ``u`` with ``u(0) = p`` and
``du(0) e1 = r' xi`` certifies ``F(p, xi) <= 1/r'``.  Lower estimates come
from a certified curvature bound ``K <= -c``, which gives
``F(p, xi) >= sqrt(c/8) |xi|_g``.
"""
from __future__ import annotations

import csv
import io
import json
import math
import weakref
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from . import disc as _disc
from .errors import (
    DegeneratePlane,
    Disconnected,
    JetDrift,
    KoblabError,
    LeftChart,
    NoAdmissibleDisc,
    NumericalError,
    OutOfChart,
    OutsideDisc,
    PinchNotCertified,
)
from .geometry import ChartedMetric, curvature_bounds_scan, geodesic_exp, geodesic_log, geodesic_reach

TOL_K = 1e-4  # slack when certifying K_max <= -c from sampled curvatures
TOL_LINK = 1e-3


# --------------------------------------------------------------------------
# Poincare disc


def _complex(z):
    z = np.asarray(z)
    if np.iscomplexobj(z):
        return z
    if z.shape and z.shape[-1] == 2:
        return z[..., 0] + 1j * z[..., 1]
    return z.astype(complex)


def poincare_metric(z, v):
    """``|v| / (1 - |z|^2)`` on the unit disc (complex or 2-vector inputs)."""
    z, v = _complex(z), _complex(v)
    a = np.abs(z)
    if np.any(a >= 1):
        raise OutsideDisc("base point outside the unit disc")
    out = np.abs(v) / (1.0 - a * a)
    return float(out) if np.ndim(out) == 0 else out


def poincare_distance(z, w):
    """``artanh |z - w| / |1 - z conj(w)|``, the distance of the metric above."""
    z, w = _complex(z), _complex(w)
    if np.any(np.abs(z) >= 1) or np.any(np.abs(w) >= 1):
        raise OutsideDisc("point outside the unit disc")
    d = np.abs(z - w) / np.abs(1.0 - z * np.conj(w))
    out = np.arctanh(np.minimum(d, 1.0))
    return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# disc search


@dataclass
class DiscBudget:
    """Search configuration for upper estimates.

    Radii form the geometric grid ``r_cap * ratio**k`` (``k < n_radii``),
    restricted to the geodesic reach of the chart; each plane is scanned from
    the largest radius down to the first admissible disc.
    """

    N: int = 65
    r_cap: float = 3.0
    ratio: float = 0.8
    n_radii: int = 20
    random_planes: int = 2
    refine: int = 0
    tol_h: float = _disc.TOL_H
    tol_c: float = _disc.TOL_C
    jet_const: float = 1.0
    reach_margin: float = 0.95
    threads: int = 1
    seed: int = 0

    def radii(self, reach=math.inf):
        limit = self.reach_margin * reach
        return [self.r_cap * self.ratio**k for k in range(self.n_radii) if self.r_cap * self.ratio**k <= limit]


@dataclass
class KobayashiEstimate:
    p: list
    xi: list
    upper: float
    lower: float | None = None
    certificate: str = ""
    tolerances: tuple = (_disc.TOL_H, _disc.TOL_C)
    radius: float | None = None
    r_prime: float | None = None
    plane: list | None = None
    candidates: int = 0
    diagnostics: list = field(default_factory=list)
    disc: object = field(default=None, repr=False, compare=False)

    def to_dict(self):
        d = asdict(replace(self, disc=None))
        d.pop("disc")
        d["tolerances"] = list(self.tolerances)
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


CSV_COLUMNS = ("upper", "lower")


def estimates_to_csv(estimates, fh=None):
    """Sweep table with columns ``p1..pn, xi1..xin, upper, lower``; returns
    the text when ``fh`` is None."""
    rows = list(estimates)
    out = fh or io.StringIO()
    n = len(rows[0].p) if rows else 0
    wr = csv.writer(out)
    wr.writerow([f"p{k + 1}" for k in range(n)] + [f"xi{k + 1}" for k in range(n)] + list(CSV_COLUMNS))
    for e in rows:
        wr.writerow([repr(float(c)) for c in e.p] + [repr(float(c)) for c in e.xi]
                    + [repr(float(e.upper)), "" if e.lower is None else repr(float(e.lower))])
    return out.getvalue() if fh is None else None


def _gnorm(m, p, v):
    return float(np.sqrt(v @ m.metric(p) @ v))


def _canonical_direction(m, p, xi):
    """Unit direction of ``xi`` up to sign (first nonzero component positive)."""
    d = xi / _gnorm(m, p, xi)
    k = int(np.argmax(np.abs(d) > 1e-12 * np.max(np.abs(d))))
    return d if d[k] > 0 else -d


def _planes(m, p, d, budget):
    """Second spanning vectors ``w`` for 2-planes containing ``d``."""
    g = m.metric(p)
    n = m.dim
    cands = []
    for k in np.argsort(-np.abs(np.eye(n) - np.outer(d, d @ g)).sum(axis=1)):
        e = np.eye(n)[k]
        w = e - (d @ g @ e) * d
        if np.sqrt(max(w @ g @ w, 0.0)) > 1e-6:
            cands.append(w / np.sqrt(w @ g @ w))
    if n == 2:
        return cands[:1]
    rng = np.random.default_rng(budget.seed)
    for _ in range(budget.random_planes):
        w = rng.standard_normal(n)
        w = w - (d @ g @ w) * d
        cands.append(w / np.sqrt(w @ g @ w))
    return cands


def _reach(m, p, d, w, r_cap, directions=8):
    th = 2 * np.pi * np.arange(directions) / directions
    dirs = np.cos(th)[:, None] * d + np.sin(th)[:, None] * w
    t = geodesic_reach(m, np.broadcast_to(p, dirs.shape), r_cap * dirs, steps=32)
    return float(r_cap * t.min()) if np.all(t < 1) else math.inf


def _extract(m, p, u, d):
    """Parameter vector ``zeta`` with ``du(0) zeta`` closest to ``d`` in ``g(p)``;
    returns ``(zeta, transverse)``.  Rotating the disc so ``e1`` points along
    ``zeta`` gives ``d(u o R)(0) e1 = d / |zeta|`` up to the transverse part."""
    L = np.linalg.cholesky(m.metric(p))
    D = u.jet()
    s = np.linalg.svd(L.T @ D, compute_uv=False)
    if s[-1] <= 1e-10 * max(s[0], 1e-300):
        raise DegeneratePlane("disc is not immersed at the origin")
    zeta, *_ = np.linalg.lstsq(L.T @ D, L.T @ d, rcond=None)
    res = D @ zeta - d
    return zeta, float(np.sqrt(res @ m.metric(p) @ res))


def _try_disc(m, p, d, w, r, budget, cache=None):
    key = None
    if cache is not None:
        key = (tuple(p), tuple(d), tuple(w), float(r), budget.N, budget.tol_h, budget.tol_c, budget.jet_const)
        if key in cache:
            return cache[key]
    out = {"r": float(r), "admissible": False, "reason": "", "r_prime": None, "disc": None}
    try:
        with np.errstate(all="ignore"):
            u, rep = _disc.jet_disc(m, p, d, w, r, N=budget.N, tol_h=budget.tol_h, tol_c=budget.tol_c,
                                    jet_const=budget.jet_const)
        out["report"] = rep
        if not _disc.is_admissible(rep, budget.tol_h, budget.tol_c):
            out["reason"] = (f"not admissible: tension {rep.tension_residual:.3g}, "
                             f"defect {rep.conformality_defect:.3g}")
        else:
            zeta, transverse = _extract(m, p, u, d)
            tau_jet = max(budget.tol_c, budget.jet_const * r * r)
            if transverse > tau_jet:
                out["reason"] = f"transverse drift {transverse:.3g} > {tau_jet:.3g}"
            else:
                out.update(admissible=True, r_prime=1.0 / float(np.linalg.norm(zeta)), disc=u,
                           zeta=zeta, transverse=transverse)
    except (KoblabError, np.linalg.LinAlgError, FloatingPointError) as exc:
        out["reason"] = f"{type(exc).__name__}: {exc}"
    if cache is not None:
        cache[key] = out
    return out


def _search_plane(m, p, d, w, budget, cache=None):
    """Scan radii downwards; return (best admissible attempt or None, attempts)."""
    radii = budget.radii(_reach(m, p, d, w, budget.r_cap))
    attempts = []
    best = None
    for k, r in enumerate(radii):
        att = _try_disc(m, p, d, w, r, budget, cache)
        attempts.append(att)
        if att["admissible"]:
            best = att
            hi = radii[k - 1] if k > 0 else None
            lo = r
            for _ in range(budget.refine if hi is not None else 0):
                mid = math.sqrt(lo * hi)
                a2 = _try_disc(m, p, d, w, mid, budget, cache)
                attempts.append(a2)
                if a2["admissible"]:
                    lo = mid
                    if a2["r_prime"] > best["r_prime"]:
                        best = a2
                else:
                    hi = mid
            break
    return best, attempts


def kobayashi_royden_upper(m: ChartedMetric, p, xi, budget: DiscBudget | None = None, cache=None,
                           strict=True) -> KobayashiEstimate:
    """Upper estimate of ``F(p, xi)`` from the best admissible jet disc.

    Raises ``NoAdmissibleDisc`` (carrying an estimate with ``upper = inf``)
    when no candidate passes the tolerances, unless ``strict=False``.
    """
    budget = budget or DiscBudget()
    p = np.asarray(p, float)
    xi = np.asarray(xi, float)
    m.require(p)
    if xi.shape != (m.dim,):
        raise ValueError("xi must be a tangent vector at p")
    norm = _gnorm(m, p, xi)
    if not norm > 0:
        raise ValueError("xi must be nonzero")
    d = _canonical_direction(m, p, xi)
    planes = _planes(m, p, d, budget)
    if budget.threads > 1 and len(planes) > 1:
        with ThreadPoolExecutor(budget.threads) as ex:
            results = list(ex.map(lambda w: _search_plane(m, p, d, w, budget, cache), planes))
    else:
        results = [_search_plane(m, p, d, w, budget, cache) for w in planes]
    best, best_id, tried, diags = None, None, 0, []
    for j, (att, attempts) in enumerate(results):
        tried += len(attempts)
        diags += [f"plane{j} r={a['r']:.6g}: {a['reason']}" for a in attempts if not a["admissible"]]
        # deterministic min-reduction: strict improvement only, so the lowest id wins ties
        if att is not None and (best is None or att["r_prime"] > best["r_prime"]):
            best, best_id = att, j
    tol = (budget.tol_h, budget.tol_c)
    if best is None:
        est = KobayashiEstimate(p.tolist(), xi.tolist(), math.inf, None, "", tol, candidates=tried,
                                diagnostics=diags)
        if strict:
            raise NoAdmissibleDisc(f"no admissible disc among {tried} candidates", est)
        return est
    w = planes[best_id]
    return KobayashiEstimate(
        p.tolist(), xi.tolist(), norm / best["r_prime"], None,
        f"plane{best_id}/r={best['r']:.6g}/N={budget.N}", tol, best["r"], best["r_prime"] / norm,
        w.tolist(), tried, diags, best["disc"])


_SCANS: "weakref.WeakKeyDictionary[ChartedMetric, dict]" = weakref.WeakKeyDictionary()


def certified_curvature(m: ChartedMetric, sample_count=200, rng_seed=0):
    """Cached ``curvature_bounds_scan`` of ``m``."""
    per = _SCANS.setdefault(m, {})
    key = (sample_count, rng_seed)
    if key not in per:
        per[key] = curvature_bounds_scan(m, sample_count, rng_seed)
    return per[key]


def pinch_certified(m: ChartedMetric, c, scan=None):
    scan = scan or certified_curvature(m)
    return scan.k_max <= -c + TOL_K * max(1.0, c)


def kobayashi_royden_lower(m: ChartedMetric, p, xi, c, scan=None) -> float:
    """``sqrt(c/8) |xi|_g``, claimed only when sampled curvature is ``<= -c``."""
    p = np.asarray(p, float)
    xi = np.asarray(xi, float)
    if not c > 0:
        raise ValueError("pinch constant must be positive")
    norm = _gnorm(m, p, xi)
    if norm == 0:
        return 0.0
    scan = scan or certified_curvature(m)
    if not pinch_certified(m, c, scan):
        raise PinchNotCertified(f"sampled K_max = {scan.k_max:.6g} exceeds -c = {-c:g}")
    return math.sqrt(c / 8.0) * norm


def kobayashi_estimate(m, p, xi, budget=None, c=None, cache=None, strict=True):
    """Upper estimate plus, when ``c`` is given, the curvature lower bound."""
    est = kobayashi_royden_upper(m, p, xi, budget, cache, strict)
    if c is not None:
        est.lower = kobayashi_royden_lower(m, p, xi, c)
    return est


def schwarz_check(u, c, tol=1e-2):
    """Nodewise ``u*g <= (8/c) g_D``: returns ``(ok, worst ratio)`` with the
    ratio ``max(|u_x|_g^2, |u_y|_g^2) (1 - |z|^2)^2 c / 8``."""
    if not c > 0:
        raise ValueError("pinch constant must be positive")
    ux, uy = u.derivatives()
    g = u.target.metric(u.values[:u.grid.n_interior])
    a = np.einsum("pi,pij,pj->p", ux, g, ux)
    b = np.einsum("pi,pij,pj->p", uy, g, uy)
    z2 = np.sum(u.grid.nodes[:u.grid.n_interior] ** 2, axis=1)
    ratio = np.maximum(a, b) * (1.0 - z2) ** 2 * c / 8.0
    worst = float(ratio.max()) if ratio.size else 0.0
    return worst <= 1.0 + tol, worst


def hyperbolic_at_point(m: ChartedMetric, p, c_pinch=None, scan=None):
    """``(True, sqrt(c/8))`` when a curvature bound ``K <= -c`` is certified,
    otherwise ``(None, None)``: there is no other lower-bound mechanism."""
    m.require(np.asarray(p, float))
    scan = scan or certified_curvature(m)
    c = c_pinch if c_pinch is not None else (-scan.k_max if scan.k_max < 0 else None)
    if c is None or not c > 0 or not pinch_certified(m, c, scan):
        return None, None
    return True, math.sqrt(c / 8.0)


# --------------------------------------------------------------------------
# pseudodistances


@dataclass
class ChainConfig:
    """Point cloud for chain search: ``n_line`` points on the geodesic from
    ``p`` to ``q`` and ``n_random`` points scattered around it."""

    n_line: int = 4
    n_random: int = 4
    spread: float = 0.3
    tol_link: float = TOL_LINK
    seed: int = 0
    budget: DiscBudget = field(default_factory=DiscBudget)


@dataclass
class ChainDistanceResult:
    value: float
    chain: list
    node_cloud_size: int
    nodes: list = field(default_factory=list)

    def to_dict(self):
        return {"value": self.value, "node_cloud_size": self.node_cloud_size, "nodes": self.nodes,
                "chain": [{"disc": c[0], "z": [c[1].real, c[1].imag], "w": [c[2].real, c[2].imag]}
                          for c in self.chain]}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _wrap_diff(m, a, b):
    d = np.asarray(b, float) - np.asarray(a, float)
    if m.periods is not None:
        for k, L in enumerate(m.periods):
            if L:
                d[..., k] -= L * np.round(d[..., k] / L)
    return d


def locate_in_disc(u, b, tol=TOL_LINK, max_iter=30):
    """Parameter ``w`` (complex) with ``u(w)`` within ``tol`` of ``b`` in chart
    units, by Gauss-Newton on the interpolated disc; None if not found."""
    m = u.target
    ni = u.grid.n_interior
    dist = np.linalg.norm(_wrap_diff(m, u.values[:ni], b), axis=1)
    w = np.array(u.grid.nodes[int(np.argmin(dist))])
    eps = 1e-6
    for _ in range(max_iter):
        probes = np.array([w, w + [eps, 0.0], w + [0.0, eps]])
        vals = u.evaluate(probes)
        if not np.all(np.isfinite(vals)):
            return None
        r = _wrap_diff(m, vals[0], b)
        if np.linalg.norm(r) <= tol * 1e-3:
            break
        J = np.stack([vals[1] - vals[0], vals[2] - vals[0]], axis=1) / eps
        step, *_ = np.linalg.lstsq(J, r, rcond=None)
        nrm = np.linalg.norm(step)
        if nrm > 0.25:
            step *= 0.25 / nrm
        w = w + step
        if np.linalg.norm(w) >= 1:
            return None
    val = u.evaluate(w)
    if not np.all(np.isfinite(val)) or np.linalg.norm(_wrap_diff(m, val, b)) > tol:
        return None
    return complex(w[0], w[1])


def _cloud(m, p, q, cfg):
    v = geodesic_log(m, p, q)
    ts = np.arange(1, cfg.n_line + 1) / (cfg.n_line + 1)
    line = geodesic_exp(m, np.broadcast_to(p, (len(ts), m.dim)), ts[:, None] * v) if len(ts) else np.zeros((0, m.dim))
    rng = np.random.default_rng(cfg.seed)
    pts = [p, q] + list(line)
    span = max(float(np.linalg.norm(v)), 1e-12)
    tries = 0
    while len(pts) < 2 + cfg.n_line + cfg.n_random and tries < 100 * (cfg.n_random + 1):
        tries += 1
        x = p + rng.uniform() * v + cfg.spread * span * rng.standard_normal(m.dim)
        if m.contains(x):
            pts.append(x)
    return np.array(pts)


def _best_disc(m, a, d, budget, cache):
    """Largest admissible jet disc at ``a`` tangent to ``d`` (any plane)."""
    d = d / _gnorm(m, a, d)
    best = None
    for j, w in enumerate(_planes(m, a, d, budget)):
        att, _ = _search_plane(m, a, d, w, budget, cache)
        if att is not None and (best is None or att["r_prime"] > best[0]["r_prime"]):
            best = (att, j)
    return best


def chain_distance(m: ChartedMetric, p, q, cloud: ChainConfig | None = None, cache=None) -> ChainDistanceResult:
    """Upper bound for the chain pseudodistance: shortest path in the graph
    of cloud points linked by discs through both endpoints, each link
    weighted by the Poincare distance ``rho(0, w)`` in the disc."""
    cfg = cloud or ChainConfig()
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    m.require(p)
    m.require(q)
    if np.allclose(_wrap_diff(m, p, q), 0.0, rtol=0, atol=0):
        return ChainDistanceResult(0.0, [], 1, [p.tolist()])
    pts = _cloud(m, p, q, cfg)
    k = len(pts)
    cache = {} if cache is None else cache
    W = np.full((k, k), np.inf)
    link = {}
    discs = {}
    for a in range(k):
        for b in range(k):
            if a == b:
                continue
            # in dimension 2 one disc per point covers every direction
            d = np.array([1.0, 0.0]) if m.dim == 2 else geodesic_log(m, pts[a], pts[b])
            key = (a, tuple(np.round(d / np.linalg.norm(d), 12)))
            if key not in discs:
                discs[key] = _best_disc(m, pts[a], d, cfg.budget, cache)
            found = discs[key]
            if found is None:
                continue
            att, j = found
            w = locate_in_disc(att["disc"], pts[b], cfg.tol_link)
            if w is None:
                continue
            rho = poincare_distance(0j, w)
            if rho < W[a, b]:
                W[a, b] = rho
                link[a, b] = (f"node{a}/plane{j}/r={att['r']:.6g}/N={cfg.budget.N}", 0j, w)
    rows, cols = np.nonzero(np.isfinite(W))
    # zero-length links are stored explicitly so csgraph keeps them as edges
    data = np.where(W[rows, cols] > 0, W[rows, cols], 1e-300)
    G = csr_matrix((data, (rows, cols)), shape=(k, k))
    dist, pred = dijkstra(G, directed=True, indices=0, return_predecessors=True)
    if not np.isfinite(dist[1]):
        raise Disconnected("no chain links p to q within the budget")
    path = [1]
    while path[-1] != 0:
        path.append(int(pred[path[-1]]))
    path.reverse()
    chain = [link[a, b] for a, b in zip(path[:-1], path[1:])]
    value = float(sum(poincare_distance(z, w) for _, z, w in chain))
    return ChainDistanceResult(value, chain, k, pts.tolist())


@dataclass
class PathConfig:
    """Polyline family: the geodesic with ``segments`` pieces plus
    ``perturbations`` random smooth deformations of it."""

    segments: int = 8
    perturbations: int = 32
    amplitude: float = 0.15
    samples_per_segment: int = 1
    seed: int = 0
    budget: DiscBudget = field(default_factory=DiscBudget)


@dataclass
class IntegratedDistanceResult:
    value: float
    path: list
    samples_per_segment: int
    samples: list = field(default_factory=list)
    paths_tried: int = 0

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


class _FieldCache:
    """Upper estimates of ``F(x, v)`` reusing one disc per point in dimension 2."""

    def __init__(self, m, budget, cache):
        self.m, self.budget, self.cache = m, budget, cache
        self.discs = {}

    def __call__(self, x, v):
        m = self.m
        norm = _gnorm(m, x, v)
        if norm == 0:
            return 0.0
        d = _canonical_direction(m, x, v) if m.dim > 2 else np.array([1.0, 0.0])
        key = (tuple(np.round(x, 14)), tuple(np.round(d, 12)))
        if key not in self.discs:
            self.discs[key] = _best_disc(m, x, d, self.budget, self.cache)
        found = self.discs[key]
        if found is None:
            raise NoAdmissibleDisc(f"no admissible disc at {np.asarray(x).tolist()}")
        zeta, _ = _extract(m, x, found[0]["disc"], v / norm)
        return norm * float(np.linalg.norm(zeta))


def integrated_distance(m: ChartedMetric, p, q, path: PathConfig | None = None, cache=None) -> IntegratedDistanceResult:
    """Upper bound for the integrated pseudodistance: the smallest quadrature
    of the upper estimate along a budgeted family of polylines."""
    cfg = path or PathConfig()
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    m.require(p)
    m.require(q)
    if np.allclose(_wrap_diff(m, p, q), 0.0, rtol=0, atol=0):
        return IntegratedDistanceResult(0.0, [p.tolist()], cfg.samples_per_segment)
    v = geodesic_log(m, p, q)
    t = np.linspace(0.0, 1.0, cfg.segments + 1)
    base = geodesic_exp(m, np.broadcast_to(p, (len(t), m.dim)), t[:, None] * v)
    base[0], base[-1] = p, p + _wrap_diff(m, p, q)
    span = float(np.linalg.norm(v))
    rng = np.random.default_rng(cfg.seed)
    family = [base]
    attempts = 0
    while len(family) < cfg.perturbations + 1 and attempts < 20 * (cfg.perturbations + 1):
        attempts += 1
        bump = sum(np.sin(k * np.pi * t)[:, None] * rng.standard_normal(m.dim) / k for k in (1, 2, 3))
        cand = base + cfg.amplitude * span * bump
        if np.all(m.contains(cand)):
            family.append(cand)
    F = _FieldCache(m, cfg.budget, {} if cache is None else cache)
    s, wts = np.polynomial.legendre.leggauss(cfg.samples_per_segment)
    s, wts = 0.5 * (s + 1.0), 0.5 * wts
    # Riemannian segment lengths order the work: likely-short paths first and
    # heavy segments first, so partial sums cross the incumbent early
    proxy = []
    for P in family:
        mid = 0.5 * (P[:-1] + P[1:])
        seg = np.diff(P, axis=0)
        proxy.append(np.sqrt(np.einsum("ki,kij,kj->k", seg, m.metric(mid), seg)))
    best = None
    for idx in np.argsort([float(np.sum(w)) for w in proxy], kind="stable"):
        P = family[idx]
        total, samples = 0.0, []
        try:
            for i in np.argsort(-proxy[idx], kind="stable"):
                a, b = P[i], P[i + 1]
                for sk, wk in zip(s, wts):
                    x = a + sk * (b - a)
                    f = F(x, b - a)
                    samples.append([x.tolist(), (b - a).tolist(), f])
                    total += wk * f
                if best is not None and total >= best[0]:
                    break  # partial sums only grow
            else:
                if best is None or total < best[0]:
                    best = (total, P, sorted(samples))
        except (NoAdmissibleDisc, OutOfChart, LeftChart):
            continue
    if best is None:
        raise NoAdmissibleDisc("no path in the family has admissible discs along it")
    return IntegratedDistanceResult(float(best[0]), best[1].tolist(), cfg.samples_per_segment, best[2],
                                    len(family))


# --------------------------------------------------------------------------
# structural checks


@dataclass
class DecreasingReport:
    rows: list
    violations: int
    tol: float

    @property
    def ok(self):
        return self.violations == 0

    def to_dict(self):
        return asdict(self)


def decreasing_property_check(m_sub: ChartedMetric, m_amb: ChartedMetric, samples, budget=None, tol=1e-12):
    """Check ``F_amb(p, xi) <= F_sub(p, xi) + tol`` at sampled ``(p, xi)``.

    Both estimates use the same radius grid, so every disc available in the
    sub-domain is also tried in the ambient chart."""
    budget = budget or DiscBudget()
    rows, bad = [], 0
    for p, xi in samples:
        sub = kobayashi_royden_upper(m_sub, p, xi, budget, strict=False).upper
        amb = kobayashi_royden_upper(m_amb, p, xi, budget, strict=False).upper
        ok = bool(amb <= sub + tol)
        bad += not ok
        rows.append({"p": list(map(float, p)), "xi": list(map(float, xi)), "ambient": amb, "sub": sub, "ok": ok})
    return DecreasingReport(rows, bad, tol)


__all__ = [
    "ChainConfig", "ChainDistanceResult", "DecreasingReport", "DiscBudget", "IntegratedDistanceResult",
    "KobayashiEstimate", "PathConfig", "certified_curvature", "chain_distance", "decreasing_property_check",
    "estimates_to_csv", "hyperbolic_at_point", "integrated_distance", "kobayashi_estimate",
    "kobayashi_royden_lower", "kobayashi_royden_upper", "locate_in_disc", "pinch_certified",
    "poincare_distance", "poincare_metric", "schwarz_check",
]
