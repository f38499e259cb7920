"""Charted Riemannian metrics, curvature, geodesics and exponential charts.

Arrays follow numpy broadcasting: points have shape ``(..., n)``, metric
tensors ``(..., n, n)`` and first derivatives ``(..., n, n, n)`` with the
differentiation index first, ``dg[..., k, i, j] = d_k g_ij``.  Christoffel
symbols are stored as ``gamma[..., k, i, j] = Gamma^k_ij``.

Curvature sign convention: ``R(X, Y) = [nabla_X, nabla_Y] - nabla_[X,Y]`` and
``K(v, w) = <R(v, w) w, v> / (|v|^2 |w|^2 - <v, w>^2)``, positive on spheres.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    DegeneratePlane,
    LeftChart,
    NonpositiveScale,
    NotImmersion,
    OutOfChart,
    ReducedStepExhausted,
    SingularMetric,
)

FD_STEP = 1e-4
FD_STEP_SECOND = 1e-3
GEODESIC_STEPS = 256


# --------------------------------------------------------------------------
# chart domains


class Box:
    """Axis-aligned box ``lo < x < hi``; periodic axes are never bounded."""

    def __init__(self, lo, hi, periodic=None):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        if self.lo.shape != self.hi.shape or np.any(self.hi <= self.lo):
            raise ValueError("box needs lo < hi componentwise")
        n = self.lo.size
        self.periodic = np.zeros(n, bool) if periodic is None else np.asarray(periodic, bool)

    @property
    def dim(self):
        return self.lo.size

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x > self.lo) & (x < self.hi)
        inside |= self.periodic
        return np.all(inside, axis=-1) & np.all(np.isfinite(x), axis=-1)

    def sample(self, rng, count, margin=1.0):
        mid = 0.5 * (self.lo + self.hi)
        half = 0.5 * (self.hi - self.lo) * margin
        return mid + half * rng.uniform(-1.0, 1.0, size=(count, self.dim))

    def scaled(self, s):
        return Box(self.lo * s, self.hi * s, self.periodic)

    def to_dict(self):
        return {"type": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}

    def __repr__(self):
        return f"Box({self.lo.tolist()}, {self.hi.tolist()})"


class Ball:
    """Open ball ``(x - c)^T Q (x - c) < radius^2``; ``Q`` defaults to identity."""

    def __init__(self, center, radius, shape=None):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")
        self.shape = None if shape is None else np.asarray(shape, dtype=float)

    @property
    def dim(self):
        return self.center.size

    def _sq(self, d):
        if self.shape is None:
            return np.einsum("...i,...i->...", d, d)
        return np.einsum("...i,ij,...j->...", d, self.shape, d)

    def contains(self, x):
        d = np.asarray(x, dtype=float) - self.center
        with np.errstate(invalid="ignore"):
            return self._sq(d) < self.radius**2

    def sample(self, rng, count, margin=1.0):
        n = self.dim
        z = rng.standard_normal((count, n))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        rad = self.radius * margin * rng.uniform(0.0, 1.0, size=(count, 1)) ** (1.0 / n)
        y = z * rad
        if self.shape is not None:
            # y is unit-ball data in Q-orthonormal coordinates
            L = np.linalg.cholesky(self.shape)
            y = np.linalg.solve(L.T, y.T).T
        return self.center + y

    def scaled(self, s):
        return Ball(self.center * s, self.radius * s, self.shape)

    def to_dict(self):
        out = {"type": "ball", "center": self.center.tolist(), "radius": self.radius}
        if self.shape is not None:
            out["shape"] = self.shape.tolist()
        return out

    def __repr__(self):
        return f"Ball({self.center.tolist()}, {self.radius})"


# --------------------------------------------------------------------------
# metrics


@dataclass(frozen=True, eq=False)
class ChartedMetric:
    """A Riemannian metric given in a single chart.

    ``g`` maps points ``(..., n)`` to tensors ``(..., n, n)``.  ``dg`` is an
    optional analytic first derivative; without it central differences with
    step ``fd_step`` are used.  ``periods`` lists a period per axis (``None``
    for non-periodic axes); coordinates are wrapped before evaluation.
    """

    dim: int
    domain: object
    g: Callable
    dg: Optional[Callable] = None
    name: str = "metric"
    periods: Optional[tuple] = None
    fd_step: float = FD_STEP
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dimension must be at least 2")

    def wrap(self, x):
        x = np.asarray(x, dtype=float)
        if not self.periods:
            return x
        out = x.copy()
        for axis, period in enumerate(self.periods):
            if period:
                lo = self.domain.lo[axis] if isinstance(self.domain, Box) else 0.0
                out[..., axis] = lo + np.mod(x[..., axis] - lo, period)
        return out

    def contains(self, x):
        return self.domain.contains(np.asarray(x, dtype=float))

    def require(self, x):
        if not np.all(self.contains(x)):
            raise OutOfChart(f"point outside the chart of {self.name}")

    def metric(self, x):
        return self.g(self.wrap(x))

    def metric_derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.dg is not None:
            return self.dg(self.wrap(x))
        n = self.dim
        h = self.fd_step
        offsets = np.concatenate([np.eye(n), -np.eye(n)]) * h
        vals = self.metric(x[..., None, :] + offsets)
        return (vals[..., :n, :, :] - vals[..., n:, :, :]) / (2 * h)

    def inner(self, x, v, w):
        return np.einsum("...i,...ij,...j->...", v, self.metric(x), w)

    def norm(self, x, v):
        return np.sqrt(self.inner(x, v, v))

    def __repr__(self):
        return f"ChartedMetric({self.name!r}, dim={self.dim})"


def _inverse(g, check):
    if check:
        w = np.linalg.eigvalsh(g)
        if not np.all(np.isfinite(w)) or np.any(w[..., 0] <= 1e-14 * np.abs(w[..., -1])):
            raise SingularMetric("metric tensor is not positive definite")
    return np.linalg.inv(g)


def christoffel(m: ChartedMetric, x, check=True):
    """Christoffel symbols ``Gamma^k_ij`` at ``x``, shape ``(..., n, n, n)``."""
    x = np.asarray(x, dtype=float)
    if check:
        m.require(x)
    ginv = _inverse(m.metric(x), check)
    dg = m.metric_derivative(x)
    # dg[a, b, c] = d_a g_bc ; need d_i g_jl + d_j g_il - d_l g_ij
    term = dg[..., :, :, :] + np.swapaxes(dg, -3, -2) - np.moveaxis(dg, -3, -1)
    gamma = 0.5 * np.einsum("...kl,...ijl->...kij", ginv, term)
    return 0.5 * (gamma + np.swapaxes(gamma, -1, -2))


def christoffel_derivative(m: ChartedMetric, x, h=FD_STEP_SECOND):
    """``dgamma[..., a, k, i, j] = d_a Gamma^k_ij`` by a fourth-order central stencil."""
    x = np.asarray(x, dtype=float)
    n = m.dim
    eye = np.eye(n)
    offsets = np.concatenate([2 * eye, eye, -eye, -2 * eye]) * h
    G = christoffel(m, x[..., None, :] + offsets, check=False)
    p2, p1, m1, m2 = (G[..., s * n:(s + 1) * n, :, :, :] for s in range(4))
    return (-p2 + 8 * p1 - 8 * m1 + m2) / (12 * h)


def riemann(m: ChartedMetric, x):
    """Lowered curvature ``R_ijkl = <R(d_i, d_j) d_k, d_l>``."""
    x = np.asarray(x, dtype=float)
    m.require(x)
    G = christoffel(m, x)
    dG = christoffel_derivative(m, x)
    # up[..., i, j, k, l] : component l of R(d_i, d_j) d_k
    up = (
        np.einsum("...iljk->...ijkl", dG)
        - np.einsum("...jlik->...ijkl", dG)
        + np.einsum("...lim,...mjk->...ijkl", G, G)
        - np.einsum("...ljm,...mik->...ijkl", G, G)
    )
    return np.einsum("...ijkm,...ml->...ijkl", up, m.metric(x))


def _sectional_from(R, g, v, w):
    num = np.einsum("...ijkl,...i,...j,...k,...l->...", R, v, w, w, v)
    vv = np.einsum("...i,...ij,...j->...", v, g, v)
    ww = np.einsum("...i,...ij,...j->...", w, g, w)
    vw = np.einsum("...i,...ij,...j->...", v, g, w)
    return num, vv * ww - vw**2, vv * ww


@dataclass
class CurvatureReport:
    point: np.ndarray
    christoffel: np.ndarray
    riemann: np.ndarray
    metric: np.ndarray

    def sectional(self, v, w, tol_plane=1e-12):
        num, den, scale = _sectional_from(self.riemann, self.metric, np.asarray(v, float), np.asarray(w, float))
        if den <= tol_plane * scale:
            raise DegeneratePlane("vectors span no 2-plane")
        return float(num / den)


def curvature_report(m: ChartedMetric, x) -> CurvatureReport:
    x = np.asarray(x, dtype=float)
    return CurvatureReport(x, christoffel(m, x), riemann(m, x), m.metric(x))


def sectional_curvature(m: ChartedMetric, x, v, w, tol_plane=1e-12):
    """Sectional curvature of the plane spanned by ``v`` and ``w`` at ``x``."""
    v = np.asarray(v, float)
    w = np.asarray(w, float)
    g = m.metric(x)
    _, den, scale = _sectional_from(np.zeros((m.dim,) * 4), g, v, w)
    if den <= tol_plane * scale or scale == 0:
        raise DegeneratePlane("vectors span no 2-plane")
    num, den, _ = _sectional_from(riemann(m, x), g, v, w)
    return float(num / den)


@dataclass
class CurvatureScan:
    k_min: float
    k_max: float
    points: np.ndarray
    planes: np.ndarray
    values: np.ndarray
    seed: int

    def __iter__(self):
        yield self.k_min
        yield self.k_max

    def rows(self):
        for x, (v, w), k in zip(self.points, self.planes, self.values):
            yield {"x": x.tolist(), "v": v.tolist(), "w": w.tolist(), "K": float(k)}


def curvature_bounds_scan(m: ChartedMetric, sample_count: int, rng_seed: int = 0,
                          margin=0.9, max_retries=20, tol_plane=1e-6) -> CurvatureScan:
    """Min and max sectional curvature over random points and 2-planes."""
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(rng_seed)
    pts = m.domain.sample(rng, sample_count, margin)
    g = m.metric(pts)
    v = rng.standard_normal((sample_count, m.dim))
    w = rng.standard_normal((sample_count, m.dim))
    for _ in range(max_retries):
        _, den, scale = _sectional_from(np.zeros((1,) + (m.dim,) * 4), g, v, w)
        bad = den <= tol_plane * scale
        if not np.any(bad):
            break
        w[bad] = rng.standard_normal((int(bad.sum()), m.dim))
    else:
        raise DegeneratePlane("could not sample nondegenerate planes")
    num, den, _ = _sectional_from(riemann(m, pts), g, v, w)
    K = num / den
    return CurvatureScan(float(K.min()), float(K.max()), pts, np.stack([v, w], axis=1), K, rng_seed)


# --------------------------------------------------------------------------
# geodesics


def _solve_small(g, b):
    """Batched ``g^{-1} b`` by cofactors for ``n <= 3``, else LAPACK."""
    n = g.shape[-1]
    if n == 2:
        a, c, d = g[..., 0, 0], g[..., 0, 1], g[..., 1, 1]
        det = a * d - c * c
        return np.stack([d * b[..., 0] - c * b[..., 1], a * b[..., 1] - c * b[..., 0]], axis=-1) / det[..., None]
    if n == 3:
        cof = np.cross(g[..., [1, 2, 0], :], g[..., [2, 0, 1], :])
        det = np.sum(g[..., 0, :] * cof[..., 0, :], axis=-1)
        return (cof @ b[..., None])[..., 0] / det[..., None]
    return np.linalg.solve(g, b[..., None])[..., 0]


def _geodesic_accel(m, x, u):
    # -Gamma(u, u) = -g^{-1} (d_u g . u - 1/2 grad g(u, u)), without forming Gamma;
    # elementwise sums over the small index beat batched tiny matmuls
    g = m.metric(x)
    dg = m.metric_derivative(x)
    n = m.dim
    A = sum(u[..., i, None, None] * dg[..., i, :, :] for i in range(n))
    t1 = sum(u[..., j, None] * A[..., j, :] for j in range(n))
    uu = u[..., :, None] * u[..., None, :]
    t2 = np.sum(dg * uu[..., None, :, :], axis=(-2, -1))
    return -_solve_small(g, t1 - 0.5 * t2)


def _integrate(m, p, v, steps, record):
    x = np.array(p, dtype=float)
    u = np.array(v, dtype=float)
    dt = 1.0 / steps
    path = [(x.copy(), u.copy())] if record else None
    for _ in range(steps):
        k1x, k1u = u, _geodesic_accel(m, x, u)
        k2x = u + 0.5 * dt * k1u
        k2u = _geodesic_accel(m, x + 0.5 * dt * k1x, k2x)
        k3x = u + 0.5 * dt * k2u
        k3u = _geodesic_accel(m, x + 0.5 * dt * k2x, k3x)
        k4x = u + dt * k3u
        k4u = _geodesic_accel(m, x + dt * k3x, k4x)
        x = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        u = u + dt / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
            raise ReducedStepExhausted("geodesic integration produced non-finite values")
        if not np.all(m.contains(x)):
            return None
        if record:
            path.append((x.copy(), u.copy()))
    return path if record else (x, u)


def geodesic_path(m: ChartedMetric, p, v, steps=GEODESIC_STEPS):
    """Positions and velocities along ``t -> exp_p(t v)``, ``t in [0, 1]``."""
    p, v = np.broadcast_arrays(np.asarray(p, float), np.asarray(v, float))
    m.require(p)
    path = _integrate(m, p, v, steps, record=True)
    if path is None:
        raise LeftChart("geodesic left the chart")
    xs = np.stack([a for a, _ in path])
    us = np.stack([b for _, b in path])
    return xs, us


def geodesic_exp(m: ChartedMetric, p, v, steps=GEODESIC_STEPS, refinements=2):
    """Exponential map by fixed-step RK4; vectorized over leading axes.

    A trajectory that leaves the chart is retried with halved steps (the RK4
    stages can overshoot near the chart boundary) before ``LeftChart`` is
    raised.
    """
    p, v = np.broadcast_arrays(np.asarray(p, float), np.asarray(v, float))
    m.require(p)
    for level in range(refinements + 1):
        out = _integrate(m, p, v, steps * 2**level, record=False)
        if out is not None:
            return out[0]
    raise LeftChart("geodesic left the chart")


def geodesic_reach(m: ChartedMetric, p, v, steps=GEODESIC_STEPS):
    """Largest ``t`` in ``[0, 1]`` (to step resolution) with ``exp_p(s v)`` in
    the chart for all ``s <= t``; vectorized over leading axes."""
    p, v = np.broadcast_arrays(np.asarray(p, float), np.asarray(v, float))
    m.require(p)
    x, u = p.copy(), v.copy()
    dt = 1.0 / steps
    reach = np.ones(x.shape[:-1])
    alive = np.ones(x.shape[:-1], bool)
    for k in range(steps):
        k1u = _geodesic_accel(m, x, u)
        k2x = u + 0.5 * dt * k1u
        k2u = _geodesic_accel(m, x + 0.5 * dt * u, k2x)
        k3x = u + 0.5 * dt * k2u
        k3u = _geodesic_accel(m, x + 0.5 * dt * k2x, k3x)
        k4x = u + dt * k3u
        k4u = _geodesic_accel(m, x + dt * k3x, k4x)
        xn = x + dt / 6.0 * (u + 2 * k2x + 2 * k3x + k4x)
        un = u + dt / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
        ok = m.contains(xn) & np.all(np.isfinite(xn), axis=-1) & np.all(np.isfinite(un), axis=-1)
        left = alive & ~ok
        reach[left] = k * dt
        alive &= ok
        if not np.any(alive):
            break
        # frozen copies keep dead trajectories inside the chart
        x = np.where(alive[..., None], xn, x)
        u = np.where(alive[..., None], un, u)
    return reach


def _wrap_periods(m, d):
    if m.periods is not None:
        for k, L in enumerate(m.periods):
            if L:
                d[..., k] -= L * np.round(d[..., k] / L)
    return d


def geodesic_log(m: ChartedMetric, p, q, steps=GEODESIC_STEPS, tol=1e-10, max_iter=30):
    """Initial velocity ``v`` with ``exp_p(v) = q``, by Newton shooting from
    the chart difference ``q - p``; ``q`` may carry leading batch axes."""
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    m.require(p)
    m.require(q)
    if q.ndim > 1:
        flat = q.reshape(-1, m.dim)
        try:
            out = _log_batch(m, p, flat, steps, tol, max_iter)
        except LeftChart:
            out = np.array([geodesic_log(m, p, x, steps, tol, max_iter) for x in flat])
        return out.reshape(q.shape)
    n = m.dim
    v = _wrap_periods(m, q - p)
    scale = max(1.0, float(np.linalg.norm(v)))
    for _ in range(max_iter):
        eps = 1e-6 * scale
        probes = v + np.concatenate([np.zeros((1, n)), eps * np.eye(n)])
        out = geodesic_exp(m, np.broadcast_to(p, probes.shape), probes, steps=steps)
        r = _wrap_periods(m, q - out[0])
        if np.linalg.norm(r) <= tol * scale:
            return v
        J = (out[1:] - out[0]).T / eps
        step = np.linalg.solve(J, r)
        lam = 1.0
        while lam > 1e-4:
            try:
                geodesic_exp(m, p, v + lam * step, steps=steps)
                break
            except LeftChart:
                lam *= 0.5
        v = v + lam * step
    raise LeftChart("geodesic shooting for the log map did not converge")


def _log_batch(m, p, Q, steps, tol, max_iter):
    """Undamped batched Newton shooting on the unconverged points; raises
    ``LeftChart`` on any failure."""
    n = m.dim
    V = _wrap_periods(m, Q - p)
    scale = np.maximum(1.0, np.linalg.norm(V, axis=1))
    offs = np.concatenate([np.zeros((1, n)), np.eye(n)])
    active = np.arange(len(Q))
    for _ in range(max_iter):
        Va, sa = V[active], scale[active]
        eps = 1e-6 * sa
        probes = Va[:, None, :] + eps[:, None, None] * offs
        out = geodesic_exp(m, np.broadcast_to(p, probes.shape), probes, steps=steps)
        r = _wrap_periods(m, Q[active] - out[:, 0])
        done = np.linalg.norm(r, axis=1) <= tol * sa
        J = np.swapaxes(out[:, 1:] - out[:, :1], 1, 2) / eps[:, None, None]
        V[active[~done]] = Va[~done] + np.linalg.solve(J[~done], r[~done][..., None])[..., 0]
        active = active[~done]
        if not active.size:
            return V
    raise LeftChart("batched log shooting did not converge")


def orthonormal_frame(m: ChartedMetric, p):
    """Matrix ``F`` with ``F^T g(p) F = I`` (columns form a g(p)-orthonormal basis)."""
    L = np.linalg.cholesky(m.metric(np.asarray(p, float)))
    return np.linalg.inv(L).T


def pullback_exp_metric(m: ChartedMetric, p, radius, orthonormal=False, steps=128,
                        eps=1e-5, check_points=16, rng_seed=0) -> ChartedMetric:
    """The metric ``h_p = exp_p^* h`` on the ``h(p)``-ball of the given radius.

    With ``orthonormal=False`` the tangent space carries chart components, so
    ``h_p(0) = h(p)``.  With ``orthonormal=True`` coordinates are taken in a
    ``h(p)``-orthonormal frame and ``h_p(0)`` is the identity.
    """
    p = np.asarray(p, dtype=float)
    m.require(p)
    n = m.dim
    hp0 = m.metric(p)
    F = orthonormal_frame(m, p) if orthonormal else np.eye(n)
    offsets = np.concatenate([np.eye(n), -np.eye(n)]) * eps

    def g(Y):
        Y = np.asarray(Y, float)
        pts = np.concatenate([Y[..., None, :], Y[..., None, :] + offsets], axis=-2)
        X = pts @ F.T
        E = geodesic_exp(m, p, X, steps=steps)
        J = (E[..., 1:n + 1, :] - E[..., n + 1:, :]) / (2 * eps)  # rows: d/dY_a
        H = m.metric(E[..., 0, :])
        out = np.einsum("...ai,...ij,...bj->...ab", J, H, J)
        return 0.5 * (out + np.swapaxes(out, -1, -2))

    shape = None if orthonormal else hp0
    domain = Ball(np.zeros(n), radius, shape)
    hp = ChartedMetric(n, domain, g, None, name=f"exp*({m.name})", fd_step=FD_STEP,
                       info={"base": p.tolist(), "frame": F.tolist(), "radius": float(radius)})

    rng = np.random.default_rng(rng_seed)
    probe = np.concatenate([np.zeros((1, n)), domain.sample(rng, check_points, 0.999)])
    H = hp.metric(probe)
    ev = np.linalg.eigvalsh(H)
    if np.any(ev[:, 0] <= 1e-10 * ev[:, -1]):
        raise NotImmersion("differential of exp_p drops rank at a sampled point")
    return hp


def rescaled_metric(hp: ChartedMetric, t) -> ChartedMetric:
    """``h^t(x) = h_p(t x)``, defined on the domain scaled by ``1/t``."""
    t = float(t)
    if not t > 0:
        raise NonpositiveScale("scale must be positive")
    if t == 1.0:
        return hp
    g0, dg0 = hp.g, hp.dg

    def g(x):
        return g0(t * np.asarray(x, float))

    dg = None
    if dg0 is not None:
        def dg(x):
            return t * dg0(t * np.asarray(x, float))

    info = dict(hp.info)
    info["scale"] = t
    return ChartedMetric(hp.dim, hp.domain.scaled(1.0 / t), g, dg,
                         name=f"{hp.name}@t={t:g}", fd_step=hp.fd_step, info=info)


# --------------------------------------------------------------------------
# finite-difference C^k norms

_STENCILS = {
    0: ((0,), (1.0,)),
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
}


def multi_indices(n, q):
    return list(itertools.combinations_with_replacement(range(n), q))


def fd_derivative_sup(F, X, n, q_max, step):
    """Per order ``q <= q_max``, sup over ``X``, multi-indices ``|mu| = q`` and
    components of the finite-difference partials of the tensor field ``F``."""
    if q_max > 3:
        raise ValueError("finite-difference derivatives are capped at order 3")
    X = np.atleast_2d(np.asarray(X, float))
    plans = []
    for q in range(q_max + 1):
        for mu in multi_indices(n, q):
            counts = np.bincount(np.asarray(mu, int), minlength=n) if q else np.zeros(n, int)
            offs, wts = [np.zeros(n)], [1.0]
            for axis in range(n):
                o1, w1 = _STENCILS[int(counts[axis])]
                offs = [o + oo * np.eye(n)[axis] for o in offs for oo in o1]
                wts = [w * ww for w in wts for ww in w1]
            plans.append((q, np.asarray(offs), np.asarray(wts)))
    # one batched evaluation over every stencil point
    allo = np.concatenate([o for _, o, _ in plans]) * step
    vals = F(X[:, None, :] + allo[None, :, :])
    sups = [0.0] * (q_max + 1)
    k = 0
    for q, offs, wts in plans:
        deriv = np.einsum("s,psij->pij", wts, vals[:, k:k + len(offs)]) / step**q
        sups[q] = max(sups[q], float(np.max(np.abs(deriv))))
        k += len(offs)
    return sups


@dataclass
class QuasiBoundedReport:
    r0: float
    A: list
    points: list
    failures: list
    per_point: list = field(default_factory=list)

    def to_dict(self):
        return {"r0": self.r0, "A": self.A, "points": [list(map(float, p)) for p in self.points],
                "failures": self.failures, "per_point": self.per_point}


def deviation_norms(hp: ChartedMetric, radius, q_max, x_samples=12, step=None, rng_seed=0):
    """C^q sup norms of ``hp - hp(0)`` over a ball of the given radius."""
    n = hp.dim
    step = 0.05 * radius if step is None else step
    rng = np.random.default_rng(rng_seed)
    inner = Ball(np.zeros(n), radius - 2 * step * np.sqrt(n) if q_max else radius)
    X = np.concatenate([np.zeros((1, n)), inner.sample(rng, x_samples, 1.0)])
    base = hp.metric(np.zeros(n))

    def F(Y):
        return hp.metric(Y) - base

    sups = fd_derivative_sup(F, X, n, q_max, step)
    return list(np.maximum.accumulate(sups))


def quasi_bounded_check(m: ChartedMetric, p_samples: Sequence, r0, q_max=3, x_samples=12,
                        rng_seed=0, steps=128) -> QuasiBoundedReport:
    """Empirical ``A_q`` bounds of ``h_p - h(p)`` in ``h(p)``-orthonormal exponential charts."""
    if q_max > 3:
        raise ValueError("q_max is capped at 3")
    A = np.zeros(q_max + 1)
    failures, per_point = [], []
    for idx, p in enumerate(p_samples):
        try:
            hp = pullback_exp_metric(m, p, r0 * 1.2, orthonormal=True, steps=steps, rng_seed=rng_seed + idx)
        except (NotImmersion, LeftChart) as exc:
            failures.append({"p": list(map(float, p)), "error": type(exc).__name__})
            continue
        norms = deviation_norms(hp, r0, q_max, x_samples, rng_seed=rng_seed + idx)
        per_point.append(norms)
        A = np.maximum(A, norms)
    if failures and len(failures) == len(p_samples):
        raise NotImmersion("exp_p failed to be an immersion at every sampled point")
    return QuasiBoundedReport(float(r0), A.tolist(), [np.asarray(p, float) for p in p_samples],
                              failures, per_point)
