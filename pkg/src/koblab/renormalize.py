"""Renormalization: MPSH tests, the capped family ``Psi_q``, Sibony's Schwarz
lemma, Zalcman rescaling and Brody limits.

Maps of the unit disc are plain callables ``f(t)`` taking complex arrays
and returning chart points of shape ``t.shape + (n,)``; on periodic targets
they return lifts, and displacements are taken modulo the periods.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import disc as _disc
from . import kernels
from .errors import (
    ABudgetExceeded,
    ChartTooSmall,
    ExtractionFailed,
    KoblabError,
    PreconditionFailed,
    WitnessInvalid,
)
from .geometry import Ball, Box, ChartedMetric, geodesic_exp, geodesic_log, orthonormal_frame

TAU_SH = 1e-3
CAP_RADIUS = 3.0
NONCONSTANT = "NONCONSTANT_LIMIT"
INCONCLUSIVE = "INCONCLUSIVE"


# --------------------------------------------------------------------------
# MPSH


def mpsh_test(rho: Callable, discs, tau_sh=TAU_SH):
    """Discrete sub-mean-value test of ``rho o u`` on every disc.

    Returns ``(passed, worst)`` with ``worst = (defect, disc index, node)``.
    Nodes where ``rho o u = -inf`` pass vacuously."""
    return _submean_test([np.asarray(rho(u.values), float) for u in discs], discs, tau_sh)


def _submean_test(composed, discs, tau_sh):
    worst = (math.inf, -1, -1)
    for k, (f, u) in enumerate(zip(composed, discs)):
        g = u.grid
        with np.errstate(invalid="ignore"):
            d = kernels.sub_mean_defect(np.where(np.isfinite(f), f, -1e300), g.nbr, g.nbr_len,
                                        np.arange(g.n_interior), g.h)
        d = np.where(np.isneginf(f[:g.n_interior]), math.inf, d)
        j = int(np.argmin(d))
        if d[j] < worst[0]:
            worst = (float(d[j]), k, j)
    return worst[0] >= -tau_sh, worst


def log_normal_radius(m: ChartedMetric, p, steps=32):
    """``x -> |exp_p^{-1}(x)|_{g(p)}``, the radius in normal coordinates at ``p``."""
    p = np.asarray(p, float)
    g0 = m.metric(p)

    def r(x):
        x = np.asarray(x, float)
        V = geodesic_log(m, p, x.reshape(-1, m.dim), steps=steps)
        return np.sqrt(np.einsum("pi,ij,pj->p", V, g0, V)).reshape(x.shape[:-1])

    return r


def stress_family(m: ChartedMetric, p, count=20, N=33, rng_seed=0, distance=(0.15, 0.35), steps=32):
    """Jet discs near ``p`` that stay clear of it: centres at normal distance
    ``delta`` in ``distance``, random planes, radius ``delta/2``."""
    p = np.asarray(p, float)
    rng = np.random.default_rng(rng_seed)
    F = orthonormal_frame(m, p)
    discs, attempts = [], 0
    while len(discs) < count and attempts < 5 * count:
        attempts += 1
        delta = rng.uniform(*distance)
        e = rng.standard_normal(m.dim)
        q = geodesic_exp(m, p, delta * F @ (e / np.linalg.norm(e)), steps=steps)
        v, w = rng.standard_normal((2, m.dim))
        try:
            u, rep = _disc.jet_disc(m, q, v, w, 0.5 * delta, N=N)
        except KoblabError:
            continue
        if _disc.is_admissible(rep):
            discs.append(u)
    if len(discs) < count:
        raise ABudgetExceeded(f"only {len(discs)} admissible stress discs near {p.tolist()}")
    return discs


def find_log_A(m: ChartedMetric, p, disc_budget=20, A0=0.25, A_max=1024.0, tau_sh=TAU_SH, N=33, rng_seed=0,
               discs=None):
    """Smallest ``A = A0 * 2^j <= A_max`` for which ``log r + A r`` (``r`` the
    normal-coordinate radius at ``p``) passes ``mpsh_test`` on a stress family."""
    discs = discs if discs is not None else stress_family(m, p, disc_budget, N, rng_seed)
    rad = log_normal_radius(m, p)
    radii = [rad(u.values) for u in discs]
    A = A0
    while A <= A_max:
        with np.errstate(divide="ignore"):
            ok, _ = _submean_test([np.log(r) + A * r for r in radii], discs, tau_sh)
        if ok:
            return A
        A *= 2.0
    raise ABudgetExceeded(f"no A <= {A_max:g} passes the MPSH test")


def log_mpsh_function(m: ChartedMetric, p, A):
    """``x -> log r(x) + A r(x)`` with ``r`` the normal radius at ``p``."""
    rad = log_normal_radius(m, p)

    def phi(x):
        r = rad(x)
        with np.errstate(divide="ignore"):
            return np.log(r) + A * r

    return phi


# --------------------------------------------------------------------------
# the capped family


def _smooth_step(x):
    x = np.clip(x, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


def psi(t):
    """Smooth nondecreasing cut-off: ``t`` on ``[0, 1/2]``, ``1`` from ``3/4`` on."""
    t = np.asarray(t, float)
    s = _smooth_step(4.0 * (t - 0.5))
    return (1.0 - s) * t + s


def _wrap(m, d):
    if m is not None and m.periods is not None:
        d = np.array(d, float)
        for k, L in enumerate(m.periods):
            if L:
                d[..., k] -= L * np.round(d[..., k] / L)
    return d


def _check_cap(m, q, scale):
    """The chart must contain the radius-3 ball (scaled coordinates) around ``q``."""
    if m is None:
        return
    q = np.asarray(q, float)
    r = CAP_RADIUS / scale
    dom = m.domain
    if isinstance(dom, Ball):
        if dom.shape is not None:
            ev = np.linalg.eigvalsh(dom.shape)
            room = (dom.radius - np.sqrt(dom._sq(q - dom.center))) / math.sqrt(ev[-1])
        else:
            room = dom.radius - np.linalg.norm(q - dom.center, axis=-1)
        ok = room > r
    elif isinstance(dom, Box):
        room = np.minimum(q - dom.lo, dom.hi - q)
        half = 0.5 * (dom.hi - dom.lo)
        ok = np.all(np.where(dom.periodic, half > r, room > r), axis=-1)
    else:
        ok = True
    if not np.all(ok):
        raise ChartTooSmall(f"chart does not contain the radius-{CAP_RADIUS:g} ball around the base point")


def psi_cap(q_point, A, m: ChartedMetric | None = None, scale=1.0):
    """``Psi_q(x) = psi(|x - q|^2) exp(A psi(|x - q|))`` in chart coordinates
    multiplied by ``scale``; equal to ``exp(A)`` once ``|x - q|^2 >= 3/4``."""
    q = np.asarray(q_point, float)
    _check_cap(m, q, scale)

    def Psi(x):
        d = scale * np.linalg.norm(_wrap(m, np.asarray(x, float) - q), axis=-1)
        return psi(d * d) * np.exp(A * psi(d))

    return Psi


@dataclass
class SchwarzFamily:
    """Basepoint-indexed displacement functions with Schwarz constants.

    ``s(tau) = c tau^2 / alpha_plus^2``: if ``J <= c`` on ``alpha_plus`` times
    the disc and ``log J`` is subharmonic there, Sibony's lemma bounds ``J``
    by this quadratic gauge."""

    J: Callable
    alpha_minus: float = 0.25
    alpha_plus: float = 0.5
    c: float = 0.25
    metric: ChartedMetric | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.alpha_minus < self.alpha_plus < 1:
            raise ValueError("need 0 < alpha_minus < alpha_plus < 1")
        if not self.c > 0:
            raise ValueError("threshold c must be positive")

    def s(self, tau):
        return self.c * np.asarray(tau, float) ** 2 / self.alpha_plus**2

    def check_axioms(self, points, taus=(0.1, 0.05, 0.01), n_dirs=16, n_radii=4):
        """``J(eta, eta) = 0`` and the sup of ``J(eta, eta + d)`` over chart
        displacements ``|d| <= tau`` for each ``tau``."""
        pts = np.atleast_2d(np.asarray(points, float))
        n = pts.shape[1]
        rng = np.random.default_rng(0)
        dirs = rng.standard_normal((n_dirs, n))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        zero = float(np.max(np.abs(self.J(pts, pts))))
        sups = []
        for tau in taus:
            radii = tau * np.arange(1, n_radii + 1) / n_radii
            d = (radii[:, None, None] * dirs[None]).reshape(-1, n)
            eta = np.repeat(pts, len(d), axis=0)
            sups.append(float(np.max(self.J(eta, eta + np.tile(d, (len(pts), 1))))))
        return {"J_self": zero, "taus": list(taus), "sups": sups,
                "decreasing": all(a > b for a, b in zip(sups, sups[1:]))}


def psi_family(m: ChartedMetric | None, A_log, alpha_minus=0.25, alpha_plus=0.5, scale=1.0) -> SchwarzFamily:
    """The family ``J_eta = Psi_eta`` with cap exponent ``A = 2 A_log``, so
    ``log Psi = 2 (log r + A_log r)`` near the base point, and ``c = 1/4``,
    below ``Psi`` on the sphere ``r = 1/2``."""
    A = 2.0 * A_log

    def J(eta, eta_t):
        eta = np.asarray(eta, float)
        _check_cap(m, eta, scale)
        d = scale * np.linalg.norm(_wrap(m, np.asarray(eta_t, float) - eta), axis=-1)
        return psi(d * d) * np.exp(A * psi(d))

    return SchwarzFamily(J, alpha_minus, alpha_plus, 0.25, m, {"A": A, "A_log": A_log, "scale": scale})


# --------------------------------------------------------------------------
# Sibony


@dataclass
class SibonyReport:
    passed: bool
    max_excess: float
    laplacian_0: float
    identity_equality: bool
    laplacian_equality: bool
    precondition: dict
    violations: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def sibony_verify(u: Callable, N=65, tau=1e-6, lap_step=1e-3, circle_points=64, tau_pre=1e-9):
    """Check ``u <= |z|^2`` at the interior grid nodes and ``Delta u(0) <= 4``.

    Preconditions: ``0 <= u <= 1``, ``u(0) = 0`` and ``log u`` subharmonic,
    tested by circle means of radius ``h/2`` around each node (a zero of
    ``u`` at the centre passes vacuously).  ``u`` takes complex arrays."""
    grid = _disc.disc_grid(N)
    nodes = grid.nodes[:grid.n_interior]
    z = nodes[:, 0] + 1j * nodes[:, 1]
    vals = np.asarray(u(z), float)
    u0 = float(np.asarray(u(np.array([0j])), float)[0])
    bad = np.nonzero((vals < -tau_pre) | (vals > 1 + tau_pre))[0]
    if bad.size:
        raise PreconditionFailed("u must lie in [0, 1]", z[bad[0]])
    if abs(u0) > tau_pre:
        raise PreconditionFailed("u(0) must vanish", 0j)
    rad = 0.5 * grid.h
    th = 2 * np.pi * np.arange(circle_points) / circle_points
    # circles must stay inside the disc, where u is defined
    inner = np.abs(z) + rad < 1.0
    ring = z[inner, None] + rad * np.exp(1j * th)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        logc = np.log(vals[inner])
        mean = np.mean(np.log(np.asarray(u(ring), float)), axis=1)
    defect = np.where(np.isneginf(logc), math.inf, mean - logc)
    defect = np.where(np.isnan(defect), -math.inf, defect)
    j = int(np.argmin(defect))
    if defect[j] < -tau:
        raise PreconditionFailed(f"log u fails the sub-mean-value test by {-defect[j]:.3g}", z[inner][j])
    excess = vals - np.abs(z) ** 2
    viol = np.nonzero(excess > tau)[0]
    s = lap_step
    pts = np.array([s, -s, 1j * s, -1j * s])
    lap0 = float((np.sum(np.asarray(u(pts), float)) - 4 * u0) / (s * s))
    passed = bool(viol.size == 0 and lap0 <= 4 + tau)
    return SibonyReport(
        passed, float(np.max(excess)), lap0,
        bool(np.max(np.abs(excess)) <= tau), bool(abs(lap0 - 4) <= tau),
        {"range": True, "origin": True, "log_submean_worst": float(defect[j])},
        [[float(z[k].real), float(z[k].imag)] for k in viol[:20]])


# --------------------------------------------------------------------------
# Zalcman rescaling


def _as_map(f):
    if isinstance(f, _disc.DiscMap):
        return lambda t: f.evaluate(np.stack([np.real(t), np.imag(t)], axis=-1))
    return f


def _disp(family, f, a, b):
    """``J_{f(a)}(f(b))`` for complex arrays ``a``, ``b``."""
    return np.asarray(family.J(f(np.asarray(a, complex)), f(np.asarray(b, complex))), float)


@dataclass
class RescalingSequence:
    """Affine reparametrizations ``r_n(t) = t_n + kappa_n t`` with radii ``R_n``;
    ``g_n = f_n o r_n`` is defined on ``(R_n + alpha_plus)`` times the disc."""

    t: list
    kappa: list
    R: list
    J01: list
    worst_ratio: list
    maps: list = field(default_factory=list, repr=False)
    k: float = 0.0

    def g(self, n):
        f, t0, kap = self.maps[n], self.t[n], self.kappa[n]
        return lambda t: f(t0 + kap * np.asarray(t, complex))

    def contractions_ok(self):
        return all(abs(a) + abs(b) < 1 for a, b in zip(self.t, self.kappa))

    def kappa_decreasing(self):
        k = [abs(x) for x in self.kappa]
        return all(a > b for a, b in zip(k, k[1:]))

    def R_increasing(self):
        return all(a < b for a, b in zip(self.R, self.R[1:]))

    def to_dict(self):
        return {"k": self.k, "records": [
            {"n": n, "t": [float(self.t[n].real), float(self.t[n].imag)],
             "kappa": [float(self.kappa[n].real), float(self.kappa[n].imag)],
             "R": float(self.R[n]), "J01": float(self.J01[n]), "worst_ratio": float(self.worst_ratio[n])}
            for n in range(len(self.t))]}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _t_grid(radius=0.5, rings=6, per_ring=12):
    pts = [0j]
    for i in range(1, rings + 1):
        r = radius * i / (rings + 1)
        pts += list(r * np.exp(2j * np.pi * np.arange(per_ring) / per_ring))
    return sorted(pts, key=lambda c: (c.real, c.imag))


def _line_map(base, a, b):
    base, a, b = (np.asarray(x, float) for x in (base, a, b))
    return lambda t: base + np.asarray(t, complex).real[..., None] * a + np.asarray(t, complex).imag[..., None] * b


def affine_family(v0, count, base=None, w0=None):
    """``f_n(t) = base + n (Re t v0 + Im t w0)`` for ``n = 1..count``; ``w0``
    defaults to ``v0`` turned a quarter in its first two coordinates."""
    v0 = np.asarray(v0, float)
    if w0 is None:
        w0 = np.zeros_like(v0)
        w0[0], w0[1] = -v0[1], v0[0]
    base = np.zeros_like(v0) if base is None else np.asarray(base, float)
    return [_line_map(base, n * v0, n * np.asarray(w0, float)) for n in range(1, count + 1)]


def radial_family(count, dim=2):
    """``f_n(t) = (1 - 1/(n+1)) t`` in the first two coordinates, ``n = 1..count``."""
    e1, e2 = np.eye(dim)[0], np.eye(dim)[1]
    return [_line_map(np.zeros(dim), (1 - 1 / (n + 1)) * e1, (1 - 1 / (n + 1)) * e2)
            for n in range(1, count + 1)]


def scheduled_witness(count, kappa0=0.5):
    """Centred witness ``(0, kappa0 / n)`` for ``n = 1..count``."""
    return [(0j, complex(kappa0 / n)) for n in range(1, count + 1)]


def verify_witness(f_seq, family, k, witness):
    """Hypothesis check: ``2|t_n| + |kappa_n| < 1``, ``|kappa_n|`` strictly
    decreasing and ``J_{f_n(t_n)}(f_n(t_n + kappa_n)) >= k`` for every n."""
    maps = [_as_map(f) for f in f_seq]
    if len(witness) != len(maps):
        raise WitnessInvalid("witness length does not match the sequence")
    if not 0 < k <= 1:
        raise WitnessInvalid("threshold k must lie in (0, 1]")
    prev = math.inf
    for n, (f, (tt, kk)) in enumerate(zip(maps, witness)):
        tt, kk = complex(tt), complex(kk)
        if not 2 * abs(tt) + abs(kk) < 1:
            raise WitnessInvalid(f"n={n}: 2|t| + |kappa| >= 1")
        if not abs(kk) < prev:
            raise WitnessInvalid(f"n={n}: |kappa| is not strictly decreasing")
        prev = abs(kk)
        J = float(_disp(family, f, [tt], [tt + kk])[0])
        if not J >= k:
            raise WitnessInvalid(f"n={n}: J = {J:.4g} below k = {k:g}")


def find_witness(f_seq, family, k, kappa0=0.5, n_dirs=16):
    """Witness with ``|kappa_n| = kappa0 / (n + 1)`` maximizing ``J`` over a
    small grid, or None if some n stays below ``k``."""
    maps = [_as_map(f) for f in f_seq]
    ts = np.array(_t_grid(0.2, 2, 8))
    dirs = np.exp(2j * np.pi * np.arange(n_dirs) / n_dirs)
    out = []
    for n, f in enumerate(maps):
        kap = kappa0 / (n + 1)
        a = np.repeat(ts, n_dirs)
        b = a + kap * np.tile(dirs, len(ts))
        J = _disp(family, f, a, b)
        j = int(np.argmax(J))
        if not J[j] >= k:
            return None
        out.append((complex(a[j]), complex(b[j] - a[j])))
    return out


def _first_scale(family, f, t, k, n_dirs, bisect_iters):
    """Smallest ``rho < 1 - |t|`` with ``max_theta J_{f(t)}(f(t + rho e^{i theta})) >= k``
    (scan then bisection); returns ``(rho, theta)`` or None."""
    dirs = np.exp(2j * np.pi * np.arange(n_dirs) / n_dirs)
    top = 1.0 - abs(t)
    rhos = top * 2.0 ** (-np.arange(48, -1, -1) / 4.0)
    rhos[-1] = top * (1 - 1e-9)
    vals = _disp(family, f, np.full((len(rhos), n_dirs), t), t + rhos[:, None] * dirs[None, :]).max(axis=1)
    hit = np.nonzero(vals >= k)[0]
    if not hit.size:
        return None
    j = int(hit[0])
    hi = rhos[j]
    lo = rhos[j - 1] if j > 0 else 0.0
    for _ in range(bisect_iters):
        mid = 0.5 * (lo + hi)
        if _disp(family, f, np.full(n_dirs, t), t + mid * dirs).max() >= k:
            hi = mid
        else:
            lo = mid
    Jd = _disp(family, f, np.full(n_dirs, t), t + hi * dirs)
    # first near-maximal direction, so an isotropic J picks angle 0; then
    # nudge the scale until that direction itself reaches k
    j = int(np.nonzero(Jd >= Jd.max() * (1 - 1e-9))[0][0])
    for _ in range(100):
        if _disp(family, f, [t], [t + hi * dirs[j]])[0] >= k:
            break
        hi *= 1 + 1e-9
    return hi, dirs[j]


def zalcman_rescale(f_seq, family: SchwarzFamily, k, witness, t_grid=None, n_dirs=16, bisect_iters=50,
                    t_samples=64, u_samples=16, rng_seed=0) -> RescalingSequence:
    """Zalcman extraction: for each n pick ``t_n`` maximizing
    ``(1 - |t|) / rho_n(t)`` over ``t_grid``, where ``rho_n(t)`` is the first
    scale at which the displacement reaches ``k``; ``kappa_n = rho_n(t_n)``
    in the direction attaining it and ``R_n = (1 - |t_n|)/|kappa_n| - alpha_plus``.
    Verifies ``J_{g_n(0)}(g_n(1)) >= k`` and ``J_{g_n(t)}(g_n(t+u)) <= s(|u|)``
    on sampled ``|t| < R_n``, ``|u| < alpha_minus``."""
    verify_witness(f_seq, family, k, witness)
    maps = [_as_map(f) for f in f_seq]
    grid = t_grid if t_grid is not None else _t_grid()
    rng = np.random.default_rng(rng_seed)
    seq = RescalingSequence([], [], [], [], [], maps, k)
    for n, f in enumerate(maps):
        best = None
        for t in grid:  # lexicographic order, strict improvement: ties keep the first
            hit = _first_scale(family, f, complex(t), k, n_dirs, bisect_iters)
            if hit is None:
                continue
            rho, direction = hit
            weight = (1.0 - abs(t)) / rho
            if best is None or weight > best[0]:
                best = (weight, complex(t), rho * direction)
        if best is None:
            raise ExtractionFailed(f"n={n}: displacement never reaches k on the parameter grid")
        _, tn, kn = best
        Rn = (1.0 - abs(tn)) / abs(kn) - family.alpha_plus
        if not (Rn > 0 and abs(tn) + abs(kn) < 1):
            raise ExtractionFailed(f"n={n}: rescaling radius {Rn:.3g} is not positive")
        g = lambda t, f=f, tn=tn, kn=kn: f(tn + kn * np.asarray(t, complex))
        J01 = float(_disp(family, g, [0j], [1 + 0j])[0])
        if not J01 >= k:
            raise ExtractionFailed(f"n={n}: J(g(0), g(1)) = {J01:.4g} below k")
        ts = Rn * np.sqrt(rng.uniform(size=t_samples)) * np.exp(2j * np.pi * rng.uniform(size=t_samples))
        us = family.alpha_minus * np.sqrt(rng.uniform(size=u_samples)) * np.exp(2j * np.pi * rng.uniform(size=u_samples))
        a = np.repeat(ts, u_samples)
        du = np.tile(us, t_samples)
        try:
            Jv = _disp(family, g, a, a + du)
        except ChartTooSmall as exc:
            raise ExtractionFailed(f"n={n}: rescaled disc leaves the chart ({exc})") from exc
        bound = family.s(np.abs(du))
        ratio = float(np.max(np.where(bound > 0, Jv / np.where(bound > 0, bound, 1.0), np.where(Jv > 0, math.inf, 0.0))))
        if not np.all(Jv <= bound):
            raise ExtractionFailed(f"n={n}: Schwarz gauge violated (worst ratio {ratio:.4g})")
        seq.t.append(tn)
        seq.kappa.append(kn)
        seq.R.append(float(Rn))
        seq.J01.append(J01)
        seq.worst_ratio.append(ratio)
    return seq


def sup_displacement(f_seq, family, kappa, t_grid=None, n_dirs=16):
    """``max_n max_t max_theta J_{f_n(t)}(f_n(t + kappa e^{i theta}))``."""
    ts = np.array(t_grid if t_grid is not None else _t_grid(0.5, 3, 8))
    dirs = np.exp(2j * np.pi * np.arange(n_dirs) / n_dirs)
    a = np.repeat(ts, n_dirs)
    b = a + kappa * np.tile(dirs, len(ts))
    return max(float(np.max(_disp(family, _as_map(f), a, b))) for f in f_seq)


# --------------------------------------------------------------------------
# Brody limits


@dataclass
class BrodyResult:
    verdict: str
    reason: str = ""
    sequence: RescalingSequence | None = None
    cauchy: dict = field(default_factory=dict)
    J01: float | None = None
    tension: dict = field(default_factory=dict)
    conformal: dict = field(default_factory=dict)
    limits: dict = field(default_factory=dict, repr=False)

    def to_dict(self):
        return {"verdict": self.verdict, "reason": self.reason,
                "sequence": None if self.sequence is None else self.sequence.to_dict(),
                "cauchy": self.cauchy, "J01": self.J01, "tension": self.tension, "conformal": self.conformal}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def dump_limits(self, prefix):
        """Write each limit disc as ``{prefix}_R{radius}.csv``; returns the paths."""
        paths = []
        for R, u in sorted(self.limits.items()):
            path = f"{prefix}_R{R:g}.csv"
            u.to_csv(path)
            paths.append(path)
        return paths


def brody_extract(f_seq, family: SchwarzFamily, k, radius_list=(0.5, 1.0, 2.0), target: ChartedMetric | None = None,
                  witness=None, N=33, cauchy_tol=1e-6, tol_h=1e-6, tol_c=_disc.TOL_C, **rescale_kw) -> BrodyResult:
    """Rescale, then test the prefix of ``g_n`` for a nonconstant weakly
    conformal harmonic limit on discs of the given radii."""
    target = target or family.metric
    if target is None:
        raise ValueError("a target metric is needed for the harmonicity test")
    if witness is None:
        witness = find_witness(f_seq, family, k)
        if witness is None:
            return BrodyResult(INCONCLUSIVE, "no rescaling witness: the family looks equicontinuous")
    seq = zalcman_rescale(f_seq, family, k, witness, **rescale_kw)
    last = len(seq.t) - 1
    g_last = seq.g(last)
    cauchy, tension, conformal, limits = {}, {}, {}, {}
    ok = True
    for R in radius_list:
        usable = [n for n in range(len(seq.t)) if seq.R[n] >= R]
        grid = _disc.disc_grid(N)
        w = R * (grid.nodes[:, 0] + 1j * grid.nodes[:, 1])
        vals = [seq.g(n)(w) for n in usable]
        diffs = [float(np.max(np.abs(_wrap(target, b - a)))) for a, b in zip(vals, vals[1:])]
        tail = diffs[-3:]
        cauchy[str(R)] = {"used": len(usable), "diffs": diffs,
                          "ok": bool(len(tail) > 0 and max(tail) <= cauchy_tol)}
        ok &= cauchy[str(R)]["ok"]
        if not usable or usable[-1] != last:
            ok = False
            continue
        u = _disc.DiscMap(grid, target, g_last(w), check=False)
        fine = _disc.disc_grid(2 * N - 1)
        uf = _disc.DiscMap(fine, target, g_last(R * (fine.nodes[:, 0] + 1j * fine.nodes[:, 1])), check=False)
        tension[str(R)] = [_disc.tension_residual(u), _disc.tension_residual(uf)]
        conformal[str(R)] = [_disc.weakly_conformal_check(u, tol_c)[0], _disc.weakly_conformal_check(uf, tol_c)[0]]
        ok &= max(tension[str(R)]) <= tol_h and all(conformal[str(R)])
        limits[R] = u
    J01 = float(_disp(family, g_last, [0j], [1 + 0j])[0])
    ok &= J01 >= k / 2
    verdict = NONCONSTANT if ok else INCONCLUSIVE
    return BrodyResult(verdict, "" if ok else "limit tests failed", seq, cauchy, J01, tension, conformal, limits)


__all__ = [
    "BrodyResult", "INCONCLUSIVE", "NONCONSTANT", "RescalingSequence", "SchwarzFamily", "SibonyReport",
    "affine_family", "brody_extract", "find_log_A", "find_witness", "log_mpsh_function", "log_normal_radius",
    "mpsh_test", "psi", "psi_cap", "psi_family", "radial_family", "scheduled_witness", "sibony_verify",
    "stress_family", "sup_displacement", "verify_witness", "zalcman_rescale",
]
