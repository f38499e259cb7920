"""Discretized maps from the unit disc, Dirichlet energy and harmonic relaxation."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import kernels
from .errors import DegeneratePlane, JetDrift, LeftChart, NoConvergence, OutOfChart
from .geometry import ChartedMetric, _solve_small, geodesic_exp

TOL_H = 1e-4
TOL_C = 1e-2


@dataclass(frozen=True, eq=False)
class DiscGrid:
    """Cartesian lattice of spacing ``h = 2/(N-1)`` on the unit disc.

    Interior nodes are the lattice points strictly inside the unit circle.
    Wherever a lattice edge leaves the disc, a boundary node is placed on the
    unit circle at the crossing, so every interior node has four neighbours
    (+x, -x, +y, -y) at distances ``nbr_len <= h``.  ``edges`` lists each
    stencil arm once, with its length in ``edge_len``.
    """

    N: int
    h: float
    nodes: np.ndarray
    n_interior: int
    nbr: np.ndarray
    nbr_len: np.ndarray
    origin: int
    lattice: dict
    edges: np.ndarray
    edge_len: np.ndarray

    @property
    def interior(self):
        return np.arange(self.n_interior)

    @property
    def boundary(self):
        return np.arange(self.n_interior, len(self.nodes))


def _crossing(x, y, di, dj):
    # distance from (x, y) to the unit circle along the unit step (di, dj)
    along, across = (x, y) if di else (y, x)
    reach = np.sqrt(1.0 - across**2)
    return reach - along if (di or dj) > 0 else along + reach


@lru_cache(maxsize=16)
def disc_grid(N=65) -> DiscGrid:
    N = int(N)
    if N < 5 or N % 2 == 0:
        raise ValueError("grid resolution must be an odd integer >= 5")
    K = (N - 1) // 2
    h = 1.0 / K
    inner = sorted((i, j) for i in range(-K, K + 1) for j in range(-K, K + 1) if i * i + j * j < K * K)
    index = {ij: k for k, ij in enumerate(inner)}
    ni = len(inner)
    nodes = [(i * h, j * h) for i, j in inner]
    nbr = np.zeros((ni, 4), np.int64)
    nbr_len = np.full((ni, 4), h)
    for a, (i, j) in enumerate(inner):
        for s, (di, dj) in enumerate(((1, 0), (-1, 0), (0, 1), (0, -1))):
            b = index.get((i + di, j + dj))
            if b is None:
                x, y = i * h, j * h
                ell = min(float(_crossing(x, y, di, dj)), h)
                nodes.append((x + ell * di, y + ell * dj))
                b = len(nodes) - 1
                nbr_len[a, s] = ell
            nbr[a, s] = b
    nodes = np.asarray(nodes, float)
    a = np.repeat(np.arange(ni), 4)
    b = nbr.ravel()
    once = (b >= ni) | (a < b)
    edges = np.stack([a[once], b[once]], axis=1)
    edge_len = nbr_len.ravel()[once]
    for arr in (nodes, nbr, nbr_len, edges, edge_len):
        arr.setflags(write=False)
    return DiscGrid(N, h, nodes, ni, nbr, nbr_len, index[(0, 0)], index, edges, edge_len)


@lru_cache(maxsize=16)
def _laplacian_matrix(N):
    """Scalar Shortley-Weller Laplacian on the interior unknowns (CSC)."""
    grid = disc_grid(N)
    ni = grid.n_interior
    rows, cols, vals = [], [], []
    idx = np.arange(ni)
    for p, q in ((0, 1), (2, 3)):
        span = grid.nbr_len[:, p] + grid.nbr_len[:, q]
        for s in (p, q):
            c = 2.0 / (span * grid.nbr_len[:, s])
            b = grid.nbr[:, s]
            keep = b < ni
            rows += [idx[keep], idx]
            cols += [b[keep], idx]
            vals += [c[keep], -c]
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(ni, ni))
    return A.tocsc()


@lru_cache(maxsize=16)
def _laplacian_lu(N):
    """Factorized scalar Laplacian."""
    return splu(_laplacian_matrix(N), permc_spec="MMD_AT_PLUS_A")


@lru_cache(maxsize=16)
def _vector_laplacian(N, n):
    """Scalar Laplacian acting componentwise on ``n``-vector unknowns."""
    return sp.kron(_laplacian_matrix(N), sp.identity(n), format="csc")


class DiscMap:
    """Values of a map from ``grid`` into the chart of ``target``.

    Values are read-only once constructed.  On periodic targets the values
    are lifts to the universal cover; the metric wraps them on evaluation.
    """

    def __init__(self, grid: DiscGrid, target: ChartedMetric, values, check=True):
        values = np.array(values, dtype=float)
        if values.shape != (len(grid.nodes), target.dim):
            raise ValueError(f"values must have shape {(len(grid.nodes), target.dim)}")
        if check and not np.all(target.contains(values)):
            raise OutOfChart("disc values leave the target chart")
        values.setflags(write=False)
        self.grid = grid
        self.target = target
        self.values = values

    @classmethod
    def from_function(cls, grid, target, fn, check=True):
        return cls(grid, target, fn(grid.nodes), check=check)

    def with_values(self, values, check=True):
        return DiscMap(self.grid, self.target, values, check=check)

    def derivatives(self):
        """Central differences ``(u_x, u_y)`` at the interior nodes."""
        ux, uy, _ = kernels.stencil(self.values, self.grid.nbr, self.grid.nbr_len)
        return ux, uy

    def jet(self):
        """``du(0)`` as an ``n x 2`` matrix."""
        ux, uy = self.derivatives()
        o = self.grid.origin
        return np.stack([ux[o], uy[o]], axis=1)

    @property
    def center(self):
        return self.values[self.grid.origin]

    def evaluate(self, w):
        """Bilinear interpolation at parameter points ``w`` (``(..., 2)``); NaN
        where the surrounding lattice cell has a corner outside the disc."""
        w = np.asarray(w, float)
        g = self.grid
        s = w / g.h
        i0 = np.floor(s[..., 0]).astype(int)
        j0 = np.floor(s[..., 1]).astype(int)
        fx = s[..., 0] - i0
        fy = s[..., 1] - j0
        out = np.zeros(w.shape[:-1] + (self.values.shape[1],))
        ok = np.ones(w.shape[:-1], bool)
        for di, dj, wt in ((0, 0, (1 - fx) * (1 - fy)), (1, 0, fx * (1 - fy)),
                           (0, 1, (1 - fx) * fy), (1, 1, fx * fy)):
            idx = np.vectorize(lambda a, b: g.lattice.get((int(a), int(b)), -1), otypes=[int])(i0 + di, j0 + dj)
            ok &= idx >= 0
            out += wt[..., None] * self.values[np.where(idx >= 0, idx, 0)]
        out[~ok] = np.nan
        return out

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["node_x", "node_y"] + [f"u_{k + 1}" for k in range(self.values.shape[1])])
            for x, u in zip(self.grid.nodes, self.values):
                wr.writerow([repr(float(x[0])), repr(float(x[1]))] + [repr(float(c)) for c in u])


def read_disc_csv(path, target: ChartedMetric) -> DiscMap:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    head, body = rows[0], np.array(rows[1:], float)
    n = len(head) - 2
    nodes = body[:, :2]
    K = int(round(1.0 / np.min(np.abs(nodes[np.abs(nodes) > 1e-12]))))
    grid = disc_grid(2 * K + 1)
    if len(grid.nodes) != len(nodes) or not np.allclose(grid.nodes, nodes):
        raise ValueError("CSV nodes do not match a disc grid")
    if n != target.dim:
        raise ValueError("CSV dimension does not match target")
    return DiscMap(grid, target, body[:, 2:])


@dataclass
class SolveReport:
    energy: float
    tension_residual: float
    conformality_defect: float
    iterations: int
    converged: bool
    energy_trace: list = field(default_factory=list, repr=False)
    jet_drift: float | None = None
    center_error: float | None = None

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


# --------------------------------------------------------------------------
# energies


def _energy_values(grid, m, values):
    a, b = grid.edges[:, 0], grid.edges[:, 1]
    d = values[b] - values[a]
    g = m.metric(0.5 * (values[a] + values[b]))
    return float(np.einsum("e,ei,eij,ej->", grid.h / grid.edge_len, d, g, d))


def energy(u: DiscMap) -> float:
    """Dirichlet energy by midpoint quadrature on lattice edges: each edge
    contributes ``(h / length) g(midpoint)(du, du)``, the central difference
    of ``u`` along the edge integrated over an ``h``-wide strip."""
    return _energy_values(u.grid, u.target, u.values)


def _tension_values(grid, m, values):
    ux, uy, lap = kernels.stencil(values, grid.nbr, grid.nbr_len)
    x = values[:grid.n_interior]
    # sum of Gamma(v, v) over v = ux, uy is g^{-1} r with
    # r_j = S_ai (d_a g_ij - 1/2 d_j g_ai), S = ux ux^T + uy uy^T
    g = m.metric(x)
    dg = m.metric_derivative(x)
    S = ux[:, :, None] * ux[:, None, :] + uy[:, :, None] * uy[:, None, :]
    rhs = np.einsum("pai,paij->pj", S, dg) - 0.5 * np.einsum("pai,pjai->pj", S, dg)
    return lap + _solve_small(g, rhs)


def tension_field(u: DiscMap) -> np.ndarray:
    """Discrete tension ``Lap u + Gamma(u)(u_x, u_x) + Gamma(u)(u_y, u_y)`` at
    every node (zero on the boundary), with the Shortley-Weller Laplacian."""
    tau = np.zeros_like(u.values)
    tau[:u.grid.n_interior] = _tension_values(u.grid, u.target, u.values)
    return tau


def tension_residual(u: DiscMap) -> float:
    tau = tension_field(u)
    return float(np.max(np.abs(tau))) if tau.size else 0.0


# --------------------------------------------------------------------------
# conformality


def conformality_profile(u: DiscMap, eps_reg=1e-12):
    """Nodewise ``|Hopf differential| / energy density`` in ``[0, 1]``; also
    returns ``|u_x|_g^2`` and ``|u_y|_g^2``."""
    ux, uy = u.derivatives()
    gi = u.target.metric(u.values[:u.grid.n_interior])
    a = np.einsum("pi,pij,pj->p", ux, gi, ux)
    b = np.einsum("pi,pij,pj->p", uy, gi, uy)
    c = np.einsum("pi,pij,pj->p", ux, gi, uy)
    return np.sqrt((a - b) ** 2 + 4 * c**2) / (a + b + eps_reg), a, b


def conformality_defect(u: DiscMap, eps_reg=1e-12) -> float:
    d, _, _ = conformality_profile(u, eps_reg)
    return float(d.max()) if d.size else 0.0


def weakly_conformal_check(u: DiscMap, tol_c=TOL_C):
    """Pass iff every interior node is conformal within ``tol_c`` or is a
    (near) branch point; returns the flag and the fitted factor ``phi``."""
    d, a, b = conformality_profile(u)
    branch = (np.sqrt(a) <= tol_c) & (np.sqrt(b) <= tol_c)
    ok = (d <= tol_c) | branch
    phi = 0.5 * (a + b)
    return bool(np.all(ok)), phi


# --------------------------------------------------------------------------
# relaxation


ENERGY_SLACK = 1e-4
MU_START = 1.0  # initial damping; undamped Newton overshoots from far seeds
MU_MIN = 0.25  # smallest nonzero damping of the Newton step
MAX_DAMPING = 4  # damped solves per step before the Laplacian fallback


@lru_cache(maxsize=16)
def _jacobian_pattern(N):
    """Five-colouring ``(i + 2j) mod 5`` of the interior lattice (each closed
    stencil neighbourhood holds one node of every colour) and the
    ``(row node, column node)`` pairs of the stencil Jacobian."""
    grid = disc_grid(N)
    ni = grid.n_interior
    lat = np.zeros((ni, 2), int)
    for (i, j), k in grid.lattice.items():
        lat[k] = (i, j)
    colour = (lat[:, 0] + 2 * lat[:, 1]) % 5
    r = [np.arange(ni)]
    c = [np.arange(ni)]
    for s in range(4):
        b = grid.nbr[:, s]
        keep = b < ni
        r.append(b[keep])
        c.append(np.arange(ni)[keep])
    return colour, np.concatenate(r), np.concatenate(c)


def _tension_jacobian(grid, m, vals, tau):
    """Sparse finite-difference Jacobian of the interior tension, from one
    tension evaluation per colour and component."""
    ni, n = grid.n_interior, m.dim
    colour, rows, cols = _jacobian_pattern(grid.N)
    eps = 1e-7 * max(1.0, float(np.max(np.abs(vals[:ni]))))
    D = np.empty((5, n, ni, n))
    for c in range(5):
        pick = colour == c
        for a in range(n):
            trial = vals.copy()
            trial[:ni][pick, a] += eps
            D[c, a] = (_tension_values(grid, m, trial) - tau) / eps
    blocks = D[colour[cols], :, rows, :]  # (pairs, a, b)
    a_idx, b_idx = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    R = rows[:, None, None] * n + b_idx[None]
    C = cols[:, None, None] * n + a_idx[None]
    return sp.csc_matrix((blocks.ravel(), (R.ravel(), C.ravel())), shape=(ni * n, ni * n))


def _damped_step(grid, J, tau, mu):
    """Solve ``(J + mu L) d = -tau`` with ``L`` the componentwise Laplacian;
    ``mu = 0`` is the Newton step, large ``mu`` tends to a short Laplacian
    step."""
    A = J if mu == 0 else (J + mu * _vector_laplacian(grid.N, tau.shape[1])).tocsc()
    try:
        with np.errstate(all="ignore"):
            lu = splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.1, options={"SymmetricMode": True})
            d = lu.solve(-tau.ravel())
    except (RuntimeError, ValueError):
        return None
    return d.reshape(tau.shape) if np.all(np.isfinite(d)) else None


def harmonic_relax(seed: DiscMap, boundary=None, tol_h=TOL_H, max_iter=50, strict=False,
                   max_halvings=20):
    """Relax ``seed`` towards a harmonic map with frozen boundary values.

    Each step solves ``(J + mu L) d = -tau`` with the sparse tension Jacobian
    ``J`` and the Laplacian ``L``; ``mu`` shrinks after full steps and grows
    after halved or rejected ones, with the Laplacian-preconditioned tension
    step as the last resort.  Steps are damped by halving.  A step is
    accepted when the energy does not increase, or when it lowers the
    tension residual while keeping the energy within ``ENERGY_SLACK``
    (relative) of the lowest energy reached so far; the quadrature energy
    and the discrete tension agree only up to discretization error.  Returns ``(DiscMap, SolveReport)``; without
    convergence the best iterate is returned with ``converged=False``
    (``strict=True`` raises ``NoConvergence`` instead).
    """
    grid, m = seed.grid, seed.target
    ni = grid.n_interior
    vals = np.array(seed.values)
    if boundary is not None:
        boundary = np.asarray(boundary, float)
        if not np.allclose(boundary, vals[ni:], rtol=0, atol=1e-12):
            raise ValueError("seed does not respect the prescribed boundary values")
    E = _energy_values(grid, m, vals)
    tau = _tension_values(grid, m, vals)
    trace = [E]
    E_low = E
    mu = MU_START
    it = 0
    converged = False
    while True:
        res = float(np.max(np.abs(tau))) if tau.size else 0.0
        if res <= tol_h:
            converged = True
            break
        if it >= max_iter:
            break
        with np.errstate(all="ignore"):
            J = _tension_jacobian(grid, m, vals, tau)
        fallback = -_laplacian_lu(grid.N).solve(tau)
        accepted = False
        for attempt in range(MAX_DAMPING + 1):
            d = _damped_step(grid, J, tau, mu) if attempt < MAX_DAMPING else fallback
            if d is None:
                mu = max(4.0 * mu, MU_MIN)
                continue
            lam = 1.0
            for _ in range(max_halvings + 1):
                trial = vals.copy()
                trial[:ni] += lam * d
                if np.all(m.contains(trial[:ni])):
                    E_new = _energy_values(grid, m, trial)
                    if E_new <= E_low + ENERGY_SLACK * abs(E_low):
                        tau_new = _tension_values(grid, m, trial)
                        if E_new <= E + 1e-13 * abs(E) or np.max(np.abs(tau_new)) < res:
                            accepted = True
                            break
                lam *= 0.5
            if accepted and lam == 1.0:
                mu = 0.0 if mu <= MU_MIN else mu / 4.0
                break
            # a short step signals an over-long direction: damp harder
            mu = max(4.0 * mu, MU_MIN)
            if accepted:
                break
        if not accepted:
            if not np.all(m.contains(vals[:ni] + lam * fallback)):
                raise LeftChart("relaxation iterate left the chart after repeated step halving")
            break  # no acceptable step left at working precision
        vals, E, tau = trial, E_new, tau_new
        E_low = min(E_low, E)
        trace.append(E)
        it += 1
    out = seed.with_values(vals)
    report = SolveReport(energy(out), res, conformality_defect(out), it, converged, trace)
    if strict and not converged:
        raise NoConvergence(f"tension residual {res:.3g} above {tol_h:g} after {it} iterations")
    return out, report


# --------------------------------------------------------------------------
# discs with a prescribed 1-jet


def orthonormalize(m: ChartedMetric, p, v, w, tol=1e-10):
    g = m.metric(np.asarray(p, float))
    v = np.asarray(v, float)
    w = np.asarray(w, float)
    nv = np.sqrt(v @ g @ v)
    if nv <= tol:
        raise DegeneratePlane("first vector vanishes")
    v = v / nv
    w = w - (v @ g @ w) * v
    nw = np.sqrt(max(w @ g @ w, 0.0))
    if nw <= tol * max(1.0, np.sqrt(np.asarray(w) @ g @ np.asarray(w))):
        raise DegeneratePlane("vectors are colinear")
    return v, w / nw


def seed_disc(m, p, v, w, r, grid, steps=16):
    """Normal-coordinate affine disc ``z -> exp_p(r (x v + y w))``, shot with
    ``steps`` RK4 steps in one batch.  Relaxation keeps whatever boundary it
    is given, so shooting accuracy only affects the starting point."""
    X = r * (grid.nodes[:, :1] * v + grid.nodes[:, 1:] * w)
    vals = geodesic_exp(m, np.broadcast_to(p, X.shape), X, steps=steps)
    return DiscMap(grid, m, vals)


def relax_centred(seed: DiscMap, p, tol_h=TOL_H, max_iter=50, recentre_iter=6, centre_tol=1e-9):
    """Relax ``seed`` with its own boundary, translating the whole disc in the
    chart and relaxing again until its centre lands on ``p``; the origin
    value is then set to ``p`` exactly."""
    m, grid = seed.target, seed.grid
    p = np.asarray(p, float)
    g0 = m.metric(p)
    for _ in range(recentre_iter):
        u, rep = harmonic_relax(seed, tol_h=tol_h, max_iter=max_iter)
        shift = p - u.center
        cerr = float(np.sqrt(shift @ g0 @ shift))
        if cerr <= centre_tol or not rep.converged:
            break  # centred, or recentring cannot rescue a failed solve
        moved = u.values + shift
        if not np.all(m.contains(moved)):
            break
        seed = u.with_values(moved)
    vals = np.array(u.values)
    vals[grid.origin] = p
    u = u.with_values(vals)
    rep.tension_residual = tension_residual(u)
    rep.conformality_defect = conformality_defect(u)
    rep.converged = rep.converged and rep.tension_residual <= tol_h
    rep.center_error = cerr
    return u, rep


def jet_disc(m: ChartedMetric, p, v, w, r, N=65, tol_h=TOL_H, tol_c=TOL_C, jet_const=1.0,
             max_iter=50, recentre_iter=6, steps=16):
    """Harmonic disc with ``u(0) = p`` tangent to ``span(v, w)`` at ``p``.

    ``v`` and ``w`` are orthonormalized against ``g(p)``; the seed is the
    normal-coordinate disc of radius ``r``, relaxed with its own boundary and
    recentred by ``relax_centred``.
    """
    if not r > 0:
        raise ValueError("disc radius must be positive")
    p = np.asarray(p, float)
    m.require(p)
    v, w = orthonormalize(m, p, v, w)
    grid = disc_grid(N)
    g0 = m.metric(p)
    seed = seed_disc(m, p, v, w, r, grid, steps)
    u, rep = relax_centred(seed, p, tol_h, max_iter, recentre_iter, 1e-9 * max(r, 1.0))
    D = u.jet()
    diff = D[:, 0] - r * v
    rep.jet_drift = float(np.sqrt(diff @ g0 @ diff) / r)
    tau_jet = max(tol_c, jet_const * r**2)
    if rep.jet_drift > tau_jet:
        raise JetDrift(f"1-jet drift {rep.jet_drift:.3g} exceeds {tau_jet:.3g}")
    return u, rep


def is_admissible(rep: SolveReport, tol_h=TOL_H, tol_c=TOL_C):
    return bool(rep.converged and rep.tension_residual <= tol_h and rep.conformality_defect <= tol_c)
