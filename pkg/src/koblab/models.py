"""Model manifolds and the JSON manifold spec loader."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import sympy
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

from .errors import SpecError
from .geometry import Ball, Box, ChartedMetric


def euclidean(n=2, half_width=1e3):
    def g(x):
        x = np.asarray(x, float)
        return np.broadcast_to(np.eye(n), x.shape[:-1] + (n, n)).copy()

    def dg(x):
        x = np.asarray(x, float)
        return np.zeros(x.shape[:-1] + (n, n, n))

    dom = Box(-half_width * np.ones(n), half_width * np.ones(n))
    return ChartedMetric(n, dom, g, dg, name=f"euclidean{n}", info={"kind": "euclidean", "curvature": 0.0})


def _conformal_ball(n, scale, name, curvature, radius=1.0):
    # g = scale * delta / (1 - |x|^2)^2
    eye = np.eye(n)

    def g(x):
        x = np.asarray(x, float)
        f = scale / (1.0 - np.einsum("...i,...i->...", x, x)) ** 2
        return f[..., None, None] * eye

    def dg(x):
        x = np.asarray(x, float)
        s = 1.0 - np.einsum("...i,...i->...", x, x)
        df = 4.0 * scale * x / s[..., None] ** 3
        return df[..., :, None, None] * eye

    return ChartedMetric(n, Ball(np.zeros(n), radius), g, dg, name=name,
                         info={"kind": name, "curvature": curvature})


def poincare_disc():
    """``|dz|^2 / (1 - |z|^2)^2`` on the unit disc, curvature -4."""
    return _conformal_ball(2, 1.0, "poincare_disc", -4.0)


def hyperbolic_ball(n=2):
    """``4 |dx|^2 / (1 - |x|^2)^2`` on the unit ball, curvature -1."""
    return _conformal_ball(n, 4.0, "hyperbolic_ball", -1.0)


def flat_torus(n=2, period=8.0):
    periods = tuple(float(period) for _ in range(n)) if np.isscalar(period) else tuple(map(float, period))
    base = euclidean(n)
    dom = Box(np.zeros(n), np.asarray(periods), periodic=np.ones(n, bool))
    return ChartedMetric(n, dom, base.g, base.dg, name="flat_torus", periods=periods,
                         info={"kind": "flat_torus", "curvature": 0.0})


# --------------------------------------------------------------------------
# expression metrics

_FUNCS = {"exp": sympy.exp, "log": sympy.log, "sin": sympy.sin, "cos": sympy.cos,
          "sinh": sympy.sinh, "cosh": sympy.cosh}


def parse_expression(text, dim):
    """Parse ``text`` over variables ``x1..x{dim}`` with ``+ - * / ^`` and a
    small set of elementary functions."""
    symbols = {f"x{i + 1}": sympy.Symbol(f"x{i + 1}", real=True) for i in range(dim)}
    local = dict(symbols)
    local.update(_FUNCS)
    text = str(text)
    if "__" in text or "lambda" in text or ";" in text:
        raise SpecError(f"forbidden token in expression {text!r}")
    try:
        expr = parse_expr(text, local_dict=local, global_dict={"__builtins__": {}, "Integer": sympy.Integer,
                          "Float": sympy.Float, "Rational": sympy.Rational, "Symbol": sympy.Symbol},
                          transformations=standard_transformations + (convert_xor,), evaluate=True)
    except Exception as exc:  # sympy raises a zoo of types here
        raise SpecError(f"cannot parse expression {text!r}: {exc}") from None
    if not isinstance(expr, sympy.Expr):
        raise SpecError(f"not an arithmetic expression: {text!r}")
    unknown = {s.name for s in expr.free_symbols} - set(symbols)
    if unknown:
        raise SpecError(f"unknown variables {sorted(unknown)} in {text!r}")
    allowed = set(_FUNCS.values())
    for fn in expr.atoms(sympy.Function):
        if fn.func not in allowed:
            raise SpecError(f"function {fn.func} not allowed in {text!r}")
    return expr, [symbols[f"x{i + 1}"] for i in range(dim)]


def expression_metric(components, dim, domain, name="expression", periods=None):
    """Metric whose components are expression strings (upper triangle is enough)."""
    if len(components) != dim or any(len(row) != dim for row in components):
        raise SpecError("metric components must be a dim x dim table")
    funcs = {}
    for i in range(dim):
        for j in range(i, dim):
            text = components[i][j]
            if text is None:
                text = components[j][i]
            expr, syms = parse_expression(text, dim)
            funcs[i, j] = sympy.lambdify(syms, expr, "numpy")

    def g(x):
        x = np.asarray(x, float)
        out = np.empty(x.shape[:-1] + (dim, dim))
        args = [x[..., k] for k in range(dim)]
        for (i, j), f in funcs.items():
            out[..., i, j] = f(*args)
            out[..., j, i] = out[..., i, j]
        return out

    return ChartedMetric(dim, domain, g, None, name=name, periods=periods,
                         info={"kind": "expression", "components": components})


def warped_product(f_text="sinh(x1)", r_range=(0.05, 3.0)):
    """``dr^2 + f(r)^2 dtheta^2`` in the chart ``(x1, x2) = (r, theta)``."""
    comps = [["1", "0"], [None, f"({f_text})^2"]]
    dom = Box([r_range[0], 0.0], [r_range[1], 2 * np.pi], periodic=[False, True])
    m = expression_metric(comps, 2, dom, name="warped_product", periods=(None, 2 * np.pi))
    m.info.update({"kind": "warped_product", "f": f_text})
    return m


# --------------------------------------------------------------------------
# spec files

_SPEC_FIELDS = {"name", "dim", "kind", "params", "domain", "periodicity"}
_BUILTINS = {"euclidean", "poincare_disc", "hyperbolic_ball", "flat_torus", "warped_product"}


def _domain_from(d, dim):
    if not isinstance(d, dict):
        raise SpecError("domain must be an object")
    kind = d.get("type")
    extra = set(d) - {"type", "lo", "hi", "center", "radius"}
    if extra:
        raise SpecError(f"unknown domain fields {sorted(extra)}")
    try:
        if kind == "box":
            dom = Box(d["lo"], d["hi"])
        elif kind == "ball":
            dom = Ball(d.get("center", [0.0] * dim), d["radius"])
        else:
            raise SpecError(f"unknown domain type {kind!r}")
    except (KeyError, ValueError) as exc:
        raise SpecError(f"bad domain: {exc}") from None
    if dom.dim != dim:
        raise SpecError("domain dimension does not match dim")
    return dom


def metric_from_spec(spec: dict) -> ChartedMetric:
    if not isinstance(spec, dict):
        raise SpecError("manifold spec must be a JSON object")
    extra = set(spec) - _SPEC_FIELDS
    if extra:
        raise SpecError(f"unknown spec fields {sorted(extra)}")
    kind = spec.get("kind")
    params = spec.get("params") or {}
    if not isinstance(params, dict):
        raise SpecError("params must be an object")
    dim = spec.get("dim")
    if kind not in ("builtin", "expression") and kind not in _BUILTINS:
        raise SpecError(f"unknown kind {kind!r}")
    model = params.get("model", spec.get("name")) if kind == "builtin" else kind

    try:
        if model == "euclidean":
            m = euclidean(int(dim or 2), float(params.get("half_width", 1e3)))
        elif model == "poincare_disc":
            m = poincare_disc()
        elif model == "hyperbolic_ball":
            m = hyperbolic_ball(int(dim or 2))
        elif model == "flat_torus":
            periods = spec.get("periodicity") or params.get("period", 8.0)
            m = flat_torus(int(dim or 2), periods)
        elif model == "warped_product":
            m = warped_product(params.get("f", "sinh(x1)"), tuple(params.get("r_range", (0.05, 3.0))))
        elif model == "expression":
            if dim is None or "g" not in params:
                raise SpecError("expression metrics need dim and params.g")
            dom = _domain_from(spec.get("domain") or {}, int(dim))
            periods = spec.get("periodicity")
            if periods is not None:
                periods = tuple(None if p in (None, 0) else float(p) for p in periods)
                dom.periodic = np.array([p is not None for p in periods])
            m = expression_metric(params["g"], int(dim), dom, name=spec.get("name", "expression"),
                                  periods=periods)
        else:
            raise SpecError(f"unknown builtin model {model!r}")
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SpecError):
            raise
        raise SpecError(str(exc)) from None

    if dim is not None and int(dim) != m.dim:
        raise SpecError(f"{model} has dimension {m.dim}, spec says {dim}")
    if kind != "expression" and spec.get("domain") is not None:
        dom = _domain_from(spec["domain"], m.dim)
        m = ChartedMetric(m.dim, dom, m.g, m.dg, m.name, m.periods, m.fd_step, dict(m.info))
    return m


def load_spec(path) -> ChartedMetric:
    try:
        spec = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read spec {path}: {exc}") from None
    return metric_from_spec(spec)
