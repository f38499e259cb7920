"""Command-line front end: ``koblab <command> --spec model.json [options]``.

Every command parameter is a ``--flag`` and may also come from a JSON file
given by ``--config``; unknown keys are rejected.  Flags override the file.
Outputs embed the resolved config and the package version and are
byte-identical for identical inputs; timings go to the log on stderr
(verbosity from ``KOBLAB_LOG``).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time

import numpy as np

from . import __version__
from . import disc as _disc
from . import kobayashi as K
from . import models
from . import pinched
from . import renormalize as Rn
from .errors import (
    CertificateFailure,
    ExtractionFailed,
    KoblabError,
    NumericalError,
    PinchNotCertified,
    PreconditionFailed,
    SpecError,
    WitnessInvalid,
)
from .geometry import curvature_bounds_scan

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CERTIFICATE = 0, 2, 3, 4

log = logging.getLogger("koblab")

REQUIRED = object()


def _vec(x):
    if isinstance(x, str):
        x = json.loads(x) if x.strip().startswith("[") else [float(c) for c in x.split(",")]
    if not isinstance(x, (list, tuple)) or not x or not all(isinstance(c, (int, float)) for c in x):
        raise ValueError(f"expected a list of numbers, got {x!r}")
    return [float(c) for c in x]


def _vec_list(x):
    if isinstance(x, str):
        x = json.loads(x) if x.strip().startswith("[") else [float(c) for c in x.split(",")]
    if not isinstance(x, (list, tuple)):
        raise ValueError(f"expected a list, got {x!r}")
    return [float(c) for c in x]


def _opt_float(x):
    return None if x is None or x == "none" else float(x)


def _choice(*options):
    def parse(x):
        if x not in options:
            raise ValueError(f"expected one of {options}, got {x!r}")
        return x
    return parse


def _int(x):
    if isinstance(x, float) and not x.is_integer():
        raise ValueError(f"expected an integer, got {x!r}")
    return int(x)


# name -> (parser, default); parsers also validate values read from --config
COMMON = {
    "spec": (str, REQUIRED),
    "out": (str, None),
    "format": (_choice("json", "csv"), "json"),
    "seed": (_int, 0),
    "threads": (_int, 1),
    "tol_h": (float, _disc.TOL_H),
    "tol_c": (float, _disc.TOL_C),
}

SCHEMAS = {
    "curvature": {"samples": (_int, 100), "margin": (float, 0.9)},
    "disc": {"p": (_vec, REQUIRED), "v": (_vec, None), "w": (_vec, None), "r": (float, 0.5), "N": (_int, 65)},
    "metric": {"p": (_vec, REQUIRED), "xi": (_vec, REQUIRED), "scales": (_vec_list, [1.0]), "c": (_opt_float, None),
               "N": (_int, 65), "r_cap": (float, 3.0), "ratio": (float, 0.8), "n_radii": (_int, 20),
               "random_planes": (_int, 2)},
    "distance": {"p": (_vec, REQUIRED), "q": (_vec, REQUIRED), "mode": (_choice("chain", "integrated", "both"), "both"),
                 "N": (_int, 33), "r_cap": (float, 2.4), "segments": (_int, 8), "perturbations": (_int, 32)},
    "certify": {"c": (float, 1.0), "t0": (_opt_float, None), "samples": (_int, 50), "tau_gap": (float, 0.1),
                "eps0": (float, pinched.EPS0), "N": (_int, 33)},
    "brody": {"family": (_choice("affine", "radial"), "affine"), "v0": (_vec, [1.0, 0.0]), "count": (_int, 16),
              "k": (float, 0.1), "A_log": (float, 0.25), "scale": (float, 1.0), "kappa0": (float, 0.5),
              "N": (_int, 33)},
}

HELP = {
    "curvature": "sampled sectional curvature bounds",
    "disc": "one harmonic jet disc through a point",
    "metric": "upper (and with --c lower) estimates of the infinitesimal metric",
    "distance": "chain and integrated pseudodistance upper bounds",
    "certify": "bi-Lipschitz certificate for a pinched metric",
    "brody": "Zalcman rescaling and Brody limit test",
}


# --------------------------------------------------------------------------
# config resolution


def _flag(name):
    return "--" + name.replace("_", "-")


def build_parser():
    ap = argparse.ArgumentParser(prog="koblab", description="Kobayashi-Royden pseudometric laboratory.")
    ap.add_argument("--version", action="version", version=f"koblab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for cmd, schema in SCHEMAS.items():
        sp = sub.add_parser(cmd, help=HELP[cmd])
        sp.add_argument("--config", help="JSON file of parameters (strict)")
        for name, (_, default) in {**COMMON, **schema}.items():
            shown = "required" if default is REQUIRED else f"default {default}"
            sp.add_argument(_flag(name), dest=name, default=None, help=shown)
    return ap


def resolve_config(command, args):
    """Merge defaults, the ``--config`` file and flags; raises ``SpecError``."""
    schema = {**COMMON, **SCHEMAS[command]}
    raw = {}
    if args.get("config"):
        try:
            with open(args["config"]) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise SpecError(f"cannot read config {args['config']}: {exc}") from None
        if not isinstance(raw, dict):
            raise SpecError("config must be a JSON object")
        unknown = sorted(set(raw) - set(schema))
        if unknown:
            raise SpecError(f"unknown config fields {unknown}")
    raw.update({k: v for k, v in args.items() if k in schema and v is not None})
    cfg = {}
    for name, (parse, default) in schema.items():
        if name in raw:
            try:
                cfg[name] = parse(raw[name])
            except (TypeError, ValueError) as exc:
                raise SpecError(f"bad value for {name}: {exc}") from None
        elif default is REQUIRED:
            raise SpecError(f"missing required parameter {name}")
        else:
            cfg[name] = default
    if cfg["threads"] < 1:
        raise SpecError("threads must be >= 1")
    return cfg


# --------------------------------------------------------------------------
# commands; each returns (exit code, result dict, csv rows)


def _budget(cfg, **kw):
    return K.DiscBudget(N=cfg["N"], tol_h=cfg["tol_h"], tol_c=cfg["tol_c"], threads=cfg["threads"],
                        seed=cfg["seed"], **kw)


def cmd_curvature(m, cfg):
    scan = curvature_bounds_scan(m, cfg["samples"], cfg["seed"], margin=cfg["margin"])
    rows = list(scan.rows())
    table = [["x", "v", "w", "K"]] + [[json.dumps(r["x"]), json.dumps(r["v"]), json.dumps(r["w"]), repr(r["K"])]
                                      for r in rows]
    return EXIT_OK, {"K_min": scan.k_min, "K_max": scan.k_max, "samples": rows}, table


def cmd_disc(m, cfg):
    p = np.asarray(cfg["p"])
    v = np.eye(m.dim)[0] if cfg["v"] is None else np.asarray(cfg["v"])
    w = np.eye(m.dim)[1] if cfg["w"] is None else np.asarray(cfg["w"])
    u, rep = _disc.jet_disc(m, p, v, w, cfg["r"], N=cfg["N"], tol_h=cfg["tol_h"], tol_c=cfg["tol_c"])
    out = {"energy": rep.energy, "tension_residual": rep.tension_residual,
           "conformality_defect": rep.conformality_defect, "iterations": rep.iterations,
           "converged": rep.converged, "jet_drift": rep.jet_drift,
           "admissible": _disc.is_admissible(rep, cfg["tol_h"], cfg["tol_c"]),
           "center": u.center.tolist(), "jet": u.jet().tolist()}
    table = [["node_x", "node_y"] + [f"u_{k + 1}" for k in range(m.dim)]]
    table += [[repr(float(x[0])), repr(float(x[1]))] + [repr(float(c)) for c in val]
              for x, val in zip(u.grid.nodes, u.values)]
    return (EXIT_OK if out["admissible"] else EXIT_NUMERICAL), out, table


def cmd_metric(m, cfg):
    budget = _budget(cfg, r_cap=cfg["r_cap"], ratio=cfg["ratio"], n_radii=cfg["n_radii"],
                     random_planes=cfg["random_planes"])
    cache = {}
    ests = []
    for a in cfg["scales"]:
        xi = a * np.asarray(cfg["xi"])
        ests.append(K.kobayashi_estimate(m, cfg["p"], xi, budget, cfg["c"], cache))
    empty = [e for e in ests if e.lower is not None and e.lower > e.upper]
    text = K.estimates_to_csv(ests)
    table = list(csv.reader(io.StringIO(text)))
    res = {"estimates": [e.to_dict() for e in ests], "bracket_nonempty": not empty}
    return (EXIT_CERTIFICATE if empty else EXIT_OK), res, table


def cmd_distance(m, cfg):
    budget = _budget(cfg, r_cap=cfg["r_cap"])
    cache = {}
    res, table = {}, [["mode", "value"]]
    exact = None
    if m.name == "poincare_disc":
        exact = K.poincare_distance(cfg["p"], cfg["q"])
        res["poincare_exact"] = exact
    if cfg["mode"] in ("chain", "both"):
        r = K.chain_distance(m, cfg["p"], cfg["q"], K.ChainConfig(seed=cfg["seed"], budget=budget), cache)
        res["chain"] = r.to_dict()
        table.append(["chain", repr(r.value)])
    if cfg["mode"] in ("integrated", "both"):
        r = K.integrated_distance(m, cfg["p"], cfg["q"], K.PathConfig(segments=cfg["segments"],
                                  perturbations=cfg["perturbations"], seed=cfg["seed"], budget=budget), cache)
        res["integrated"] = r.to_dict()
        table.append(["integrated", repr(r.value)])
    if cfg["mode"] == "both":
        a, b = res["chain"]["value"], res["integrated"]["value"]
        res["relative_gap"] = abs(a - b) / max(a, b) if max(a, b) > 0 else 0.0
        table.append(["relative_gap", repr(res["relative_gap"])])
    if exact is not None:
        table.append(["poincare_exact", repr(exact)])
    return EXIT_OK, res, table


def cmd_certify(m, cfg):
    t0 = cfg["t0"]
    if t0 is None:
        t0 = pinched.find_t0(m, eps0=cfg["eps0"], rng_seed=cfg["seed"])
    rows = pinched.sample_rows(m, cfg["samples"], cfg["seed"])
    budget = _budget(cfg)
    try:
        cert = pinched.bilipschitz_verify(m, cfg["c"], t0, rows, cfg["tau_gap"], budget, cfg["threads"],
                                          strict=False)
    except CertificateFailure as exc:
        return EXIT_CERTIFICATE, {"passed": False, "t0": t0, "reason": str(exc)}, [["passed", "reason"],
                                                                                   ["False", str(exc)]]
    table = [["p", "v", "norm", "lower", "upper", "bound", "ok"]]
    table += [[json.dumps(r["p"]), json.dumps(r["v"]), repr(r["norm"]), repr(r["lower"]), repr(r["upper"]),
               repr(r["bound"]), str(r["ok"])] for r in cert.rows]
    return (EXIT_OK if cert.passed else EXIT_CERTIFICATE), cert.to_dict(), table


def cmd_brody(m, cfg):
    if cfg["family"] == "affine":
        f_seq = Rn.affine_family(cfg["v0"], cfg["count"])
    else:
        f_seq = Rn.radial_family(cfg["count"], m.dim)
    family = Rn.psi_family(m, cfg["A_log"], scale=cfg["scale"])
    witness = Rn.scheduled_witness(cfg["count"], cfg["kappa0"])
    res = Rn.brody_extract(f_seq, family, cfg["k"], target=m, witness=witness, N=cfg["N"],
                           tol_c=cfg["tol_c"])
    out = res.to_dict()
    table = [["n", "t_re", "t_im", "kappa_re", "kappa_im", "R", "J01"]]
    if res.sequence is not None:
        for rec in res.sequence.to_dict()["records"]:
            table.append([str(rec["n"])] + [repr(x) for x in rec["t"] + rec["kappa"]]
                         + [repr(rec["R"]), repr(rec["J01"])])
    return (EXIT_OK if res.verdict == Rn.NONCONSTANT else EXIT_CERTIFICATE), out, table


COMMANDS = {"curvature": cmd_curvature, "disc": cmd_disc, "metric": cmd_metric, "distance": cmd_distance,
            "certify": cmd_certify, "brody": cmd_brody}


# --------------------------------------------------------------------------
# output


def _clean(x):
    """JSON-safe copy: numpy scalars and arrays to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def render(command, cfg, code, result, table):
    if cfg["format"] == "csv":
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        buf.write(f"# koblab {__version__} {command} config={json.dumps(_clean(cfg), sort_keys=True)}\n")
        wr.writerows(table)
        return buf.getvalue()
    doc = {"command": command, "version": __version__, "config": cfg, "exit_code": code, "result": result}
    return json.dumps(_clean(doc), sort_keys=True, indent=2) + "\n"


def _emit(text, path):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _exit_for(exc):
    if isinstance(exc, (CertificateFailure, PinchNotCertified, PreconditionFailed, WitnessInvalid,
                        ExtractionFailed)):
        return EXIT_CERTIFICATE
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    if isinstance(exc, (SpecError, ValueError)):
        return EXIT_CONFIG
    return EXIT_NUMERICAL


def main(argv=None):
    level = os.environ.get("KOBLAB_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    command = args.command
    cfg = None
    try:
        cfg = resolve_config(command, vars(args))
        m = models.load_spec(cfg["spec"])
        start = time.perf_counter()
        code, result, table = COMMANDS[command](m, cfg)
        log.info("%s finished in %.3f s with exit code %d", command, time.perf_counter() - start, code)
    except (KoblabError, ValueError, np.linalg.LinAlgError) as exc:
        code = _exit_for(exc) if not isinstance(exc, np.linalg.LinAlgError) else EXIT_NUMERICAL
        log.error("%s: %s", type(exc).__name__, exc)
        if cfg is None:
            return code
        result = {"error": type(exc).__name__, "message": str(exc)}
        est = getattr(exc, "estimate", None)
        if est is not None:
            result["estimate"] = est.to_dict()
        table = [["error", "message"], [type(exc).__name__, str(exc)]]
    _emit(render(command, cfg, code, result, table), cfg["out"])
    return code


if __name__ == "__main__":
    sys.exit(main())
