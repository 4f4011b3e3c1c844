"""Command line front end: ``czreeb <command> [options]``.

Every command prints one JSON document (or CSV where documented) on
standard output.  Exit status is 0 on success, 1 on a domain error (the
output is then ``{"error": code, "detail": ...}``) and 2 on a usage error.

Options may also be given in a JSON file passed with ``--config``; keys are
the option names with dashes replaced by underscores.  Command-line flags
win over the file.
"""

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from .errors import CZReebError

DEFAULTS = {
    "alpha": 0.5, "c": 1.0, "K": None, "window": [-7.0, 7.0], "seed": 7, "n": 200,
    "jobs": 1, "r1": 1.0, "r2": math.sqrt((1 + math.sqrt(5)) / 2), "eps": 1e-3,
    "cutoff": 12.0, "resolution": 4, "t_guess": 3.0, "cover": 1, "time": None,
    "k": None, "samples": 4, "horizon": None, "point": None, "dual": False,
    "format": None, "tol": 1e-10, "n_degenerate": 12,
}


class UsageError(Exception):
    pass


# output ---------------------------------------------------------------------------

def _fmt(obj):
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return "null"
        s = format(x, ".17g")
        if "e" not in s and "." not in s and "n" not in s:
            s += ".0"
        return s
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_fmt(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(v) for v in (obj.tolist() if isinstance(obj, np.ndarray) else obj)) + "]"
    if isinstance(obj, complex):
        return _fmt([obj.real, obj.imag])
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj):
    """JSON with every float written to 17 significant digits."""
    return _fmt(obj)


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([format(float(v), ".17g") if isinstance(v, (float, np.floating)) else v
                    for v in r])
    return buf.getvalue()


# input helpers ------------------------------------------------------------------

def _json_arg(text):
    """Inline JSON or ``@file``."""
    if text is None:
        return None
    if isinstance(text, (dict, list)):
        return text
    try:
        if text.startswith("@"):
            with open(text[1:]) as fh:
                return json.load(fh)
        return json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read JSON argument: {exc}") from exc


def build_path(data):
    """Path from ``{"builder": name, "params": {...}}``.

    Builders: ``identity``, ``rotation`` (``alpha``: ``e^{i 2 pi alpha t}``),
    ``shear`` (``c``), ``hyperbolic`` (``c``), ``exponential`` (``Y``),
    ``potential`` (``const``, ``cos``, ``sin``) and ``samples`` (``t``,
    ``matrices``).
    """
    from .cz_spectral import SymmetricPotential, path_from_potential
    from .sp_path import SymplecticPath
    name = data.get("builder")
    p = data.get("params", {})
    if name == "identity":
        return SymplecticPath.identity()
    if name == "rotation":
        return SymplecticPath.rotation(float(p.get("alpha", 0.5)))
    if name == "shear":
        return SymplecticPath.shear(float(p.get("c", 1.0)))
    if name == "hyperbolic":
        return SymplecticPath.hyperbolic(float(p.get("c", 1.0)))
    if name == "exponential":
        return SymplecticPath.exponential(p["Y"])
    if name == "potential":
        S = SymmetricPotential.trig(p.get("const", [[0, 0], [0, 0]]),
                                    p.get("cos", []), p.get("sin", []))
        return path_from_potential(S)
    if name == "samples":
        return SymplecticPath.from_samples(p["t"], p["matrices"])
    raise UsageError(f"unknown path builder {name!r}")


def _path_from_args(a):
    if a.path is not None:
        return build_path(_json_arg(a.path))
    params = {"alpha": a.alpha, "c": a.c}
    if a.builder == "potential":
        params.update(_json_arg(a.potential) or {})
    return build_path({"builder": a.builder or "rotation", "params": params})


def _potential_from_args(a):
    from .cz_spectral import SymmetricPotential, potential_from_path
    if a.potential is not None:
        p = _json_arg(a.potential)
        return SymmetricPotential.trig(p.get("const", [[0, 0], [0, 0]]),
                                       p.get("cos", []), p.get("sin", []))
    return potential_from_path(_path_from_args(a))


def _level_from_args(a):
    from .reeb import StarShapedLevel
    if a.level_json is not None:
        return StarShapedLevel.from_json(_json_arg(a.level_json))
    kind = a.level or "ellipsoid"
    data = {"kind": kind, "r1": a.r1, "r2": a.r2, "eps": a.eps,
            "coeffs": _json_arg(a.coeffs) or []}
    try:
        return StarShapedLevel.from_json(data)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _curve_from_json(data, level):
    """Curve from ``{"samples": [...]}``, ``{"circle": 1|2}`` (exact ellipsoid
    circle) or ``{"orbit": {"seed": [...], "t_guess": T}}``."""
    from .linking import ClosedCurve
    from .reeb import ellipsoid_orbit, find_orbit
    if "samples" in data:
        return ClosedCurve(data["samples"], label="samples")
    if "circle" in data:
        return ClosedCurve.from_orbit(ellipsoid_orbit(level, int(data["circle"])),
                                      label=f"circle{data['circle']}")
    if "orbit" in data:
        o = data["orbit"]
        return ClosedCurve.from_orbit(find_orbit(level, np.array(o["seed"], float),
                                                 float(o["t_guess"])), label="orbit")
    raise UsageError("curve needs one of 'samples', 'circle', 'orbit'")


# commands -----------------------------------------------------------------------

def cmd_cz(a):
    if a.method == "geometric":
        from .cz_geometric import cz_geometric
        return cz_geometric(_path_from_args(a)).as_dict()
    from .cz_spectral import cz_spectral_detail
    r = cz_spectral_detail(_potential_from_args(a), K=a.K)
    return {"index": r.index, "lambda_minus": r.lam_minus, "lambda_plus": r.lam_plus,
            "wind_minus": r.wind_minus, "wind_plus": r.wind_plus,
            "degenerate": r.degenerate}


def cmd_spectrum(a):
    from .cz_spectral import spectrum
    sl = spectrum(_potential_from_args(a), int(a.K or 64), tuple(a.window))
    if a.format == "json":
        return {"truncation": sl.truncation,
                "eigenvalues": [{"value": v, "winding": w, "multiplicity": m}
                                for v, w, m in sl.rows()]}
    return _csv(["value", "winding", "multiplicity"], sl.rows())


def cmd_reeb(a):
    from .reeb import defining_residuals, flow, reeb_at
    level = _level_from_args(a)
    if a.point is None:
        raise UsageError("--point q1 p1 q2 p2 is required")
    p = np.array(a.point, float)
    p = p / np.linalg.norm(p)
    R = reeb_at(level, p)
    out = {"point": p, "reeb": R, "residual": defining_residuals(level, p, R)}
    if a.time is not None:
        out["flow"] = flow(level, p, float(a.time), a.tol)
        out["time"] = float(a.time)
    return out


def cmd_orbit(a):
    from .reeb import action, find_orbit, hopf_point, orbit_cz
    level = _level_from_args(a)
    seed = np.array(a.point, float) if a.point is not None else hopf_point(0.05, 0.3, 1.0)
    orb = find_orbit(level, seed, float(a.t_guess))
    res = orbit_cz(level, orb, cover=int(a.cover))
    out = orb.as_dict()
    out.update({"newton_steps": orb.newton_steps, "action": action(level, orb),
                "cover": int(a.cover), "cz": res.as_dict()})
    return out


def cmd_scan(a):
    from .reeb import convexity_scan
    return convexity_scan(_level_from_args(a), float(a.cutoff), int(a.resolution),
                          jobs=int(a.jobs))


def _default_curves(a, level):
    c1 = _json_arg(a.curve1) or {"circle": 1}
    c2 = _json_arg(a.curve2) or {"circle": 2}
    return _curve_from_json(c1, level), _curve_from_json(c2, level)


def cmd_link(a):
    from .linking import gauss_linking
    level = _level_from_args(a)
    c1, c2 = _default_curves(a, level)
    return gauss_linking(c1, c2).as_dict()


def cmd_selflink(a):
    from .linking import self_linking
    from .reeb import quaternion_frame
    level = _level_from_args(a)
    knot = _curve_from_json(_json_arg(a.curve1) or {"circle": 1}, level)
    return self_linking(knot, quaternion_frame(level)).as_dict()


def cmd_strip(a):
    from .strip import strip_report
    if a.matrix is not None:
        m = np.array(_json_arg(a.matrix), float)
        if m.shape != (2, 2):
            raise UsageError("--matrix must be a 2x2 array")
        return strip_report(m=m, k=1 if a.k is None else int(a.k))
    if a.path is not None:
        return strip_report(path=build_path(_json_arg(a.path)))
    if a.orbit is not None:
        from .reeb import find_orbit, linearized_flow
        level = _level_from_args(a)
        o = _json_arg(a.orbit)
        orb = find_orbit(level, np.array(o["seed"], float), float(o["t_guess"]))
        return strip_report(path=linearized_flow(level, orb))
    raise UsageError("strip needs --matrix, --path or --orbit")


def cmd_section(a):
    from . import sections as S
    level = _level_from_args(a)
    sec = S.ellipsoid_section(level, dual=bool(a.dual))
    if a.action == "return-map":
        pts = [complex(*a.point)] if a.point is not None else [
            0.5 * np.exp(2j * np.pi * i / a.samples) for i in range(int(a.samples))]
        rep = S.sample_returns(level, sec, pts)
        if a.format == "csv":
            return _csv(["q1", "p1", "q2", "p2", "q1_image", "p1_image", "q2_image",
                         "p2_image", "time"], rep.rows())
        return {"returns": [{"point": p, "image": q, "time": t} for p, q, t in rep.pairs]}
    if a.action == "fixed-point":
        orb, w = S.fixed_point(level, sec)
        return {"disk_point": [w.real, w.imag], "orbit": orb.as_dict()}
    if a.action == "audit":
        return S.global_section_audit(level, sec, n=int(a.n), horizon=a.horizon,
                                      seed=int(a.seed))
    if a.action == "area":
        return {"area_defect": S.area_preservation_check(level, sec, int(a.samples),
                                                         seed=int(a.seed))}
    raise UsageError(f"unknown section action {a.action!r}")


def cmd_crosscheck(a):
    from .cz_spectral import crosscheck
    r = crosscheck(int(a.n), int(a.seed), int(a.jobs), int(a.n_degenerate))
    return {"agree": r["agree"], "disagree": r["disagree"],
            "degenerate": r["degenerate"], "n": int(a.n), "seed": int(a.seed)}


COMMANDS = {"cz": cmd_cz, "spectrum": cmd_spectrum, "reeb": cmd_reeb,
            "orbit": cmd_orbit, "scan": cmd_scan, "link": cmd_link,
            "selflink": cmd_selflink, "strip": cmd_strip, "section": cmd_section,
            "crosscheck": cmd_crosscheck}


# parser -------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        raise UsageError(message)


def _common(p):
    p.add_argument("--config", help="JSON file of option values")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, help="worker processes for batch work")
    p.add_argument("--format", choices=["json", "csv"])


def _path_opts(p):
    p.add_argument("--builder", choices=["identity", "rotation", "shear", "hyperbolic",
                                         "potential"])
    p.add_argument("--alpha", type=float, help="rotation speed (turns)")
    p.add_argument("--c", type=float, help="shear / hyperbolic parameter")
    p.add_argument("--path", help='path JSON {"builder":..., "params":{...}} or @file')
    p.add_argument("--potential", help='potential JSON {"const","cos","sin"} or @file')
    p.add_argument("--K", type=int, help="Fourier truncation")


def _level_opts(p):
    p.add_argument("--level", choices=["ellipsoid", "perturbed_ellipsoid", "round"])
    p.add_argument("--level-json", help="level JSON or @file")
    p.add_argument("--r1", type=float)
    p.add_argument("--r2", type=float)
    p.add_argument("--eps", type=float, help="perturbation size")
    p.add_argument("--coeffs", help="JSON list of monomial coefficients")
    p.add_argument("--tol", type=float)


def make_parser():
    parser = _Parser(prog="czreeb", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("cz", help="index of a symplectic path")
    p.add_argument("method", choices=["geometric", "spectral"])
    _path_opts(p)
    _common(p)

    p = sub.add_parser("spectrum", help="eigenvalues with windings (CSV)")
    _path_opts(p)
    p.add_argument("--window", type=float, nargs=2)
    _common(p)

    p = sub.add_parser("reeb", help="Reeb vector (and flow) at a point")
    _level_opts(p)
    p.add_argument("--point", type=float, nargs=4)
    p.add_argument("--time", type=float)
    _common(p)

    p = sub.add_parser("orbit", help="closed orbit by Newton shooting")
    _level_opts(p)
    p.add_argument("--point", type=float, nargs=4, help="seed point")
    p.add_argument("--t-guess", type=float)
    p.add_argument("--cover", type=int)
    _common(p)

    p = sub.add_parser("scan", help="orbits below an action cutoff")
    _level_opts(p)
    p.add_argument("--cutoff", type=float)
    p.add_argument("--resolution", type=int)
    _common(p)

    for name in ("link", "selflink"):
        p = sub.add_parser(name, help=f"{name} number of curves on S^3")
        _level_opts(p)
        p.add_argument("--curve1", help="curve JSON or @file")
        if name == "link":
            p.add_argument("--curve2", help="curve JSON or @file")
        _common(p)

    p = sub.add_parser("strip", help="end-matrix class, loop and twist report")
    _level_opts(p)
    p.add_argument("--matrix", help="2x2 JSON end matrix")
    p.add_argument("--k", type=int)
    p.add_argument("--path", help="path JSON or @file")
    p.add_argument("--orbit", help='{"seed": [...], "t_guess": T}')
    _common(p)

    p = sub.add_parser("section", help="surface of section tools")
    p.add_argument("action", choices=["return-map", "fixed-point", "audit", "area"])
    _level_opts(p)
    p.add_argument("--dual", action="store_const", const=True)
    p.add_argument("--point", type=float, nargs=2, help="disk point (re, im)")
    p.add_argument("--samples", type=int)
    p.add_argument("--n", type=int, help="audit starts")
    p.add_argument("--horizon", type=float)
    _common(p)

    p = sub.add_parser("crosscheck", help="geometric vs spectral index batch")
    p.add_argument("--n", type=int)
    p.add_argument("--n-degenerate", type=int)
    _common(p)
    return parser


def _resolve(args):
    """Fill unset options from ``--config`` and then from the defaults."""
    config = {}
    if getattr(args, "config", None):
        config = _json_arg("@" + args.config)
        if not isinstance(config, dict):
            raise UsageError("config file must hold a JSON object")
    for key, value in config.items():
        key = key.replace("-", "_")
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    for key, value in DEFAULTS.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    for key in ("path", "potential", "builder", "level", "level_json", "coeffs",
                "curve1", "curve2", "matrix", "orbit", "method", "action"):
        if not hasattr(args, key):
            setattr(args, key, None)
    return args


def run(argv=None, stdout=None):
    """Execute one command; returns the exit status."""
    stdout = stdout or sys.stdout
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return 2
        args = _resolve(args)
        result = COMMANDS[args.command](args)
    except (UsageError, ValueError, KeyError, TypeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except CZReebError as exc:
        info = {k: v for k, v in exc.info.items()
                if isinstance(v, (int, float, str, bool, list, dict))}
        stdout.write(dumps({"error": exc.code, "detail": exc.detail, **info}) + "\n")
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)
    if isinstance(result, str):
        stdout.write(result)
    else:
        stdout.write(dumps(result) + "\n")
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
