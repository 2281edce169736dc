"""Command-line front end: ``soliton``, ``verify``, ``scatter`` and ``moments``.

Exit codes: 0 pass, 1 verification failure, 2 usage or parse error,
3 degenerate input.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import suites
from .config import override
from .construction import SolitonSpec, SpectralData, VesselFamily, build_soliton, singular_mask, trivial_family
from .errors import DegenerateInputError, DomainError, OrderCapError, ParameterError, SpectrumError, VesselError
from .moments import (
    MomentPolicy,
    moments_from_potential,
    reconstruct_potential_taylor,
    recursion_residual,
    taylor_coefficients,
)
from .params import preset_canonical
from .pde import GridFunction
from .scattering import backlund_map, backlund_residual
from .vessel import MAX_MOMENT_ORDER

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_DEGENERATE = 0, 1, 2, 3
CLI_CSV_COLUMNS = ("x", "t", "re", "im", "masked")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# deterministic output


def _fmt_float(v: float) -> str:
    if not math.isfinite(v):
        return "null"
    s = format(v + 0.0, ".17g")  # + 0.0 folds -0.0 into 0.0
    # keep a JSON-parseable float literal
    return s if any(c in s for c in ".en") else s + ".0"


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with fixed field order and floats at 17 significant digits; complex as ``[re, im]``."""
    pad, inner = " " * (indent * _level), " " * (indent * (_level + 1))
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + dumps(v, indent, _level + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent, _level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return dumps([float(obj.real), float(obj.imag)], indent, _level)
    return json.dumps(str(obj))


def _write(text: str, path: str | None):
    if path is None or path == "-":
        sys.stdout.write(text + "\n")
    else:
        Path(path).write_text(text + "\n")


# ---------------------------------------------------------------------------
# argument parsing helpers


def parse_grid(spec: str):
    """``x:start:stop:count[,t:start:stop:count]`` -> ``(xs, ts)``; ``ts`` is ``[0]`` when omitted."""
    axes = {}
    for part in spec.split(","):
        fields = part.strip().split(":")
        if len(fields) != 4 or fields[0] not in ("x", "t") or fields[0] in axes:
            raise UsageError(f"bad grid component {part!r}; expected x:start:stop:count[,t:start:stop:count]")
        try:
            lo, hi, n = float(fields[1]), float(fields[2]), int(fields[3])
        except ValueError as exc:
            raise UsageError(f"bad grid component {part!r}: {exc}") from None
        if n < 1 or (n > 1 and not hi > lo) or not (math.isfinite(lo) and math.isfinite(hi)):
            raise UsageError(f"bad grid component {part!r}")
        axes[fields[0]] = np.linspace(lo, hi, n)
    if "x" not in axes:
        raise UsageError("grid needs an x component")
    return axes["x"], axes.get("t", np.zeros(1))


def _complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _complex_list(text: str) -> list:
    return [_complex(v) for v in text.split(",") if v.strip()]


def _tolerance_pairs(items) -> dict:
    out = {}
    for item in items or []:
        name, _, value = item.partition("=")
        if name not in suites.DEFAULT_TOLERANCES or not value:
            raise UsageError(f"bad tolerance {item!r}; known checks: {', '.join(suites.DEFAULT_TOLERANCES)}")
        try:
            out[name] = float(value)
        except ValueError:
            raise UsageError(f"bad tolerance value in {item!r}") from None
    return out


def _soliton_spec(args) -> SolitonSpec:
    return SolitonSpec(args.variant, k=args.k, m=args.m, b=args.b, k1=args.k1, k2=args.k2, b1=args.b1, b2=args.b2)


def _add_soliton_params(p):
    d = SolitonSpec("rational")
    p.add_argument("--k", type=float, default=d.k)
    p.add_argument("--m", type=float, default=d.m)
    p.add_argument("--b", type=_complex, default=d.b)
    p.add_argument("--k1", type=float, default=d.k1)
    p.add_argument("--k2", type=float, default=d.k2)
    p.add_argument("--b1", type=_complex, default=d.b1)
    p.add_argument("--b2", type=_complex, default=d.b2)


def _add_eps(p):
    p.add_argument("--eps-sing", type=float, default=None, help="singularity floor for |tau| and det X")
    p.add_argument("--eps-spec", type=float, default=None, help="minimal distance of lambda to a spectrum")
    p.add_argument("--eps-beta", type=float, default=None, help="|beta_x| floor in the canonical PDE")


def _eps_overrides(args) -> dict:
    names = ("eps_sing", "eps_spec", "eps_beta")
    return {n: getattr(args, n) for n in names if getattr(args, n, None) is not None}


def _load_family(args):
    """Family from ``--spec PATH``, ``--soliton NAME`` or ``--trivial``; returns ``(name, family)``."""
    if getattr(args, "spec", None):
        try:
            data = SpectralData.from_json(Path(args.spec).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read spec file: {exc}") from None
        return Path(args.spec).stem, VesselFamily(data, preset_canonical())
    name = getattr(args, "soliton", None)
    if name == "trivial" or getattr(args, "trivial", False):
        return "trivial", trivial_family()
    if name is None:
        raise UsageError("one of --spec, --soliton or --trivial is required")
    return name, build_soliton(suites.DEFAULT_SPECS[name]).family


# ---------------------------------------------------------------------------
# commands


def cmd_soliton(args) -> int:
    xs, ts = parse_grid(args.grid)
    sol = build_soliton(_soliton_spec(args))
    fam = sol.family
    X, T = np.meshgrid(xs, ts, indexing="ij")
    with np.errstate(all="ignore"):
        tau = fam.tau(X, T)
        beta = fam.beta(X, T)
        p, q = fam.pq(X, T)
    finite = np.isfinite(beta) & np.isfinite(p) & np.isfinite(q)
    mask = singular_mask(tau, axis=0) | ~finite
    if mask.all():
        print("error: every grid point lies on the singular set", file=sys.stderr)
        return EXIT_DEGENERATE
    dt = float(ts[1] - ts[0]) if ts.size > 1 else 1.0
    dx = float(xs[1] - xs[0]) if xs.size > 1 else 1.0
    fields = {"tau": tau, "beta": beta, "p": p, "q": q}
    grids = {k: GridFunction(float(xs[0]), dx, np.where(mask, 0, v), float(ts[0]), dt, mask) for k, v in fields.items()}
    report = {
        "variant": args.variant,
        "params": {"k": args.k, "m": args.m, "b": args.b, "k1": args.k1, "k2": args.k2, "b1": args.b1, "b2": args.b2},
        "grid": args.grid,
        "x": xs,
        "t": ts,
        "masked": [[int(v) for v in row] for row in mask],
        "fields": {k: [[complex(z) for z in row] for row in np.where(mask, np.nan, v)] for k, v in fields.items()},
    }
    if sol.singular_line is not None:
        report["singular_line"] = [float(sol.singular_line(t)) for t in ts]
    text = dumps(report)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for k, g in grids.items():
            g.to_csv(out / f"{k}.csv", CLI_CSV_COLUMNS)
        (out / "soliton.json").write_text(text + "\n")
    else:
        _write(text, None)
    return EXIT_OK


def cmd_verify(args) -> int:
    tols = _tolerance_pairs(args.tol)
    name, fam = _load_family(args)
    box = suites.DEFAULT_BOXES.get(name, (0.0, 1.0))
    if args.grid:
        xs, ts = parse_grid(args.grid)
        if ts.size == 1:
            ts = np.linspace(-0.1, 0.1, xs.size)
    else:
        xs, ts = np.linspace(*box, 41), np.linspace(-0.1, 0.1, 41)
    case = suites.Case(name, fam, xs, ts)
    kwargs = {"a": args.a, "b": args.b}
    if args.negative:
        kwargs["other"] = build_soliton(suites.DEFAULT_SPECS[args.negative]).family
    results = suites.run(args.target, case, tols, **kwargs)
    ran = [r for r in results if not r.status.startswith("skipped")]
    report = {"target": args.target, "vessel": name, "checks": [r.to_dict() for r in results],
              "pass": bool(ran) and all(r.passed for r in ran)}
    _write(dumps(report), args.out)
    if not ran:
        return EXIT_DEGENERATE
    return EXIT_OK if report["pass"] else EXIT_FAIL


def cmd_scatter(args) -> int:
    xs, _ = parse_grid(args.grid)
    name, fam = _load_family(args)
    u0 = args.u0
    if len(u0) != 2:
        raise UsageError("--u0 needs two components")
    entries, ok = [], True
    for k, lam in enumerate(args.lam):
        entry = {"lambda": lam, "status": "ok"}
        try:
            y = backlund_map(fam, lam, xs, u0)
            res = backlund_residual(fam, lam, xs, u0) if xs.size > 1 else 0.0
        except SpectrumError:
            entry["status"] = "skipped: spectrum"
            entries.append(entry)
            continue
        entry["residual"] = res
        entry["pass"] = bool(res < args.tol)
        ok &= entry["pass"]
        entry["samples"] = [[float(x), complex(v[0]), complex(v[1])] for x, v in zip(xs, y)]
        entries.append(entry)
        if args.csv:
            out = Path(args.csv)
            out.mkdir(parents=True, exist_ok=True)
            dx = float(xs[1] - xs[0]) if xs.size > 1 else 1.0
            for c in range(2):
                GridFunction(float(xs[0]), dx, y[:, c]).to_csv(out / f"lam{k}_y{c}.csv", CLI_CSV_COLUMNS)
    report = {"vessel": name, "grid": args.grid, "u0": [complex(v) for v in u0], "tolerance": args.tol,
              "lambdas": entries}
    _write(dumps(report), args.out)
    return EXIT_OK if ok else EXIT_FAIL


def _potential(args):
    """``(p, q, family_or_None)`` for the moments command."""
    if args.potential == "zero":
        return np.zeros(1), np.zeros(1), None
    if args.potential == "polynomial":
        return np.array(args.p or [0.0], dtype=complex), np.array(args.q or [0.0], dtype=complex), None
    fam = build_soliton(suites.DEFAULT_SPECS[args.potential]).family
    p = lambda z: fam.pq(z, 0.0)[0]  # noqa: E731
    q = lambda z: fam.pq(z, 0.0)[1]  # noqa: E731
    return p, q, fam


def cmd_moments(args) -> int:
    if args.N > MAX_MOMENT_ORDER or args.N < 0:
        raise UsageError(f"N must lie in 0..{MAX_MOMENT_ORDER}")
    if args.reconstruct is not None and not 0 <= args.reconstruct <= MAX_MOMENT_ORDER:
        raise UsageError(f"--reconstruct must lie in 0..{MAX_MOMENT_ORDER}")
    xs, _ = parse_grid(args.grid)
    p, q, fam = _potential(args)
    policy = MomentPolicy()
    if args.match_vessel and fam is not None:
        top = max(args.N, args.reconstruct or 0)
        policy = MomentPolicy.from_moments([fam.H(n, 0.0) for n in range(top + 1)])
    series = {"step": args.step, "radius": args.radius}
    seq = moments_from_potential(p, q, args.N, xs, policy=policy, **series)
    report = {"moments": seq.to_dict()}
    ok = True
    if args.N >= 1 and xs.size >= 9:
        res = [recursion_residual(seq, n) for n in range(args.N)]
        ok &= bool(max(res) < args.tol)
        report["recursion"] = {"residuals": res, "sup_residual": max(res), "tolerance": args.tol, "pass": ok}
    if args.reconstruct is not None:
        M = args.reconstruct
        at0 = seq.at_zero() if M <= args.N else moments_from_potential(p, q, M, [0.0], policy=policy, **series).at_zero()
        rec = reconstruct_potential_taylor(at0, M)
        pc, qc = _coefficients(p, M), _coefficients(q, M)
        err = float(max(np.max(np.abs(rec.p - pc)), np.max(np.abs(rec.q - qc))))
        passed = err < args.reconstruct_tol
        ok &= passed
        report["reconstruct"] = {"order": M, "p": list(rec.p), "q": list(rec.q), "max_coefficient_error": err,
                                 "tolerance": args.reconstruct_tol, "pass": passed}
    report["pass"] = ok
    _write(dumps(report), args.out)
    return EXIT_OK if ok else EXIT_FAIL


def _coefficients(f, M):
    if callable(f):
        return taylor_coefficients(f, M)
    c = np.zeros(M + 1, dtype=complex)
    f = np.atleast_1d(f)[: M + 1]
    c[: f.size] = f
    return c


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="canvessel", description="Operator vessels for canonical systems")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("soliton", help="sample tau, beta, p, q of a built-in soliton")
    s.add_argument("variant", choices=["exponential", "rational", "two_dim"])
    _add_soliton_params(s)
    s.add_argument("--grid", required=True, help="x:start:stop:count[,t:start:stop:count]")
    s.add_argument("--out", help="output directory for CSV and JSON files (default: JSON to stdout)")
    _add_eps(s)
    s.set_defaults(func=cmd_soliton)

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("target", choices=[*suites.TARGETS, "all"])
    src = v.add_mutually_exclusive_group()
    src.add_argument("--soliton", choices=[*suites.DEFAULT_SPECS, "trivial"])
    src.add_argument("--spec", help="SpectralData JSON file")
    src.add_argument("--trivial", action="store_true")
    v.add_argument("--grid", help="verification grid (default: the built-in box, 41 x 41)")
    v.add_argument("--tol", action="append", metavar="CHECK=VALUE", help="override a check tolerance")
    v.add_argument("--a", type=_complex, default=1.0, help="gauge coefficient a")
    v.add_argument("--b", type=_complex, default=0.3, help="gauge coefficient b")
    v.add_argument("--negative", choices=list(suites.DEFAULT_SPECS), help="different soliton for negative controls")
    v.add_argument("--out", help="report path (default: stdout)")
    _add_eps(v)
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("scatter", help="sample y = S Phi u0 and its output-LDE residual")
    src = c.add_mutually_exclusive_group()
    src.add_argument("--soliton", choices=[*suites.DEFAULT_SPECS, "trivial"])
    src.add_argument("--spec", help="SpectralData JSON file")
    src.add_argument("--trivial", action="store_true")
    c.add_argument("--lam", type=_complex_list, required=True, help="comma-separated spectral parameters")
    c.add_argument("--u0", type=_complex_list, default=[1.0, 0.0])
    c.add_argument("--grid", required=True)
    c.add_argument("--tol", type=float, default=1e-6)
    c.add_argument("--csv", help="directory for per-lambda CSV samples")
    c.add_argument("--out", help="report path (default: stdout)")
    _add_eps(c)
    c.set_defaults(func=cmd_scatter)

    m = sub.add_parser("moments", help="forward moments of a potential")
    m.add_argument("--potential", choices=["zero", "polynomial", *suites.DEFAULT_SPECS], default="zero")
    m.add_argument("--p", type=_complex_list, help="monomial coefficients of p (polynomial potential)")
    m.add_argument("--q", type=_complex_list, help="monomial coefficients of q (polynomial potential)")
    m.add_argument("--N", type=int, required=True)
    m.add_argument("--grid", default="x:0:1:101")
    m.add_argument("--match-vessel", action="store_true",
                   help="take the integration constants from the soliton vessel instead of zero")
    m.add_argument("--step", type=float, default=0.1, help="spacing of the series centers")
    m.add_argument("--radius", type=float, default=None,
                   help="Cauchy radius; must stay below the distance to the nearest singularity of p, q")
    m.add_argument("--tol", type=float, default=1e-6, help="recursion residual tolerance")
    m.add_argument("--reconstruct", type=int, metavar="M", help="round-trip through the Taylor reconstruction")
    m.add_argument("--reconstruct-tol", type=float, default=1e-8)
    m.add_argument("--out", help="output path (default: stdout)")
    _add_eps(m)
    m.set_defaults(func=cmd_moments)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    try:
        with override(**_eps_overrides(args)):
            return args.func(args)
    except DegenerateInputError as exc:  # a ValueError, so it must come first
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (UsageError, ParameterError, OrderCapError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, VesselError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
