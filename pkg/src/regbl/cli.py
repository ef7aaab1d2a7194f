"""Command-line interface: JSON in, JSON out.

Exit codes: 0 success, 1 validation or verification failure, 2 computational
error, 3 usage error or malformed input.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import closed_forms as cf
from .datum import (Datum, DegenerateDatumError, MalformedDatumError, check_nondegenerate,
                    validate_datum)
from .gaussian import SingularGaussianError, extremizer_report
from .heatflow import (DEFAULT_T_GRID, FlowRun, IntegrationError,
                       check_monotonicity, sample_typeG)
from .optimize import GridSpec, OptConfig, amplify, brute_force_oracle, optimize_gaussian

EXIT_OK, EXIT_INVALID, EXIT_COMPUTE, EXIT_USAGE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _clean(obj):
    """Make an object JSON-safe: numpy scalars to floats, infinities to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def _read_json(path):
    try:
        text = sys.stdin.read() if path in (None, "-") else open(path).read()
    except OSError as exc:
        raise UsageError(f"cannot read input: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDatumError(
            f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _write(args, payload):
    text = json.dumps(_clean(payload), indent=2, sort_keys=True)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _field(obj, key, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise MalformedDatumError(f"{key}: missing required field")
    return obj[key]


def _load_datum(obj):
    if isinstance(obj, dict) and "datum" in obj:
        obj = obj["datum"]
    return Datum.from_dict(obj)


def _config(args, direction=None):
    kw = {"seed": args.seed, "direction": direction or args.direction or "infimum"}
    if args.tol is not None:
        kw["gtol"] = args.tol
    return OptConfig(**kw)


def _validated(d):
    rep = validate_datum(d)
    return rep, rep.verdict


def cmd_check(args):
    d = _load_datum(_read_json(args.input))
    val = validate_datum(d)
    nd = check_nondegenerate(d) if val.verdict else None
    _write(args, {"validation": val.to_dict(),
                  "nondegenerate": None if nd is None else nd.to_dict()})
    ok = val.verdict and nd.verdict
    return EXIT_OK if ok else EXIT_INVALID


def cmd_compute(args):
    d = _load_datum(_read_json(args.input))
    val, ok = _validated(d)
    if not ok:
        _write(args, {"validation": val.to_dict()})
        return EXIT_INVALID
    cfg = _config(args)
    out = {}
    if args.lam is not None:
        base = d
        d = amplify(d, args.c_plus, args.lam)
        out["amplification"] = {"lambda": args.lam, "c_plus": args.c_plus}
    if cfg.direction == "infimum":
        nd = check_nondegenerate(d)
        if not nd.verdict:
            _write(args, {"validation": val.to_dict(), "nondegenerate": nd.to_dict()})
            return EXIT_INVALID
    res = optimize_gaussian(d, cfg)
    out["result"] = res.to_dict()
    if args.lam is not None:
        scaled = res.log_value + 0.5 * base.n * args.c_plus * math.log(args.lam)
        out["amplification"]["scaled_log_value"] = scaled
        out["amplification"]["scaled_value"] = math.exp(scaled)
    _write(args, out)
    return EXIT_OK


def _load_tuple(args, obj):
    if isinstance(obj, dict) and "A" in obj:
        return obj["A"]
    if args.tuple is None:
        raise UsageError("a tuple is required: pass --tuple or put 'A' in the input")
    A = _read_json(args.tuple)
    if isinstance(A, dict):
        A = _field(A, "A")
    return A


def cmd_certify(args):
    obj = _read_json(args.input)
    d = _load_datum(obj)
    A = [np.atleast_2d(np.asarray(a, dtype=float)) for a in _load_tuple(args, obj)]
    rep = extremizer_report(d, A, args.tol)
    _write(args, rep.to_dict())
    passed = rep.forward_passed if args.direction == "forward" else rep.passed
    return EXIT_OK if passed else EXIT_INVALID


def _parse_grid(text):
    try:
        vals = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"--t-grid: cannot parse '{text}'") from None
    return vals


def cmd_flow(args):
    obj = _read_json(args.input)
    t_grid = _parse_grid(args.t_grid) if args.t_grid else None
    if isinstance(obj, dict) and "mixtures" in obj:
        run = FlowRun.from_dict(obj)
        run = FlowRun(run.datum, run.A, run.mixtures, t_grid or run.t_grid,
                      args.samples or run.samples, args.seed if args.seed is not None else run.seed)
    else:
        d = _load_datum(obj)
        seed = args.seed or 0
        if args.tuple or (isinstance(obj, dict) and "A" in obj):
            A = _load_tuple(args, obj)
        else:
            A = optimize_gaussian(d, OptConfig(seed=seed)).A
        rng = np.random.default_rng(seed)
        mixtures = [sample_typeG(G, 3, 0.3 / math.sqrt(np.linalg.norm(G, 2)), rng)
                    for G in d.regularizers]
        run = FlowRun(d, A, mixtures, t_grid or DEFAULT_T_GRID, args.samples or 100_000, seed)
    rep = check_monotonicity(run, args.direction or "inverse")
    _write(args, {"run": run.to_dict(), "report": rep.to_dict()})
    return EXIT_OK if rep.passed else EXIT_INVALID


def cmd_young(args):
    obj = _read_json(args.input)
    c = _field(obj, "c")
    if not isinstance(c, list) or len(c) != 3:
        raise MalformedDatumError("c: expected three exponents")
    sigma = obj.get("sigma")
    if sigma is None:
        _write(args, {"constant": cf.young_constant(*c)})
        return EXIT_OK
    if len(sigma) == 2:
        spec = cf.YoungSpec.from_widths(*c, *sigma)
    else:
        spec = cf.YoungSpec(*c, *sigma)
    closed = cf.young_regularized(spec)
    d, order = cf.young_datum(spec)
    res = optimize_gaussian(d, _config(args, "infimum" if spec.regime == "inverse" else "supremum"))
    _write(args, {"spec": {"c": spec.c, "sigma": spec.sigma}, "closed_form": closed.to_dict(),
                  "optimizer_value": res.value, "datum_order": order})
    return EXIT_OK


def cmd_pl(args):
    obj = _read_json(args.input)
    c = _field(obj, "c")
    sigma = _field(obj, "sigma")
    spec = cf.PLSpec(c[0], c[1], sigma[0], sigma[1])
    closed = cf.pl_regularized(spec)
    d, factor = cf.pl_datum(spec)
    res = optimize_gaussian(d, _config(args, "infimum"))
    _write(args, {"closed_form": closed.to_dict(), "optimizer_constant": factor / res.value})
    return EXIT_OK


def cmd_hc(args):
    obj = _read_json(args.input)
    p = _field(obj, "p")
    s = _field(obj, "s")
    spec = cf.HCSpec(p, obj["q"], s) if "q" in obj else cf.HCSpec.from_p_s(p, s)
    d, order, C = cf.hc_datum(spec)
    _write(args, {"p": spec.p, "q": spec.q, "s": spec.s, "constant": C, "datum": d.to_dict(),
                  "datum_order": order, "nondegenerate": check_nondegenerate(d).to_dict()})
    return EXIT_OK


def cmd_oracle(args):
    d = _load_datum(_read_json(args.input))
    res = brute_force_oracle(d, GridSpec(points=args.points, direction=args.direction or "infimum"))
    _write(args, {"value": res.value, "log_value": res.log_value, "A": [a.tolist() for a in res.A]})
    return EXIT_OK


COMMANDS = {
    "check": (cmd_check, "validate a datum and test non-degeneracy"),
    "compute": (cmd_compute, "extremize the gaussian functional"),
    "certify": (cmd_certify, "check extremizer conditions for a given tuple"),
    "flow": (cmd_flow, "heat-flow monotonicity check with random type-G inputs"),
    "young": (cmd_young, "Young convolution constants"),
    "pl": (cmd_pl, "regularized Prekopa-Leindler constant"),
    "hc": (cmd_hc, "gaussian hypercontractivity datum and constant"),
    "oracle": (cmd_oracle, "brute-force grid extremization over diagonal tuples"),
}


def build_parser():
    parser = _Parser(prog="regbl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, helptext) in COMMANDS.items():
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--input", "-i", default="-", help="JSON input file ('-' for stdin)")
        p.add_argument("--output", "-o", help="write JSON here instead of stdout")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--samples", type=int, default=None, help="Monte-Carlo samples")
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--direction", choices=["infimum", "supremum", "inverse", "forward"])
        p.add_argument("--t-grid", dest="t_grid", help="comma separated times, e.g. 1,2,5,10,50,100")
        p.add_argument("--lambda", dest="lam", type=float, default=None,
                       help="amplify with (id, -c_plus, lambda id) before computing")
        p.add_argument("--c-plus", dest="c_plus", type=float, default=1.0)
        p.add_argument("--tuple", help="JSON file with the matrices A_j")
        p.add_argument("--points", type=int, default=40, help="grid points per axis (oracle)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.direction in ("inverse", "forward") and args.command in ("compute", "oracle", "young", "pl"):
        args.direction = {"inverse": "infimum", "forward": "supremum"}[args.direction]
    if args.seed is None and args.command != "flow":
        args.seed = 0
    func = COMMANDS[args.command][0]
    try:
        return func(args)
    except (MalformedDatumError, UsageError, KeyError, TypeError) as exc:
        print(f"regbl {args.command}: malformed input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DegenerateDatumError, SingularGaussianError, IntegrationError,
            np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"regbl {args.command}: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except ValueError as exc:
        print(f"regbl {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
