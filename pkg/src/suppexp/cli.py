"""Command-line front end.

Every command prints JSON (or CSV) to stdout or ``--out``; the run
configuration is embedded in each JSON output so that runs can be repeated.
Exit codes: 0 ok, 1 internal error, 2 hypothesis violation, 3 budget
exceeded, 64 usage error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, asdict, fields
from fractions import Fraction

import numpy as np

from . import _num
from . import chains, discrete, oplab, poset, transforms
from . import extfun as ef
from .errors import BudgetExceeded, HypothesisViolation

EXIT_OK, EXIT_INTERNAL, EXIT_HYPOTHESIS, EXIT_BUDGET, EXIT_USAGE = 0, 1, 2, 3, 64

STOCK = {
    "sqrt_capped": ef.sqrt_capped,
    "identity": ef.identity,
    "id": ef.identity,
    "truncated_identity": ef.truncated_identity,
    "x_plus_one": ef.x_plus_one,
    "infinite": ef.infinite_function,
    "zero": lambda: ef.Const(0),
    "sqrt": lambda: ef.Power(1, Fraction(1, 2)),
}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    probe_floor_logx: float = -1e4
    probe_floor_loglogx: float = 4e4
    ratio_threshold: float = 1e6
    grid_h: str = "1/1024"
    seed: int = 0
    n_max: int = 3
    word_depth: int = 3
    stages: int = 6
    depth: int = 24

    def validate(self):
        if self.probe_floor_logx >= 0 or self.ratio_threshold <= 1 or Fraction(self.grid_h) <= 0:
            raise UsageError("probe floor must be negative, ratio threshold > 1 and grid_h > 0")
        for name in ("n_max", "word_depth", "stages", "depth"):
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be positive")
        return self

    @classmethod
    def resolve(cls, args, environ=None):
        """Defaults, then SUPPEXP_* environment variables, then explicit flags."""
        environ = os.environ if environ is None else environ
        cfg = cls()
        for f in fields(cls):
            env = environ.get("SUPPEXP_" + f.name.upper())
            if env is not None:
                setattr(cfg, f.name, _coerce(f.type, env))
            val = getattr(args, f.name, None)
            if val is not None:
                setattr(cfg, f.name, _coerce(f.type, val))
        return cfg.validate()

    def poset_options(self, **kw):
        return poset.PosetOptions(n_max=self.n_max, probe_floor_logx=self.probe_floor_logx,
                                  probe_floor_loglogx=self.probe_floor_loglogx,
                                  ratio_threshold=self.ratio_threshold, word_depth=self.word_depth, **kw)


def _coerce(typ, v):
    t = {"float": float, "int": int, "str": str}.get(typ if isinstance(typ, str) else typ.__name__, str)
    try:
        return t(v)
    except ValueError as exc:
        raise UsageError(f"bad configuration value {v!r}") from exc


# ---------------------------------------------------------------- io helpers

def load_function(spec: str) -> ef.ExtFun:
    if spec in STOCK:
        return STOCK[spec]()
    text = spec if spec.lstrip().startswith("{") else _read(spec)
    try:
        return ef.from_json(json.loads(text))
    except (KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot parse function {spec!r}: {exc}") from exc


def _read(path):
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(str(exc)) from exc


def _parse_x(s: str):
    s = s.strip()
    if s in ("inf", "Infinity"):
        return ef.INF
    try:
        return Fraction(s)
    except ValueError:
        raise UsageError(f"bad number {s!r}") from None


def _val(v):
    if isinstance(v, Fraction):
        return ef.rat_str(v)
    return _num.fmt(v)


class Output:
    def __init__(self, path):
        self.path = path

    def write(self, text: str):
        if self.path:
            with open(self.path, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)

    def json(self, payload, cfg: RunConfig | None):
        doc = {"result": payload}
        if cfg is not None:
            doc["config"] = asdict(cfg)
        self.write(json.dumps(doc, sort_keys=True, indent=1, default=_default) + "\n")


def _default(o):
    if isinstance(o, Fraction):
        return ef.rat_str(o)
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if _num.is_mpfr(o):
        return _num.fmt(o)
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


# ---------------------------------------------------------------- commands

def cmd_fn(args, cfg, out):
    f = load_function(args.f)
    if args.action == "eval":
        res = {x: _val(f.eval(_parse_x(x))) for x in args.x}
        out.json({"values": res}, cfg)
    elif args.action == "sample":
        xs = np.geomspace(float(args.lo), float(args.hi), int(args.n))
        out.write(ef.sample_csv(f, xs))
    elif args.action == "check":
        res = ef.check_class(f, args.cls)
        out.json({"class": args.cls, **res.to_json()}, cfg)
    elif args.action == "transform":
        g = transforms.apply(args.op, f)
        body = g.to_json() if hasattr(g, "to_json") else None
        out.json({"op": args.op, "function": body}, cfg)


def cmd_poset(args, cfg, out):
    if args.action == "compare":
        F = [load_function(s) for s in args.f]
        G = [load_function(s) for s in args.g]
        extra = ()
        if args.extra_probes:
            extra = tuple(_num.parse_real(t) for t in json.loads(_read(args.extra_probes)))
        opts = cfg.poset_options(extra_probe_logx=extra)
        if len(F) == 1 and len(G) == 1 and not args.family:
            v = poset.contains_single(F[0], G[0], opts)
        else:
            v = poset.contains_family(F, G, opts)
        out.json(v.to_json(), cfg)
    elif args.action == "classify":
        label = poset.classify_top_region([load_function(s) for s in args.f])
        out.json({"region": str(label), "label": label.to_json()}, cfg)
    elif args.action == "classify-discrete":
        seqs = []
        for path in args.seq:
            d = json.loads(_read(path))
            items = d if isinstance(d, list) else [d]
            seqs.extend(discrete.IntSequence.from_json(x) for x in items)
        out.json({"class": poset.classify_discrete(seqs)}, cfg)
    elif args.action == "verify":
        d = json.loads(_read(args.verdict))
        d = d.get("result", d)
        chk = poset.verify(d)
        out.json(chk.to_json(), cfg)
        return EXIT_OK if chk.ok else EXIT_HYPOTHESIS
    return EXIT_OK


def cmd_discrete(args, cfg, out):
    p = discrete.load_pattern(args.pattern)
    if args.action == "phi":
        n_max = args.n_max_cols if args.n_max_cols is not None else p.n_cols
        mode = "Greedy" if args.greedy else "Exact"
        phi = discrete.phi_sequence(p, n_max, mode)
        if args.format == "json":
            out.json(phi.to_json(), cfg)
        elif args.format == "csv":
            out.write(phi.csv())
        else:
            out.write(",".join(str(v) for v in phi.values) + "\n")
    elif args.action == "rc-check":
        rc = discrete.is_rc_finite(p)
        out.json(rc.to_json(), cfg)


def _grid(cfg, length):
    return oplab.Grid(h=Fraction(cfg.grid_h), length=Fraction(length))


def _build_op(args, cfg):
    if args.kind == "weighted":
        if not args.f or args.r is None:
            raise UsageError("weighted operators need --f and --r")
        return oplab.build_weighted_composition(load_function(args.f), Fraction(args.r),
                                                _grid(cfg, args.length))
    if args.kind == "haar":
        return oplab.build_haar_separator(args.K, _grid(cfg, 1))
    if args.kind == "dyadic":
        h = Fraction(args.h) if args.h else Fraction(1, 4)
        return oplab.build_dyadic_separator(args.K, oplab.Grid(h=h, length=2 ** (args.K + 1)))
    raise UsageError(f"unknown operator kind {args.kind!r}")


def cmd_oplab(args, cfg, out):
    if args.action == "distance":
        rep = oplab.distance_lower_bound(load_function(args.f), Fraction(args.r), load_function(args.g),
                                         Fraction(args.x0), _grid(cfg, args.length), seed=cfg.seed)
        out.json(rep.to_json(), cfg)
        return
    op = _build_op(args, cfg)
    if args.action == "build":
        out.write(op.export_coo())
    elif args.action == "phi":
        o = oplab.adjoint(op) if args.adjoint else op
        xs = [float(_parse_x(x)) for x in args.x] if args.x else \
            list(np.arange(0, o.shape[1] + 1) * o.h)
        out.write(oplab.measure_phi(o, xs, "Greedy" if args.greedy else "Exact").csv())
    elif args.action == "collapse":
        rep = oplab.collapse_check(op, step=float(Fraction(args.step)) if args.step else None)
        out.json(rep.to_json(), cfg)


def cmd_chains(args, cfg, out):
    if args.action in ("ascend", "descend"):
        seed = load_function(args.f) if args.f else None
        chain = chains.ascend(seed, args.steps, cfg.depth)
        if args.action == "descend":
            chain = chains.descend(chain)
        out.json({"functions": [f.to_json() for f in chain]}, cfg)
    elif args.action == "antichain":
        F = [load_function(s) for s in (args.f or ["sqrt_capped"])]
        tr = chains.antichain_extend(F, cfg.stages)
        body = tr.to_json()
        body["invariant_failures"] = chains.check_transcript(tr)
        out.json(body, cfg)


def cmd_suite(args, cfg, out):
    from . import suite
    only = set(args.only) if args.only else None
    results = suite.run_all(only, args.jobs)
    lines = [f"criterion {r['index']}: {'PASS' if r['passed'] else 'FAIL'} ({r['criterion']}, "
             f"{r['seconds']}s)" for r in results]
    sys.stderr.write("\n".join(lines) + "\n")
    report = {"criteria": results, "all_passed": all(r["passed"] for r in results), "config": asdict(cfg)}
    path = args.out or "report.json"
    with open(path, "w") as fh:
        fh.write(json.dumps(report, sort_keys=True, indent=1, default=_default) + "\n")
    return EXIT_OK if report["all_passed"] else EXIT_INTERNAL


# ---------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out", help="write output to this file instead of stdout")
    common.add_argument("--seed", type=int)
    common.add_argument("--probe-floor-logx", dest="probe_floor_logx", type=float)
    common.add_argument("--probe-floor-loglogx", dest="probe_floor_loglogx", type=float)
    common.add_argument("--ratio-threshold", dest="ratio_threshold", type=float)
    common.add_argument("--grid-h", dest="grid_h")
    common.add_argument("--n-max", dest="n_max", type=int)
    common.add_argument("--word-depth", dest="word_depth", type=int)
    common.add_argument("--stages", type=int)
    common.add_argument("--depth", type=int)

    p = _Parser(prog="suppexp", description="support expansion toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fn = sub.add_parser("fn", help="function calculus").add_subparsers(dest="action", required=True,
                                                                        parser_class=_Parser)
    a = fn.add_parser("eval", parents=[common]); a.add_argument("--f", required=True)
    a.add_argument("--x", nargs="+", required=True)
    a = fn.add_parser("sample", parents=[common]); a.add_argument("--f", required=True)
    a.add_argument("--lo", default="1e-6"); a.add_argument("--hi", default="1e6")
    a.add_argument("--n", default=61)
    a = fn.add_parser("check", parents=[common]); a.add_argument("--f", required=True)
    a.add_argument("--class", dest="cls", required=True, choices=sorted(ef.CLASSES))
    a = fn.add_parser("transform", parents=[common]); a.add_argument("--f", required=True)
    a.add_argument("--op", required=True)

    ps = sub.add_parser("poset", help="containment queries").add_subparsers(dest="action", required=True,
                                                                            parser_class=_Parser)
    a = ps.add_parser("compare", parents=[common])
    a.add_argument("--f", action="append", required=True)
    a.add_argument("--g", action="append", required=True)
    a.add_argument("--family", action="store_true", help="treat --f/--g as generating families")
    a.add_argument("--extra-probes", help="JSON list of ln x witness points")
    a = ps.add_parser("classify", parents=[common]); a.add_argument("--f", action="append", required=True)
    a = ps.add_parser("classify-discrete", parents=[common])
    a.add_argument("--seq", action="append", required=True)
    a = ps.add_parser("verify", parents=[common]); a.add_argument("--verdict", required=True)

    ds = sub.add_parser("discrete", help="sparse patterns").add_subparsers(dest="action", required=True,
                                                                          parser_class=_Parser)
    a = ds.add_parser("phi", parents=[common]); a.add_argument("--pattern", required=True)
    g = a.add_mutually_exclusive_group()
    g.add_argument("--exact", action="store_true"); g.add_argument("--greedy", action="store_true")
    a.add_argument("--up-to", dest="n_max_cols", type=int)
    a.add_argument("--format", choices=["plain", "csv", "json"], default="plain")
    a = ds.add_parser("rc-check", parents=[common]); a.add_argument("--pattern", required=True)

    ol = sub.add_parser("oplab", help="operator laboratory").add_subparsers(dest="action", required=True,
                                                                           parser_class=_Parser)
    for name in ("build", "phi", "collapse"):
        a = ol.add_parser(name, parents=[common])
        a.add_argument("--kind", choices=["weighted", "haar", "dyadic"], default="weighted")
        a.add_argument("--f"); a.add_argument("--r")
        a.add_argument("--K", type=int, default=6)
        a.add_argument("--h", help="cell width for the dyadic grid")
        a.add_argument("--length", default="16")
        if name == "phi":
            a.add_argument("--x", nargs="+")
            a.add_argument("--adjoint", action="store_true")
            a.add_argument("--greedy", action="store_true")
        if name == "collapse":
            a.add_argument("--step")
    a = ol.add_parser("distance", parents=[common])
    a.add_argument("--f", required=True); a.add_argument("--g", required=True)
    a.add_argument("--r", required=True); a.add_argument("--x0", required=True)
    a.add_argument("--length", default="16")

    ch = sub.add_parser("chains", help="chains and antichains").add_subparsers(dest="action", required=True,
                                                                              parser_class=_Parser)
    for name in ("ascend", "descend"):
        a = ch.add_parser(name, parents=[common]); a.add_argument("--f")
        a.add_argument("--steps", type=int, default=4)
    a = ch.add_parser("antichain", parents=[common]); a.add_argument("--f", action="append")

    st = sub.add_parser("suite", help="acceptance battery").add_subparsers(dest="action", required=True,
                                                                          parser_class=_Parser)
    a = st.add_parser("paper", parents=[common])
    a.add_argument("--only", type=int, nargs="+", help="run only these criteria")
    a.add_argument("--jobs", type=int, default=1, help="worker processes (timings are per criterion)")
    return p


HANDLERS = {"fn": cmd_fn, "poset": cmd_poset, "discrete": cmd_discrete, "oplab": cmd_oplab,
            "chains": cmd_chains, "suite": cmd_suite}


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = RunConfig.resolve(args)
        code = HANDLERS[args.command](args, cfg, Output(getattr(args, "out", None)))
        return EXIT_OK if code is None else code
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except HypothesisViolation as exc:
        sys.stderr.write(f"hypothesis violation: {exc}\n")
        return EXIT_HYPOTHESIS
    except BudgetExceeded as exc:
        sys.stderr.write(f"budget exceeded: {exc}\n")
        return EXIT_BUDGET
    except Exception as exc:  # noqa: BLE001 - reported as an internal error
        sys.stderr.write(f"internal error: {type(exc).__name__}: {exc}\n")
        return EXIT_INTERNAL


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
