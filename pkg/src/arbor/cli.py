"""Command-line front end.

Exit codes: 0 success, 1 computation error or failed verification,
2 usage error.  Errors go to stderr as one JSON object.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .errors import ArborError, InvalidParams

MANIFEST_SUFFIX = ".manifest.json"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


# ---------------------------------------------------------------- group loading


def _load_group(args):
    from .zoo import GroupSpec, construct

    if getattr(args, "input", None):
        path = Path(args.input)
        text = path.read_text()
        args._inputs[str(path)] = _sha256(text.encode())
        return GroupSpec.from_json(text.strip())
    params = {}
    if args.m is not None:
        params["m"] = args.m
    if getattr(args, "r", None) is not None:
        params["r"] = args.r
    if getattr(args, "xs", None):
        try:
            params["xs"] = json.loads(args.xs)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--xs is not valid JSON: {exc}") from None
    if args.group == "wp2" and args.m is not None:
        params = {"p": args.m}
    return construct(args.group, **params)


def _cache_path(spec, N, method):
    root = os.environ.get("ARBOR_CACHE_DIR")
    if not root:
        return None
    key = _sha256(f"{spec.to_json()}|{N}|{method}".encode())[:32]
    return Path(root) / f"table-{key}.json"


def _table(spec, N, method="auto", jobs=1):
    """Index table with an optional on-disk cache (ARBOR_CACHE_DIR)."""
    from .permquot import IndexTable, index_table

    path = _cache_path(spec, N, method)
    if path is not None and path.exists():
        doc = json.loads(path.read_text())
        return IndexTable(doc["m"], [int(x) for x in doc["orders"]], doc["name"],
                          method=doc["method"])
    t = index_table(spec.gens, N, spec.m, method, jobs, spec.name)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps({"m": t.m, "orders": [str(o) for o in t.orders],
                                    "name": t.name, "method": t.method}))
    return t


def _h_order(spec, args):
    if getattr(args, "h_order", None):
        return args.h_order
    from .permquot import quotient

    return quotient(spec.gens, 1).order()


# ---------------------------------------------------------------- subcommands


def cmd_construct(args):
    if args.name:
        args.group = args.name
    spec = _load_group(args)
    if args.emit == "sexpr":
        return spec.to_sexpr()
    return spec.to_json() + "\n"


def cmd_quotients(args):
    spec = _load_group(args)
    return _table(spec, args.levels, args.method, args.jobs).to_csv()


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def cmd_hdim(args):
    from .dimension import estimate_ratio, hdim_selfsimilar_enclosure
    from .permquot import wreath_index_table

    spec = _load_group(args)
    N = args.levels
    h = _h_order(spec, args)
    direct = N + 1
    while direct > 2 and spec.m ** direct > args.max_points:
        direct -= 1
    table = _table(spec, direct, "auto", args.jobs)
    enc = hdim_selfsimilar_enclosure(spec.gens, h, N, spec.m, table=table,
                                     verify=not args.no_verify)
    ambient = wreath_index_table(h, spec.m, table.N)
    ratios = estimate_ratio(table, ambient)
    doc = {"group": spec.name, "m": spec.m, "h_order": h, **ratios.to_json(),
           "enclosure": enc.to_json(),
           "orders": [str(o) for o in enc.table.orders]}
    if spec.construct and spec.construct.get("name") == "sunic":
        r = spec.construct["params"]["r"]
        bound = 1 - Fraction(r + 1, spec.m ** (r - 1))
        doc["sunic_lower_bound"] = {"formula": "1 - (r+1)/m^(r-1)", "value": str(bound),
                                    "satisfied": bool(enc.lo >= float(bound) - 1e-9)}
    return _dump(doc)


def cmd_mu(args):
    from .tree import Antichain, antichain_for_target, mu

    if args.target is not None:
        try:
            gamma = Fraction(args.target)
        except (ValueError, ZeroDivisionError):
            raise UsageError(f"--target {args.target!r} is not a rational number") from None
        res = antichain_for_target(gamma, args.m, args.depth)
        doc = {"target": str(gamma), "antichain": res.antichain.to_json(),
               "interval": [str(res.lo), str(res.hi)], "exact": res.exact}
    elif args.antichain is not None:
        V = Antichain.of([v for v in args.antichain.split(",") if v], args.m)
        lo, hi = mu(V, args.depth)
        doc = {"antichain": V.to_json(), "interval": [str(lo), str(hi)]}
    else:
        raise UsageError("mu needs --target or --antichain")
    return _dump(doc)


def cmd_grig_filt(args):
    from .grigfilt import empirical_crosscheck

    c = empirical_crosscheck(args.max_m, args.level)
    if args.emit == "csv":
        return c.to_csv()
    return _dump(c.to_json())


def cmd_verify(args):
    from .acceptance import run_all

    selected = None
    if args.criteria:
        try:
            selected = {int(x) for x in args.criteria.split(",")}
        except ValueError:
            raise UsageError("--criteria takes comma-separated integers") from None
    results = run_all(selected)
    for r in results:
        print(r.line(), file=sys.stderr if args.out is None and args.json else sys.stdout)
    args._failed = not all(r.passed for r in results)
    return _dump({"results": [r.to_json() for r in results],
                  "passed": not args._failed}) if args.json or args.out else ""


# ---------------------------------------------------------------- parser


def _group_args(p, default=None):
    p.add_argument("--group", default=default,
                   help="built-in group name (grigorchuk, sunic, adding, basilica, "
                        "siegenthaler, wp2, lx)")
    p.add_argument("--input", help="group JSON file (overrides --group)")
    p.add_argument("--m", type=int, help="tree arity")
    p.add_argument("--r", type=int, help="Sunic parameter r")
    p.add_argument("--xs", help="JSON list of label permutations generating H")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="arbor", description="Congruence quotients and Hausdorff dimension "
                                          "of groups acting on rooted trees.")
    p.add_argument("--version", action="version", version=f"arbor {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--out", help="write the artifact here and a manifest beside it")
        sp.add_argument("--jobs", type=int, default=1, help="concurrent level computations")

    sp = sub.add_parser("construct", help="emit a group description")
    sp.add_argument("name", nargs="?", help="group name (same as --group)")
    _group_args(sp, "grigorchuk")
    sp.add_argument("--emit", choices=["json", "sexpr"], default="json")
    common(sp)
    sp.set_defaults(func=cmd_construct)

    sp = sub.add_parser("quotients", help="congruence quotient orders as CSV")
    _group_args(sp, "grigorchuk")
    sp.add_argument("--levels", type=int, required=True)
    sp.add_argument("--method", choices=["auto", "pcgs", "schreier-sims"], default="auto")
    common(sp)
    sp.set_defaults(func=cmd_quotients)

    sp = sub.add_parser("hdim", help="dimension enclosure for a self-similar group")
    _group_args(sp, "grigorchuk")
    sp.add_argument("--levels", type=int, required=True, help="truncation level N")
    sp.add_argument("--h-order", type=int, help="|H| of the ambient W_H (default: level-1 order)")
    sp.add_argument("--max-points", type=int, default=1024,
                    help="largest level size computed directly")
    sp.add_argument("--no-verify", action="store_true", help="skip the section-closure check")
    common(sp)
    sp.set_defaults(func=cmd_hdim)

    sp = sub.add_parser("mu", help="antichain measure or antichain for a target")
    sp.add_argument("--target", help="rational target in [0,1], e.g. 5/8")
    sp.add_argument("--antichain", help="comma-separated vertices, e.g. 0,100")
    sp.add_argument("--m", type=int, default=2)
    sp.add_argument("--depth", type=int, default=20)
    common(sp)
    sp.set_defaults(func=cmd_mu)

    sp = sub.add_parser("grig-filt", help="Grigorchuk filtration cross-check")
    sp.add_argument("--max-m", type=int, default=2)
    sp.add_argument("--level", type=int, default=6)
    sp.add_argument("--emit", choices=["csv", "json"], default="csv")
    common(sp)
    sp.set_defaults(func=cmd_grig_filt)

    sp = sub.add_parser("verify", help="run the acceptance suite")
    sp.add_argument("--criteria", help="subset, e.g. 1,3,5")
    sp.add_argument("--json", action="store_true", help="print a JSON summary")
    common(sp)
    sp.set_defaults(func=cmd_verify)
    return p


def _write_outputs(args, argv, text):
    path = Path(args.out)
    data = text.encode()
    path.write_bytes(data)
    manifest = {
        "subcommand": args.command,
        "argv": list(argv),
        "parameters": {k: v for k, v in sorted(vars(args).items())
                       if not k.startswith("_") and k not in ("func", "out")},
        "inputs": dict(sorted(args._inputs.items())),
        "tool_version": __version__,
        "outputs": {str(path): _sha256(data)},
    }
    Path(str(path) + MANIFEST_SUFFIX).write_text(_dump(manifest))


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be positive")
        args._inputs = {}
        args._failed = False
        text = args.func(args)
        if args.out:
            _write_outputs(args, argv, text)
        elif text:
            sys.stdout.write(text)
        return 1 if args._failed else 0
    except UsageError as exc:
        print(json.dumps({"error": "usage", "message": str(exc)}), file=sys.stderr)
        return 2
    except InvalidParams as exc:
        print(json.dumps(exc.to_json()), file=sys.stderr)
        return 2
    except ArborError as exc:
        print(json.dumps(exc.to_json()), file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


def main() -> int:
    return run()
