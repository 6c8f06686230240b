"""Command-line front end.

Configuration is a flat ``key = value`` text file (``#`` starts a comment);
command-line flags override file values.  Keys:

    p             prime (2 or 3 at desk scale)
    precision     p-adic relative precision of parsed matrices
    model         trivial | principal
    level         minimal cell level of the principal-series model
    origin        base | a,c,b (canonical form of a vertex)
    W             window radius
    e_min, e_max  depth range
    r_min, r_max  truncation radius range
    max_quotient  largest finite group averaged over
    max_facets    largest window allowed
    seed          random seed (recorded in every output)
    workers       accepted and recorded; evaluation is sequential
    out           output path (stdout when empty)

Exit codes: 0 success, 1 invariant failure, 2 configuration error,
3 budget or precision exhaustion.
"""
from __future__ import annotations

import argparse
import ast
import hashlib
import json
import operator
import random
import sys
from dataclasses import asdict, dataclass, fields
from fractions import Fraction

from . import chains as ch
from .character import (character_report, deep_fiber_trace, fixed_facet_sum,
                        hopf_character, independence_scan)
from .coeff import (geodesic_convexity_check, invariant_partition_at_level, make_model)
from .elements import classify, fixed_set, is_convex, sliding_window_counts, tube
from .errors import BTCharError, BudgetExceeded, ConfigError, NotRegular, PrecisionExhausted
from .padic import DEFAULT_PRECISION, Matrix2
from .tree import (Vertex, act, ball, ball_count, base_vertex, canon_tri, distance, geodesic,
                   to_dot)
from .truncate import truncated_building

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3


@dataclass
class RunConfig:
    p: int = 2
    precision: int = DEFAULT_PRECISION
    model: str = "principal"
    level: int = 2
    origin: str = "base"
    W: int = 4
    e_min: int = 0
    e_max: int = 2
    r_min: int = 0
    r_max: int = 2
    max_quotient: int = 100_000
    max_facets: int = 2_000
    seed: int = 0
    workers: int = 1
    out: str = ""

    def validate(self) -> None:
        if self.p not in (2, 3, 5, 7):
            raise ConfigError(f"p={self.p}: use a small prime (2, 3, 5 or 7)")
        if self.precision < 4:
            raise ConfigError("precision must be at least 4")
        if self.model not in ("trivial", "principal"):
            raise ConfigError(f"model={self.model!r}: use 'trivial' or 'principal'")
        if self.level < 0:
            raise ConfigError("level must be non-negative")
        if not (0 <= self.e_min <= self.e_max):
            raise ConfigError("need 0 <= e_min <= e_max")
        if not (0 <= self.r_min <= self.r_max):
            raise ConfigError("need 0 <= r_min <= r_max")
        if self.W < self.r_max + 2:
            raise ConfigError(f"window radius W={self.W} must be at least r_max + 2 = {self.r_max + 2}; "
                              f"raise W or lower r_max")
        if self.max_quotient <= 0 or self.max_facets <= 0:
            raise ConfigError("budgets must be positive")
        if self.workers <= 0:
            raise ConfigError("workers must be positive")
        if ball_count(self.p, self.W) > self.max_facets:
            raise ConfigError(f"window of radius {self.W} has {ball_count(self.p, self.W)} vertices, "
                              f"over max_facets={self.max_facets}")
        self.origin_vertex()

    def model_tag(self) -> str:
        return "trivial" if self.model == "trivial" else f"principal:{self.level}"

    def origin_vertex(self) -> Vertex:
        if self.origin == "base":
            return base_vertex(self.p)
        try:
            a, c, b = (int(t) for t in self.origin.split(","))
        except ValueError:
            raise ConfigError(f"origin={self.origin!r}: use 'base' or 'a,c,b'") from None
        if min(a, c, b) < 0:
            raise ConfigError("origin entries must be non-negative")
        return canon_tri(a, c, b, self.p)

    def as_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        d = self.as_dict()
        d.pop("out", None)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def _coerce(name: str, raw: str):
    for f in fields(RunConfig):
        if f.name == name:
            if f.type in ("int", int):
                try:
                    return int(raw)
                except ValueError:
                    raise ConfigError(f"{name} must be an integer, got {raw!r}") from None
            return raw
    raise ConfigError(f"unknown config key {name!r}")


def parse_config_text(text: str) -> dict:
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        k, v = (t.strip() for t in line.split("=", 1))
        out[k] = _coerce(k, v)
    return out


def load_config(path: str | None, overrides: dict) -> RunConfig:
    values = {}
    if path:
        try:
            with open(path) as fh:
                values.update(parse_config_text(fh.read()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    for k, v in overrides.items():
        if v is not None:
            values[k] = _coerce(k, str(v))
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


# element syntax -------------------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}


def _eval_entry(node, p: int) -> Fraction:
    if isinstance(node, ast.Constant) and isinstance(node.value, int):
        return Fraction(node.value)
    if isinstance(node, ast.Name) and node.id == "p":
        return Fraction(p)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        x = _eval_entry(node.operand, p)
        return -x if isinstance(node.op, ast.USub) else x
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        a = _eval_entry(node.left, p)
        b = _eval_entry(node.right, p)
        if isinstance(node.op, ast.Pow):
            if b.denominator != 1 or abs(b) > 64:
                raise ConfigError("exponents must be small integers")
            return a ** int(b)
        if isinstance(node.op, ast.Div) and b == 0:
            raise ConfigError("division by zero in element")
        return _BINOPS[type(node.op)](a, b)
    raise ConfigError(f"unsupported expression in element: {ast.dump(node)}")


def parse_element(text: str, p: int, precision: int = DEFAULT_PRECISION) -> Matrix2:
    """Parse ``id``, ``diag(x,y)`` or ``[[a,b],[c,d]]``.

    Entries are rational expressions in the prime ``p`` using + - * / and
    ``^`` (or ``**``) for powers, e.g. ``diag(1,1+p^2)`` or ``[[1,p],[1,1]]``.
    """
    s = text.strip().replace("^", "**")
    if s == "id":
        return Matrix2.identity(p, precision)
    try:
        tree = ast.parse(s, mode="eval").body
    except SyntaxError:
        raise ConfigError(f"cannot parse element {text!r}") from None
    if isinstance(tree, ast.Call) and isinstance(tree.func, ast.Name) and tree.func.id == "diag":
        if len(tree.args) != 2:
            raise ConfigError("diag takes two entries")
        x, y = (_eval_entry(a, p) for a in tree.args)
        rows = [[x, 0], [0, y]]
    elif isinstance(tree, ast.List) and len(tree.elts) == 2 and all(
            isinstance(r, ast.List) and len(r.elts) == 2 for r in tree.elts):
        rows = [[_eval_entry(t, p) for t in r.elts] for r in tree.elts]
    else:
        raise ConfigError(f"element {text!r} is not id, diag(x,y) or [[a,b],[c,d]]")
    if rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0] == 0:
        raise ConfigError(f"element {text!r} is singular")
    return Matrix2.from_rows(rows, p, precision)


# output -------------------------------------------------------------------------

def _envelope(cfg: RunConfig, command: str, payload: dict) -> dict:
    return {"command": command, "config": cfg.as_dict(), "config_hash": cfg.digest(),
            "seed": cfg.seed, **payload}


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_json(cfg: RunConfig, command: str, payload: dict) -> None:
    _emit(cfg, json.dumps(_envelope(cfg, command, payload), indent=2, sort_keys=True) + "\n")


# commands -------------------------------------------------------------------------

def cmd_classify(cfg: RunConfig, args) -> int:
    g = parse_element(args.element, cfg.p, cfg.precision)
    o = cfg.origin_vertex()
    win = ball(o, cfg.W)
    payload = {"element": args.element}
    try:
        payload["classification"] = classify(g).as_dict()
    except NotRegular as exc:
        payload["classification"] = {"tag": "NotRegular", "note": str(exc)}
    fs = fixed_set(g, win)
    payload["fixed_set"] = fs.summary()
    payload["window_vertices"] = len(win.vertices)
    payload["fixes_window"] = len(fs.vertices) == len(win.vertices)
    payload["compact"] = bool(fs.vertices or fs.edges)
    _emit_json(cfg, "classify", payload)
    return EXIT_OK


def cmd_fixedset(cfg: RunConfig, args) -> int:
    g = parse_element(args.element, cfg.p, cfg.precision)
    win = ball(cfg.origin_vertex(), cfg.W)
    fs = fixed_set(g, win)
    payload = {"element": args.element, "summary": fs.summary(),
               "vertices": sorted(v.label() for v in fs.vertices),
               "edges": sorted(f"{e.tail.label()}|{e.head.label()}" for e in fs.stable_edges),
               "reversed_edges": sorted(f"{e.tail.label()}|{e.head.label()}" for e in fs.reversed_edges),
               "convex": is_convex(fs.vertices)}
    if args.dot:
        with open(args.dot, "w") as fh:
            fh.write(to_dot(win, fs.vertices, fs.stable_edges))
        payload["dot"] = args.dot
    _emit_json(cfg, "fixedset", payload)
    return EXIT_OK


def cmd_truncate(cfg: RunConfig, args) -> int:
    o = cfg.origin_vertex()
    r = args.r if args.r is not None else cfg.r_max
    xr = truncated_building(o, r)
    payload = {"r": r, "vertices": len(xr.vertices), "edges": len(xr.edges),
               "iterations": xr.iterations, "equals_ball": xr.vertices == set(ball(o, xr.r).vertices),
               "facets": xr.as_dict()}
    _emit_json(cfg, "truncate", payload)
    return EXIT_OK


def cmd_character(cfg: RunConfig, args) -> int:
    g = parse_element(args.element, cfg.p, cfg.precision)
    model = make_model(cfg.model_tag(), cfg.p)
    e = args.e if args.e is not None else cfg.e_max
    r = args.r if args.r is not None else cfg.r_max
    rep = character_report(g, e, r, model, cfg.W, args.element, with_hopf=not args.no_hopf,
                           origin=cfg.origin_vertex())
    _emit_json(cfg, "character", {"report": rep.as_dict(), "value": str(rep.fixed_facet_sum)})
    return EXIT_OK


def cmd_scan(cfg: RunConfig, args) -> int:
    g = parse_element(args.element, cfg.p, cfg.precision)
    model = make_model(cfg.model_tag(), cfg.p)
    res = independence_scan(g, model, range(cfg.e_min, cfg.e_max + 1),
                            range(cfg.r_min, cfg.r_max + 1))
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(res.to_csv())
    _emit_json(cfg, "scan", {"element": args.element, "scan": res.as_dict(),
                             "note": "plateau values are exhibited, not certified"})
    return EXIT_OK


def cmd_dump_matrix(cfg: RunConfig, args) -> int:
    model = make_model(cfg.model_tag(), cfg.p)
    e = args.e if args.e is not None else cfg.e_min
    r = args.r if args.r is not None else cfg.r_min
    cx = ch.ChainComplex(model, e, ball(cfg.origin_vertex(), cfg.W))
    which = args.which
    if which == "boundary":
        m = cx.boundary()
    elif which == "augmentation":
        m = cx.augmentation()
    elif which in ("Q0", "Q1"):
        m = cx.truncation(r)[int(which[1])]
    elif which in ("avg0", "avg1"):
        m = cx.averaging()[int(which[3])]
    else:
        if not args.element:
            raise ConfigError(f"{which} needs --element")
        g = parse_element(args.element, cfg.p, cfg.precision)
        if which in ("T0", "T1"):
            m = cx.action_matrices(g)[int(which[1])]
        else:
            mt = ch.modified_truncation(ch.build_decomposition(cx, g, r))
            m = mt.q0 if which == "Qbar0" else mt.q1
    _emit(cfg, f"# {which} e={e} r={r} W={cfg.W} model={cfg.model_tag()} "
               f"config_hash={cfg.digest()} seed={cfg.seed}\n" + ch.matrix_triplets(m))
    return EXIT_OK


# verification suite ------------------------------------------------------------------

def run_verify(cfg: RunConfig, quick: bool = False) -> list[dict]:
    """Run the invariant suite; returns one record per check."""
    rng = random.Random(cfg.seed)
    p = cfg.p
    o = cfg.origin_vertex()
    model = make_model(cfg.model_tag(), p)
    results: list[dict] = []

    def record(name: str, ok: bool, detail=None) -> None:
        results.append({"check": name, "ok": bool(ok), "detail": detail})

    def guarded(name: str, fn) -> None:
        try:
            ok, detail = fn()
        except BTCharError as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        record(name, ok, detail)

    # tree ------------------------------------------------------------------
    def tree_counts():
        got = [len(ball(o, r).vertices) for r in range(5)]
        return got == [ball_count(p, r) for r in range(5)], got
    guarded("tree.ball_counts", tree_counts)

    def tree_isometry():
        win = ball(o, 3)
        vs = win.vertices
        for _ in range(30 if quick else 100):
            g = _random_gl2(rng, p)
            u, w = rng.choice(vs), rng.choice(vs)
            if distance(act(g, u), act(g, w)) != distance(u, w):
                return False, (u.label(), w.label())
        return True, None
    guarded("tree.isometry", tree_isometry)

    # fixed sets and truncation -------------------------------------------------------
    def tubes():
        out = {}
        for rs in (1, 2):
            g = Matrix2.diag(1, 1 + p ** rs, p)
            win = ball(base_vertex(p), rs + 3)
            fs = set(fixed_set(g, win).vertices)
            t = tube(g, rs, win)
            out[rs] = len(fs)
            if fs != t:
                return False, out
        return True, out
    guarded("elements.fixed_set_tube", tubes)

    def pgl2():
        g = Matrix2.from_rows([[0, 1], [p, 0]], p)
        fs = fixed_set(g, ball(base_vertex(p), 3))
        return (not fs.vertices and len(fs.edges) == 1 and fs.edges[0][1]), fs.summary()
    guarded("elements.pgl2_edge", pgl2)

    def trunc():
        for r in range(0, 4):
            xr = truncated_building(o, r)
            if xr.vertices != set(ball(o, r).vertices):
                return False, r
        return True, None
    guarded("truncate.fixpoint_is_ball", trunc)

    # U-properties -------------------------------------------------------------------
    def u_props():
        win = ball(o, 3)
        for _ in range(15 if quick else 40):
            e = rng.randint(cfg.e_min, cfg.e_max)
            E = rng.choice(win.edges)
            PE = model.partition(E, e)
            for v in E.vertices():
                if not PE.is_coarser_than(model.partition(v, e)):
                    return False, ("U4", str(E), e)
            if cfg.model == "principal":
                ref = invariant_partition_at_level(E, e, PE.level)
                if ref.nblocks != PE.nblocks or not ref.is_coarser_than(PE):
                    return False, ("U6", str(E), e)
            x, y = rng.choice(win.vertices), rng.choice(win.vertices)
            for z in geodesic(x, y):
                if not geodesic_convexity_check(x, y, z, e, model):
                    return False, ("U7", x.label(), y.label(), z.label(), e)
        return True, None
    guarded("coeff.u_properties", u_props)

    # chain complexes -------------------------------------------------------------------
    elements = [("diag(1,1+p)", Matrix2.diag(1, 1 + p, p)),
                ("[[1,p],[1,1]]", Matrix2.from_rows([[1, p], [1, 1]], p))]
    for e in range(cfg.e_min, cfg.e_max + 1):
        cx = ch.ChainComplex(model, e, ball(o, cfg.W))
        D = cx.boundary()
        eps = cx.augmentation()
        record(f"chains.e{e}.eps_boundary_zero", (eps @ D).is_zero())
        A0, A1 = cx.averaging()
        record(f"chains.e{e}.averaging_chain_map", D @ A1 == A0 @ D)
        for name, g in elements:
            if act(g, o) != o:
                continue
            T0, T1 = cx.action_matrices(g)
            record(f"chains.e{e}.{name}.equivariance", D @ T1 == T0 @ D)
            for r in range(cfg.r_min, cfg.r_max + 1):
                tag = f"e{e}.r{r}.{name}"

                def qbar_checks(g=g, r=r, T0=T0, T1=T1):
                    dec = ch.build_decomposition(cx, g, r)
                    mt = ch.modified_truncation(dec)
                    in0, in1 = dec.in0, dec.in1
                    details = {}
                    details["chain_map"] = D @ mt.q1 == mt.q0 @ D
                    details["identity_on_inner"] = (
                        all(mt.q0.column(i) == {i: 1} for i in in0)
                        and all(mt.q1.column(j) == {j: 1} for j in in1))
                    details["image_inside"] = (set(mt.q0.rows) <= set(in0)
                                               and set(mt.q1.rows) <= set(in1))
                    details["rank_bound"] = (mt.q0.rank() <= len(in0) and mt.q1.rank() <= len(in1))
                    details["trace_transfer"] = ((T0 @ mt.Q0).trace() == (T0 @ mt.q0).trace()
                                                 and (T1 @ mt.Q1).trace() == (T1 @ mt.q1).trace())
                    res = hopf_character(g, e, r, model, cfg.W, cx=cx)
                    details["hopf_equals_fiber_trace"] = res.agrees
                    if res.k_ok:
                        ffs = fixed_facet_sum(g, e, r, model, o)[0]
                        deep = deep_fiber_trace(g, model, o)[0]
                        details["three_way_on_plateau"] = res.value == deep == ffs
                    return all(details.values()), {k: bool(v) for k, v in details.items()}
                guarded(f"chains.{tag}.qbar", qbar_checks)

            def witness():
                w = ch.truncation_witness(cx, cfg.r_min)
                return w is not None, None if w is None else str(w["edge"])
            guarded(f"chains.e{e}.truncation_witness", witness)

        def cycles(e=e, cx=cx):
            r = cfg.r_max
            n = 10 if quick else 30
            for _ in range(n):
                w = cx.random_cycle(rng, r)
                d = cx.reduce_cycle(w, r)
                if D.matvec(d) != w:
                    return False, "roundtrip"
                if any(cx.window.edge_depth(cx.basis1[j][0]) > r for j in d):
                    return False, "support left X^r"
            return True, n
        guarded(f"chains.e{e}.reduce_cycle", cycles)

    # periodicity ----------------------------------------------------------------------
    def periodicity():
        g = Matrix2.diag(1, 1 + p, p)
        counts = [c for _, c in sliding_window_counts(g, 2, ball(base_vertex(p), 5))]
        return len(set(counts)) == 1 and len(counts) > 1, counts
    guarded("elements.sliding_counts", periodicity)

    # trivial model -------------------------------------------------------------------------
    def trivial_one():
        tm = make_model("trivial", p)
        vals = []
        for name, g in elements + [("[[0,1],[p,0]]", Matrix2.from_rows([[0, 1], [p, 0]], p))]:
            vals.append(str(fixed_facet_sum(g, cfg.e_min, max(cfg.r_max, 1), tm)[0]))
        return all(v == "1" for v in vals), vals
    guarded("character.trivial_model", trivial_one)
    return results


def _random_gl2(rng: random.Random, p: int) -> Matrix2:
    while True:
        ent = [rng.randint(-6, 6) * p ** rng.randint(0, 2) for _ in range(4)]
        if ent[0] * ent[3] - ent[1] * ent[2] != 0:
            return Matrix2.from_rows([ent[:2], ent[2:]], p)


def cmd_verify(cfg: RunConfig, args) -> int:
    results = run_verify(cfg, quick=args.quick)
    failed = [r["check"] for r in results if not r["ok"]]
    _emit_json(cfg, "verify", {"checks": results, "failed": failed,
                               "passed": len(results) - len(failed)})
    return EXIT_INVARIANT if failed else EXIT_OK


# entry point ---------------------------------------------------------------------------

def _config_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="key = value configuration file")
    for f in fields(RunConfig):
        common.add_argument(f"--{f.name.replace('_', '-')}", dest=f"cfg_{f.name}",
                            default=argparse.SUPPRESS, help=f"override config key {f.name}")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _config_flags()
    ap = argparse.ArgumentParser(prog="btchar", parents=[common],
                                 description="Characters at compact elements from truncated "
                                 "fixed-point sets on the tree of PGL2(Q_p).")
    sub = ap.add_subparsers(dest="command", required=True)
    s = sub.add_parser("classify", parents=[common], help="classify an element")
    s.add_argument("element")
    s = sub.add_parser("fixedset", parents=[common], help="fixed vertices and stable edges in the window")
    s.add_argument("element")
    s.add_argument("--dot", help="write a DOT figure of the window")
    s = sub.add_parser("truncate", parents=[common], help="truncated building X^r")
    s.add_argument("-r", type=int, default=None)
    s = sub.add_parser("character", parents=[common], help="character value by three methods")
    s.add_argument("element")
    s.add_argument("-e", type=int, default=None)
    s.add_argument("-r", type=int, default=None)
    s.add_argument("--no-hopf", action="store_true")
    s = sub.add_parser("scan", parents=[common], help="e/r independence scan")
    s.add_argument("element")
    s.add_argument("--csv", help="write the scan table as CSV")
    s = sub.add_parser("verify", parents=[common], help="run the invariant suite")
    s.add_argument("--quick", action="store_true")
    s = sub.add_parser("dump-matrix", parents=[common], help="sparse triplet dump of an operator")
    s.add_argument("which", choices=["boundary", "augmentation", "Q0", "Q1", "avg0", "avg1",
                                     "T0", "T1", "Qbar0", "Qbar1"])
    s.add_argument("--element")
    s.add_argument("-e", type=int, default=None)
    s.add_argument("-r", type=int, default=None)
    return ap


COMMANDS = {"classify": cmd_classify, "fixedset": cmd_fixedset, "truncate": cmd_truncate,
            "character": cmd_character, "scan": cmd_scan, "verify": cmd_verify,
            "dump-matrix": cmd_dump_matrix}


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    overrides = {f.name: getattr(args, f"cfg_{f.name}", None) for f in fields(RunConfig)}
    # a single -r / -e on a subcommand sets the range it is validated against
    for key in ("r", "e"):
        val = getattr(args, key, None)
        if val is not None and overrides[f"{key}_max"] is None:
            overrides[f"{key}_max"] = val
            if overrides[f"{key}_min"] is None:
                overrides[f"{key}_min"] = min(val, 0)
    try:
        cfg = load_config(getattr(args, "config", None), overrides)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BudgetExceeded, PrecisionExhausted) as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except BTCharError as exc:
        print(f"invariant failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
