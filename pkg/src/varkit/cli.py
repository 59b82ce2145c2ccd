"""``varkit`` command-line driver.

Exit codes: 0 when every check passes, 1 when a mathematical check fails,
2 for usage, parse and unsupported-input errors.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field
from importlib import resources

import sympy as sp

from . import __version__
from .dsl import DSLError, ModelFile, parse, parse_components, parse_expression
from .jet import JetError, SectionPolynomial, is_polynomial_in_fibres, is_zero, set_default_seed, to_text
from .numeric import DEFAULT_EPS, GridSpec, TestFunction, weak_form_scaling
from .symmetry import (InternalConsistencyError, NoCurrentError, characteristic, check_current,
                       construct_current_ode, continuity_residual, default_sample_points,
                       ecs_residual, helmholtz_stages, lie_derivative_source, takens_report)
from .varcalc import (LagrangeForm, SourceForm, anderson_duchamp_check, euler_lagrange,
                      independent_helmholtz_count, is_locally_variational, total_divergence,
                      vainberg_tonti)

SCHEMA_VERSION = "1.0"
EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def load_schema() -> dict:
    return json.loads(resources.files("varkit").joinpath("report.schema.json").read_text())


@dataclass
class Outcome:
    checks: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    lines: list = field(default_factory=list)

    def check(self, name: str, ok: bool, witness: str | None = None, probabilistic: bool = False):
        self.checks.append({"name": name, "verdict": "pass" if ok else "fail",
                            "witness": witness, "probabilistic": bool(probabilistic)})

    @property
    def passed(self) -> bool:
        return all(c["verdict"] == "pass" for c in self.checks)


class UsageError(Exception):
    pass


def _zero_check(out: Outcome, name: str, space, exprs) -> bool:
    """Record a check that every expression vanishes; the witness lists the nonzero ones."""
    zs = [is_zero(e) for e in exprs]
    bad = [to_text(e, space) for e, z in zip(exprs, zs) if not z]
    ok = all(zs)
    out.check(name, ok, None if ok else "; ".join(bad), any(z.probabilistic for z in zs))
    return ok


def _equation_lines(model: ModelFile) -> list[str]:
    sp_ = model.space
    return [f"f_{sp_.fiber[a]} = {to_text(e, sp_)}" for a, e in enumerate(model.equations)]


# -- commands -----------------------------------------------------------------

def cmd_check_variational(model: ModelFile, args) -> Outcome:
    out = Outcome()
    sp_ = model.space
    ok, t = is_locally_variational(model.source)
    nonzero = [f"{t.label(kind, idx)} = {to_text(e, sp_)}" for kind, idx, e in t.nonzero()]
    out.check("helmholtz", ok, "; ".join(nonzero) or None)
    ad = anderson_duchamp_check(model.source)
    fails = [f"{f['condition']}: {to_text(f['value'], sp_)}" for f in ad.failures]
    out.check("anderson-duchamp", ad.passed, "; ".join(fails) or None)
    out.results = {
        "variational": ok,
        "helmholtz": helmholtz_stages(t),
        "anderson_duchamp": {"passed": ad.passed, "degree_bound": ad.degree_bound,
                             "degrees": ad.degrees},
        "independent_helmholtz_count": independent_helmholtz_count(sp_.n, sp_.m),
    }
    out.lines = _equation_lines(model) + nonzero + [
        "verdict: " + ("variational" if ok else "not variational")]
    return out


def _require_polynomial(model: ModelFile):
    if not all(is_polynomial_in_fibres(model.space, f) for f in model.equations):
        raise UsageError("the source form is not polynomial in the fibre coordinates; "
                         "no homotopy Lagrangian is attached (use weak-check for numeric evidence)")


def cmd_lagrangian(model: ModelFile, args) -> Outcome:
    out = Outcome()
    sp_ = model.space
    _require_polynomial(model)
    ok, _ = is_locally_variational(model.source)
    out.check("helmholtz", ok)
    lam = vainberg_tonti(model.source)
    el = euler_lagrange(lam)
    _zero_check(out, "euler-lagrange(L) = f", sp_, [a - b for a, b in zip(el.f, model.equations)])
    L = to_text(lam.L, sp_)
    out.results = {"lagrangian": L, "euler_lagrange": [to_text(e, sp_) for e in el.f]}
    out.lines = _equation_lines(model) + [f"L = {L}"]
    return out


def cmd_symmetry(model: ModelFile, args) -> Outcome:
    out = Outcome()
    sp_ = model.space
    V = model.field(args.field)
    lie = lie_derivative_source(V, model.source)
    ok = _zero_check(out, f"symmetry {V.name}", sp_, lie.f)
    out.results = {"field": V.describe(), "lie_derivative": [to_text(e, sp_) for e in lie.f]}
    out.lines = [f"{V.name} = {V.describe()}",
                 f"{V.name} is {'a' if ok else 'not a'} symmetry"]
    return out


def cmd_conservation(model: ModelFile, args) -> Outcome:
    out = Outcome()
    sp_ = model.space
    V = model.field(args.field)
    Q = characteristic(V)
    res = continuity_residual(V, model.source)
    ok = _zero_check(out, f"continuity {V.name}", sp_, res.f)
    out.results = {"field": V.describe(), "characteristic": [to_text(q, sp_) for q in Q],
                   "continuity_residual": [to_text(e, sp_) for e in res.f]}
    out.lines = [f"{V.name} = {V.describe()}",
                 "characteristic: " + ", ".join(out.results["characteristic"])]
    if args.current:
        J = model.current(args.current)
        good = check_current(Q, model.source, J)
        g = sum((q * f for q, f in zip(Q, model.equations)), sp.Integer(0))
        resid = to_text(total_divergence(J) - g, sp_)
        out.check(f"current {args.current}", good, None if good else f"D_i J^i - Q f = {resid}")
        out.results["current"] = [to_text(c, sp_) for c in J.J]
    elif ok and sp_.n == 1:
        try:
            J = construct_current_ode(Q, model.source)
        except NoCurrentError as exc:
            out.results["note"] = f"no current constructed: {exc}"
        else:
            out.check("constructed current", True)
            out.results["current"] = [to_text(c, sp_) for c in J.J]
    if "current" in out.results:
        out.lines.append("J = " + ", ".join(out.results["current"]))
    return out


def cmd_ecs(model: ModelFile, args) -> Outcome:
    out = Outcome()
    sp_ = model.space
    V = model.field(args.field)
    lie = lie_derivative_source(V, model.source)
    el = continuity_residual(V, model.source)
    ecs = ecs_residual(V, model.source)
    _zero_check(out, "decomposition identity", sp_,
                [l - a - b for l, a, b in zip(lie.f, el.f, ecs.f)])
    _zero_check(out, f"ecs {V.name}", sp_, ecs.f)
    out.results = {
        "field": V.describe(),
        "lie_derivative": [to_text(e, sp_) for e in lie.f],
        "el_part": [to_text(e, sp_) for e in el.f],
        "ecs_part": [to_text(e, sp_) for e in ecs.f],
    }
    out.lines = [f"{V.name} = {V.describe()}",
                 "lie derivative: " + ", ".join(out.results["lie_derivative"]),
                 "el part: " + ", ".join(out.results["el_part"]),
                 "ecs part: " + ", ".join(out.results["ecs_part"])]
    return out


def parse_points(text: str, space) -> list[tuple]:
    """``a:b,c:d`` -> points of E; trailing fibre coordinates default to 0."""
    points = []
    for chunk in text.split(","):
        coords = [parse_expression(c) for c in chunk.split(":")]
        if any(c.free_symbols for c in coords) or not all(c.is_real for c in coords):
            raise UsageError(f"point {chunk!r} must be real numbers")
        if not space.n <= len(coords) <= space.n + space.m:
            raise UsageError(f"point {chunk!r} needs between {space.n} and {space.n + space.m} coordinates")
        points.append(tuple(coords) + (sp.Integer(0),) * (space.n + space.m - len(coords)))
    return points


def cmd_takens(model: ModelFile, args) -> Outcome:
    out = Outcome()
    sp_ = model.space
    if not model.fields:
        raise UsageError("takens needs at least one vectorfield")
    if args.points:
        points, source = parse_points(args.points, sp_), "given"
    else:
        points, source = default_sample_points(sp_, 5, args.seed), f"default (seed {args.seed})"
    try:
        rep = takens_report(model.source, list(model.fields.values()), points, trace=args.trace)
    except InternalConsistencyError as exc:
        out.check("decomposition identity", False, str(exc))
        return out
    for f in rep.fields:
        out.check(f"symmetry {f['name']}", f["symmetry"],
                  None if f["symmetry"] else "; ".join(f["lie_derivative"]))
        out.check(f"continuity {f['name']}", f["continuity"],
                  None if f["continuity"] else "; ".join(f["continuity_residual"]))
    ecs_at = {tuple(e["point"]): e for e in rep.transformed_ecs}
    for s in rep.span:
        at = "(" + ", ".join(s["point"]) + ")"
        out.check(f"span at {at}", s["ok"], None if s["ok"] else
                  f"rank {s['rank']} < {sp_.n + sp_.m}")
        e = ecs_at.get(tuple(s["point"]))
        if e is not None:
            out.check(f"transformed ecs at {at}", e["zero"],
                      "; ".join(f"{k} = {v}" for k, v in e["nonzero"].items()) or None)
    for st in rep.helmholtz:
        out.check(f"helmholtz {st['stage']}", st["zero"],
                  "; ".join(f"{c['component']} = {c['value']}" for c in st["nonzero"]) or None)
    if rep.lagrangian_verified is not None:
        out.check("euler-lagrange(L) = f", rep.lagrangian_verified, None, rep.probabilistic)
    out.results = rep.to_dict()
    out.results["points_source"] = source
    out.lines = _equation_lines(model) + [
        f"sample points ({source}): " + " ".join("(" + ", ".join(s["point"]) + ")" for s in rep.span),
        "verdict: " + ("variational" if rep.variational else "not variational"),
    ]
    if rep.lagrangian:
        out.lines.append(f"L = {rep.lagrangian}")
    if rep.trace:
        out.lines += [f"trace: {t['step']} {'holds' if t['holds'] else 'fails'}" for t in rep.trace]
    out.lines += [f"note: {n}" for n in rep.notes]
    return out


def _components(model: ModelFile, text: str, table: dict, size: int) -> tuple:
    if text in table:
        return table[text]
    comps = parse_components(text, model.space, size)
    if any(model.space.jet_symbols(c) for c in comps):
        raise UsageError(f"{text!r} must depend on the base coordinates only")
    return comps


def cmd_weak_check(model: ModelFile, args) -> Outcome:
    out = Outcome()
    sp_ = model.space
    _require_polynomial(model)
    try:
        vals = [float(v) for v in args.domain.split(",")]
    except ValueError:
        raise UsageError(f"bad --domain {args.domain!r}") from None
    if len(vals) != 2 * sp_.n:
        raise UsageError(f"--domain needs {2 * sp_.n} numbers for n = {sp_.n}")
    grid = GridSpec.default(tuple(zip(vals[::2], vals[1::2])))
    s = SectionPolynomial(sp_, _components(model, args.section, model.sections, sp_.m))
    phi = TestFunction(_components(model, args.test, {}, sp_.m))
    lam = vainberg_tonti(model.source)
    r1, r2, scaling = weak_form_scaling(model.source, lam, s, phi, grid, args.eps)
    for r, eps in ((r1, args.eps), (r2, args.eps / 2)):
        wit = f"relative residual {r.relative:.3e}" if not r.inconclusive else \
            f"both sides below quadrature noise, residual {r.residual:.3e}"
        out.check(f"weak form at eps={eps:g}", r.passed, wit)
    out.check("O(eps^2) scaling", scaling,
              None if scaling else f"{r1.relative:.3e} -> {r2.relative:.3e}")
    out.results = {
        "lagrangian": to_text(lam.L, sp_),
        "grid": {"bounds": [list(b) for b in grid.bounds], "nodes": list(grid.nodes)},
        "runs": [{"eps": e, "first_variation": r.first_variation, "weak_form": r.weak_form,
                  "residual": r.residual, "relative": r.relative, "inconclusive": r.inconclusive,
                  "quadrature_error": r.quadrature_error}
                 for r, e in ((r1, args.eps), (r2, args.eps / 2))],
    }
    out.lines = _equation_lines(model) + [f"L = {out.results['lagrangian']}"] + [
        f"eps={run['eps']:g}: first variation {run['first_variation']:.12g}, "
        f"weak form {run['weak_form']:.12g}, relative {run['relative']:.3e}"
        for run in out.results["runs"]]
    return out


def cmd_count(args) -> Outcome:
    if args.n < 1 or args.m < 1:
        raise UsageError("n and m must be positive")
    out = Outcome()
    c = independent_helmholtz_count(args.n, args.m)
    out.results = {"n": args.n, "m": args.m, "count": c}
    out.lines = [str(c)]
    return out


COMMANDS = {
    "check-variational": cmd_check_variational,
    "lagrangian": cmd_lagrangian,
    "symmetry": cmd_symmetry,
    "conservation": cmd_conservation,
    "ecs": cmd_ecs,
    "takens": cmd_takens,
    "weak-check": cmd_weak_check,
}


# -- driver -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="emit a JSON report")
    p = argparse.ArgumentParser(prog="varkit", description="Inverse-problem and symmetry checks "
                                "for second-order source forms on jet spaces.")
    p.add_argument("--version", action="version", version=f"varkit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def model_cmd(name, help_):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.add_argument("model", help=".vk model file")
        return s

    model_cmd("check-variational", "Helmholtz verdict and tensor")
    model_cmd("lagrangian", "homotopy Lagrangian and its verification")
    model_cmd("symmetry", "Lie derivative of the source form").add_argument("--field", required=True)
    s = model_cmd("conservation", "continuity residual and current")
    s.add_argument("--field", required=True)
    s.add_argument("--current")
    model_cmd("ecs", "Euler-Lagrange / ECS decomposition").add_argument("--field", required=True)
    s = model_cmd("takens", "symmetry, continuity and span hypotheses plus the verdict")
    s.add_argument("--points", help="points of E, e.g. 0.3,1.57 or 0.3:1,2:0")
    s.add_argument("--trace", action="store_true")
    s = model_cmd("weak-check", "numeric first variation against the weak form")
    s.add_argument("--section", required=True, help="expression in x or a section name")
    s.add_argument("--test", required=True, help="perturbation vanishing on the boundary")
    s.add_argument("--domain", required=True, help="a,b (n = 1) or a,b,c,d (n = 2)")
    s.add_argument("--eps", type=float, default=DEFAULT_EPS)
    s = sub.add_parser("count", parents=[common], help="number of independent Helmholtz expressions")
    s.add_argument("n", type=int)
    s.add_argument("m", type=int)
    return p


def _seed() -> int:
    raw = os.environ.get("VARKIT_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"VARKIT_SEED must be an integer, got {raw!r}") from None


def _arguments(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("json", "seed", "model")}


def run(argv: list[str] | None = None) -> tuple[dict | None, int, str]:
    """Execute a command; returns ``(report, exit_code, text)``."""
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        args.seed = _seed()
        set_default_seed(args.seed)
        digest = hashlib.sha256()
        digest.update(json.dumps(_arguments(args), sort_keys=True).encode())
        if args.command == "count":
            out = cmd_count(args)
        else:
            with open(args.model, encoding="utf-8") as fh:
                text = fh.read()
            digest.update(text.encode())
            model = parse(text)
            out = COMMANDS[args.command](model, args)
    except (DSLError, JetError, UsageError, OSError, ValueError) as exc:
        return None, EXIT_USAGE, f"varkit: error: {exc}"
    code = EXIT_PASS if out.passed else EXIT_FAIL
    report = {
        "schema_version": SCHEMA_VERSION,
        "tool": f"varkit {__version__}",
        "command": args.command,
        "arguments": _arguments(args),
        "inputs_digest": "sha256:" + digest.hexdigest(),
        "seed": args.seed,
        "checks": out.checks,
        "results": out.results,
        "probabilistic": any(c["probabilistic"] for c in out.checks),
        "exit_code": code,
        "timing": {"seconds": round(time.perf_counter() - start, 6)},
    }
    if args.json:
        return report, code, json.dumps(report, indent=2, sort_keys=True, default=str)
    lines = [f"{'PASS' if c['verdict'] == 'pass' else 'FAIL'} {c['name']}"
             + (f": {c['witness']}" if c["witness"] else "")
             + (" (probabilistic)" if c["probabilistic"] else "") for c in out.checks]
    return report, code, "\n".join(out.lines + lines)


def main(argv: list[str] | None = None) -> int:
    _, code, text = run(argv)
    print(text, file=sys.stderr if code == EXIT_USAGE else sys.stdout)
    return code


if __name__ == "__main__":
    sys.exit(main())
