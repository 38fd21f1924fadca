"""Command-line frontend.

    coordmech analyze GAME
    coordmech maxent DGP
    coordmech check GAME DGP STRATEGY TARGET | --mechanism FILE
    coordmech construct GAME TARGET [--eps E] [--mechanism-out FILE]
    coordmech direct GAME TARGET [--budget N] [--seed S]
    coordmech examples [--export DIR]

Any file argument may be ``-`` for stdin. Exit codes: 0 success, 1 example
mismatch, 2 input error, 3 rejection, 4 budget exceeded, 5 non-convergence.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

from . import io
from .constructor import DEFAULT_MAX_CELLS, implement_jointly_coherent
from .direct import search_direct, unique_ce_linear_constraint
from .errors import BudgetExceeded, ConvergenceError, CoordMechError, RejectionError
from .examples import (
    chicken_bundle,
    coordination_bundle,
    direct_bundle,
    larger_message_bundle,
    pennies_bundle,
    run_examples,
)
from .game import Distribution
from .maxent import build_constraints, max_entropy, verify_kkt
from .rational_lp import DEFAULT_VERTEX_LIMIT, ce_vertices, jointly_coherent_support
from .verifier import check_implementation

SCHEMA = "report/1"
LOG_NOTE = "entropies and multipliers use natural logarithms; feedback values in other bases only rescale the multipliers"


class Report:
    def __init__(self, command: str, inputs_digest: str):
        self.command = command
        self.inputs_digest = inputs_digest
        self.status = "ok"
        self.results: dict = {}
        self.diagnostics: dict = {}

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "command": self.command,
            "inputs_digest": self.inputs_digest,
            "status": self.status,
            "results": io.to_jsonable(self.results),
            "diagnostics": io.to_jsonable(self.diagnostics),
        }


# ---------------------------------------------------------------- text rendering


def _fmt(x) -> str:
    v = io.format_number(x)
    return f"{v:.12g}" if isinstance(v, float) else str(v)


def _grid(dist: Distribution, indent: str) -> list:
    space = dist.space
    rows, cols = space.labels
    cells = [[_fmt(dist[(i, j)]) for j in range(len(cols))] for i in range(len(rows))]
    width = max([len(c) for c in cols] + [len(c) for r in cells for c in r])
    head = max(len(r) for r in rows)
    out = [indent + " " * head + " | " + " ".join(c.rjust(width) for c in cols)]
    for lab, row in zip(rows, cells):
        out.append(indent + lab.rjust(head) + " | " + " ".join(c.rjust(width) for c in row))
    return out


def _render(value, indent: str = "") -> list:
    if isinstance(value, Distribution):
        if value.space.ndim == 2:
            return _grid(value, indent)
        return [f"{indent}{k}: {_fmt(v)}" for k, v in value.as_keys().items()]
    if isinstance(value, dict):
        out = []
        for k, v in value.items():
            if isinstance(v, (dict, Distribution)) or (isinstance(v, (list, tuple)) and v and isinstance(v[0], (dict, Distribution))):
                out.append(f"{indent}{k}:")
                out.extend(_render(v, indent + "  "))
            elif isinstance(v, (list, tuple, set, frozenset)):
                items = sorted(v) if isinstance(v, (set, frozenset)) else v
                out.append(f"{indent}{k}: " + ", ".join(_fmt(x) for x in items))
            else:
                out.append(f"{indent}{k}: {_fmt(v)}")
        return out
    if isinstance(value, (list, tuple)):
        out = []
        for n, v in enumerate(value):
            out.append(f"{indent}[{n}]")
            out.extend(_render(v, indent + "  "))
        return out
    return [indent + _fmt(value)]


def render_text(report: Report) -> str:
    lines = [f"command: {report.command}", f"status: {report.status}", f"inputs: {report.inputs_digest}"]
    if report.results:
        lines.append("results:")
        lines.extend(_render(report.results, "  "))
    if report.diagnostics:
        lines.append("diagnostics:")
        lines.extend(_render(report.diagnostics, "  "))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- loading


def _load(paths):
    texts, docs = [], []
    for p in paths:
        text, name = io.read_text(p)
        texts.append(text)
        docs.append(io.parse_document(text, name))
    return texts, docs


def _profiles(space, profiles) -> list:
    return [space.key(a) for a in sorted(profiles, key=space.flat)]


# ---------------------------------------------------------------- commands


def cmd_analyze(args) -> tuple:
    texts, (doc,) = _load([args.game])
    game = io.game_from_json(doc, args.game)
    report = Report("analyze", io.digest(*texts))
    res = report.results
    res["players"] = list(game.players)
    support = jointly_coherent_support(game)
    res["jointly_coherent_support"] = _profiles(game.space, support)
    try:
        vertices = ce_vertices(game, args.budget or DEFAULT_VERTEX_LIMIT)
    except BudgetExceeded as exc:
        res["vertex_count"] = None
        report.diagnostics["vertex_enumeration"] = str(exc)
        return report, 0
    res["vertex_count"] = len(vertices)
    res["vertices"] = vertices
    mean = Distribution(game.space, {a: sum((v[a] for v in vertices), Fraction(0)) / len(vertices) for a in support})
    res["maximal_support_ce"] = mean
    if len(vertices) == 1:
        constraint = unique_ce_linear_constraint(game)
        entry = {
            "reference_profile": game.space.key(constraint.reference),
            "coefficients_nats": {game.space.key(a): c for a, c in constraint.coefficients.items()},
            "rhs_nats": constraint.rhs,
        }
        if constraint.integer_form is not None:
            coefs, rhs = constraint.integer_form
            entry["integer_form"] = {"coefficients": {game.space.key(a): c for a, c in coefs.items()}, "rhs": rhs}
        res["unique_ce_constraint"] = entry
    return report, 0


def cmd_maxent(args) -> tuple:
    texts, (doc,) = _load([args.dgp])
    dgp = io.dgp_from_json(doc, args.dgp)
    report = Report("maxent", io.digest(*texts))
    constraints = build_constraints(dgp)
    sol = max_entropy(constraints, tol=args.tol, max_iter=args.max_iter)
    kkt = verify_kkt(sol, constraints)
    space = dgp.space
    report.results.update(
        belief=sol.belief,
        exact=sol.exact,
        entropy_nats=sol.entropy,
        forced_zeros=_profiles(space, sol.forced_zeros),
        multipliers={str(i): lam for i, lam in zip(sol.retained, sol.duals)},
    )
    report.diagnostics.update(
        primal_residual=kkt.primal_residual,
        stationarity_residual=kkt.stationarity_residual,
        eta_identity=kkt.eta_identity,
        iterations=sol.iterations,
        note=LOG_NOTE,
    )
    return report, 0


def _certificate_results(report: Report, cert, game):
    report.results.update(
        passed=cert.passed,
        epsilon=cert.epsilon,
        exact=cert.exact,
        conditions={c.name: {"passed": c.passed, "detail": c.detail} for c in cert.conditions},
        belief=cert.belief,
        outcome=cert.outcome,
    )
    if cert.worst is not None:
        w = cert.worst
        report.results["tightest_constraint"] = {
            "player": game.players[w.player],
            "message": cert.sigma.messages.labels[w.player][w.message],
            "deviation": game.space.labels[w.player][w.deviation],
            "slack": w.value,
        }


def cmd_check(args) -> tuple:
    if args.mechanism:
        texts, (doc,) = _load([args.mechanism])
        game, dgp, sigma, target, eps = io.mechanism_from_json(io.parse_document(texts[0], args.mechanism, "mechanism/1"))
    else:
        if len(args.files) != 4:
            raise io.ParseError("check needs GAME DGP STRATEGY TARGET or --mechanism FILE")
        texts, (gdoc, ddoc, sdoc, tdoc) = _load(args.files)
        game = io.game_from_json(gdoc, args.files[0])
        dgp = io.dgp_from_json(ddoc, args.files[1])
        sigma = io.strategy_from_json(sdoc, dgp.space, game.space, game.players, args.files[2])
        target = io.target_from_json(tdoc, game.space, args.files[3])
        eps = 0
    if args.eps is not None:
        eps = io.parse_number(args.eps, "--eps")
    report = Report("check", io.digest(*texts))
    cert = check_implementation(game, dgp, sigma, target, args.tol, allowed_epsilon=eps)
    _certificate_results(report, cert, game)
    report.results["allowed_epsilon"] = eps
    if not cert.passed:
        report.status = "rejected"
        return report, RejectionError.exit_code
    return report, 0


def cmd_construct(args) -> tuple:
    texts, (gdoc, tdoc) = _load([args.game, args.target])
    game = io.game_from_json(gdoc, args.game)
    target = io.target_from_json(tdoc, game.space, args.target)
    eps = io.parse_number(args.eps, "--eps") if args.eps is not None else Fraction(0)
    report = Report("construct", io.digest(*texts))
    try:
        mech = implement_jointly_coherent(game, target, eps, max_cells=args.budget or DEFAULT_MAX_CELLS, tol=args.tol)
    except RejectionError as exc:
        report.status = "rejected"
        report.results["reasons"] = list(exc.reasons) or [str(exc)]
        return report, exc.exit_code
    doc = io.mechanism_to_json(game, mech.dgp, mech.sigma, mech.target, mech.epsilon, mech.kind)
    report.results.update(
        kind=mech.kind,
        epsilon=mech.epsilon,
        messages={p: len(mech.dgp.space.labels[i]) for i, p in enumerate(game.players)},
        feedback_rows=len(mech.dgp.feedback),
        base_distribution=mech.p.p,
        common_denominator=mech.p.k,
    )
    if args.mechanism_out:
        Path(args.mechanism_out).write_text(io.dumps(doc))
        report.results["mechanism_file"] = args.mechanism_out
    else:
        report.results["mechanism"] = doc
    return report, 0


def cmd_direct(args) -> tuple:
    texts, (gdoc, tdoc) = _load([args.game, args.target])
    game = io.game_from_json(gdoc, args.game)
    mu = io.target_from_json(tdoc, game.space, args.target)
    report = Report("direct", io.digest(*texts))
    result = search_direct(game, mu, budget=args.budget or 200, seed=args.seed, tol=min(args.tol, 1e-10))
    report.results["found"] = result.found
    report.diagnostics.update(result.diagnostics)
    report.diagnostics["completeness"] = "sound but incomplete; a miss is conclusive only with a unique CE"
    if result.found:
        cert = result.certificate
        report.results.update(
            witness=cert.witness,
            level_set_residual=cert.level_set_residual,
            feedback=[io.feedback_to_json(f, game.space) for f in cert.feedback],
            epsilon=cert.implementation.epsilon,
        )
        return report, 0
    report.status = "rejected"
    report.results["impossible"] = result.impossible
    if result.impossible:
        constraint = unique_ce_linear_constraint(game)
        report.results["unique_ce"] = constraint.ce
        report.results["constraint_residual_nats"] = constraint.residual(mu)
    return report, RejectionError.exit_code


EXPORTS = {
    "chicken": chicken_bundle,
    "coordination": coordination_bundle,
    "direct": direct_bundle,
    "pennies": pennies_bundle,
    "larger": larger_message_bundle,
}


def export_examples(directory: Path) -> list:
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, build in EXPORTS.items():
        game, dgp, sigma, target = build()
        files = {
            f"{name}.game.json": io.game_to_json(game),
            f"{name}.dgp.json": io.dgp_to_json(dgp, game.players),
            f"{name}.strategy.json": io.strategy_to_json(sigma, game.players),
            f"{name}.target.json": io.target_to_json(target),
        }
        for fname, doc in files.items():
            (directory / fname).write_text(io.dumps(doc))
            written.append(str(directory / fname))
    return written


def cmd_examples(args) -> tuple:
    report = Report("examples", io.digest())
    result = run_examples(tol=args.tol)
    report.results["checks"] = [
        {"example": c.example, "check": c.name, "passed": c.passed, **({"detail": c.detail} if c.detail else {})}
        for c in result.checks
    ]
    report.results["passed"] = result.passed
    report.results["degraded"] = result.degraded
    if args.export:
        report.results["exported"] = export_examples(Path(args.export))
    if result.degraded:
        report.diagnostics["warning"] = f"tolerance {args.tol:g} is looser than 1e-6; float comparisons are degraded"
    if not result.passed:
        report.status = "mismatch"
        report.diagnostics["failures"] = [f"{c.example}: {c.name} ({c.detail})" for c in result.failures()]
        return report, 1
    return report, 0


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "text"), default="json")
    common.add_argument("--output", help="write the report here instead of stdout")
    common.add_argument("--tol", type=float, default=1e-9, help="numerical tolerance (default 1e-9)")

    parser = argparse.ArgumentParser(prog="coordmech", description="Implementation of outcomes through partially specified information.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="correlated equilibria of a game")
    p.add_argument("game")
    p.add_argument("--budget", type=int, help="vertex budget")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("maxent", parents=[common], help="maximum-entropy belief of a DGP")
    p.add_argument("dgp")
    p.add_argument("--max-iter", type=int, default=500)
    p.set_defaults(func=cmd_maxent, tol=1e-10)

    p = sub.add_parser("check", parents=[common], help="verify an implementation")
    p.add_argument("files", nargs="*", metavar="FILE")
    p.add_argument("--mechanism")
    p.add_argument("--eps", help="allowed epsilon (rational or decimal)")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("construct", parents=[common], help="build a mechanism for a target outcome")
    p.add_argument("game")
    p.add_argument("target")
    p.add_argument("--eps", help="approximation allowed when the exact mechanism is over budget")
    p.add_argument("--budget", type=int, help="maximum number of message profiles")
    p.add_argument("--mechanism-out")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("direct", parents=[common], help="search for a direct implementation")
    p.add_argument("game")
    p.add_argument("target")
    p.add_argument("--budget", type=int, help="random samples")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_direct)

    p = sub.add_parser("examples", parents=[common], help="run the embedded example suite")
    p.add_argument("--export", metavar="DIR", help="also write example input files")
    p.set_defaults(func=cmd_examples, tol=1e-10)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        report, code = args.func(args)
    except ConvergenceError as exc:
        msg = f"{exc}" + (f" (residual {exc.residual:.3g})" if exc.residual is not None else "")
        print(f"error: {msg}", file=sys.stderr)
        return exc.exit_code
    except CoordMechError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for r in getattr(exc, "reasons", ()):
            print(f"  - {r}", file=sys.stderr)
        return exc.exit_code
    text = io.dumps(report.to_json()) if args.format == "json" else render_text(report)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
