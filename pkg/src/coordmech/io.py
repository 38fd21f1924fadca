"""JSON documents for games, DGPs, strategies, targets, mechanisms and reports.

Every document carries a top-level ``"schema"`` tag. Rationals are written as
``"num/den"`` strings (plain integers as ``"n"``); floats as JSON numbers in
shortest round-trip form. On input, numbers may be JSON numbers, rational or
decimal strings, or ``{"expr": "log2(3)+2"}`` for dense feedback values.
"""

from __future__ import annotations

import ast
import decimal
import hashlib
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import InputError
from .game import Distribution, Game, ProductSpace, StrategyProfile, to_fraction
from .psdgp import FeedbackFunction, PartiallySpecifiedDGP, indicator_of

EXPR_DIGITS = 30


class ParseError(InputError):
    pass


# ---------------------------------------------------------------- scalars


def format_number(x):
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if x != x or x in (float("inf"), float("-inf")):
            return str(x)
        return x
    return x


def parse_number(x, where: str = "") -> Fraction:
    if isinstance(x, dict) and set(x) == {"expr"}:
        return evaluate_expression(x["expr"])
    if isinstance(x, float):
        return Fraction(repr(x))  # the decimal the user wrote, not its binary neighbour
    try:
        return to_fraction(x)
    except InputError as exc:
        raise ParseError(f"{where}: {exc}" if where else str(exc)) from None


_FUNCS = {"log", "log2", "log10", "ln", "exp", "sqrt"}


def evaluate_expression(text: str) -> Fraction:
    """Evaluate a small arithmetic grammar at ``EXPR_DIGITS`` significant digits.

    Numbers, ``+ - * / **``, parentheses and ``log``/``ln``/``log2``/``log10``/
    ``exp``/``sqrt`` of one argument. The decimal result is returned exactly
    as a Fraction.
    """
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ParseError(f"bad expression {text!r}: {exc.msg}") from None
    ctx = decimal.Context(prec=EXPR_DIGITS + 5)

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return decimal.Decimal(repr(node.value) if isinstance(node.value, float) else node.value)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
            v = ev(node.operand)
            return v if isinstance(node.op, ast.UAdd) else ctx.minus(v)
        if isinstance(node, ast.BinOp):
            a, b = ev(node.left), ev(node.right)
            ops = {ast.Add: ctx.add, ast.Sub: ctx.subtract, ast.Mult: ctx.multiply, ast.Div: ctx.divide, ast.Pow: ctx.power}
            op = ops.get(type(node.op))
            if op is not None:
                return op(a, b)
        if (
            isinstance(node, ast.Call)
            and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCS
            and len(node.args) == 1
            and not node.keywords
        ):
            v = ev(node.args[0])
            name = node.func.id
            if name in ("log", "ln"):
                return ctx.ln(v)
            if name == "log2":
                return ctx.divide(ctx.ln(v), ctx.ln(decimal.Decimal(2)))
            if name == "log10":
                return ctx.log10(v)
            if name == "exp":
                return ctx.exp(v)
            return ctx.sqrt(v)
        raise ParseError(f"unsupported construct in expression {text!r}")

    try:
        value = ev(tree)
    except (decimal.InvalidOperation, decimal.DivisionByZero):
        raise ParseError(f"expression {text!r} is undefined") from None
    if not value.is_finite():
        raise ParseError(f"expression {text!r} is not finite")
    return Fraction(decimal.Context(prec=EXPR_DIGITS).plus(value))


# ---------------------------------------------------------------- documents


def read_text(source) -> tuple[str, str]:
    """(text, name) from a path, ``"-"`` (stdin) or a file-like object."""
    if hasattr(source, "read"):
        return source.read(), getattr(source, "name", "<stream>")
    if str(source) == "-":
        return sys.stdin.read(), "<stdin>"
    path = Path(source)
    try:
        return path.read_text(), str(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def parse_document(text: str, name: str = "<input>", schema: str | None = None) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{name}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{name}: top level must be an object")
    if schema is not None and doc.get("schema") != schema:
        raise ParseError(f"{name}: expected schema {schema!r}, found {doc.get('schema')!r}")
    return doc


def load(source, schema: str | None = None) -> dict:
    text, name = read_text(source)
    return parse_document(text, name, schema)


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def digest(*texts: str) -> str:
    h = hashlib.sha256()
    for t in texts:
        h.update(t.encode())
        h.update(b"\0")
    return "sha256:" + h.hexdigest()


def _require(doc, key, where):
    if key not in doc:
        raise ParseError(f"{where}: missing field {key!r}")
    return doc[key]


def _per_player(value, players, where):
    if isinstance(value, dict):
        missing = [p for p in players if p not in value]
        if missing:
            raise ParseError(f"{where}: no entry for players {missing}")
        return [value[p] for p in players]
    if isinstance(value, list) and len(value) == len(players):
        return value
    raise ParseError(f"{where}: expected one entry per player")


def _check_labels(labels, where):
    for coord in labels:
        for lab in coord:
            if "," in str(lab) or str(lab).strip() != str(lab) or str(lab) == "*":
                raise ParseError(f"{where}: label {lab!r} may not contain commas, surrounding spaces or be '*'")


# games


def game_to_json(game: Game) -> dict:
    space = game.space
    return {
        "schema": "game/1",
        "players": list(game.players),
        "actions": {p: list(space.labels[i]) for i, p in enumerate(game.players)},
        "payoffs": {
            p: {space.key(a): format_number(game.payoffs[i][a]) for a in space.profiles()}
            for i, p in enumerate(game.players)
        },
    }


def game_from_json(doc: dict, where: str = "game") -> Game:
    players = [str(p) for p in _require(doc, "players", where)]
    actions = _per_player(_require(doc, "actions", where), players, f"{where}.actions")
    _check_labels(actions, f"{where}.actions")
    raw = _per_player(_require(doc, "payoffs", where), players, f"{where}.payoffs")
    space = ProductSpace(actions)
    payoffs = []
    for p, table in zip(players, raw):
        if not isinstance(table, dict):
            raise ParseError(f"{where}.payoffs.{p}: expected an object keyed by profile")
        values = {}
        for key, v in table.items():
            values[space.coerce(key)] = parse_number(v, f"{where}.payoffs.{p}[{key}]")
        missing = [space.key(a) for a in space.profiles() if a not in values]
        if missing:
            raise ParseError(f"{where}.payoffs.{p}: missing profiles {missing}")
        payoffs.append({space.key(a): v for a, v in values.items()})
    return Game(players, actions, payoffs)


# distributions


def distribution_to_json(dist: Distribution) -> dict:
    return {dist.space.key(p): format_number(w) for p, w in sorted(dist.items(), key=lambda kv: dist.space.flat(kv[0]))}


def distribution_from_json(raw, space: ProductSpace, where: str) -> Distribution:
    if not isinstance(raw, dict):
        raise ParseError(f"{where}: expected an object keyed by profile")
    weights = {}
    for key, v in raw.items():
        try:
            prof = space.coerce(key)
        except InputError as exc:
            raise ParseError(f"{where}[{key}]: {exc}") from None
        weights[prof] = weights.get(prof, 0) + parse_number(v, f"{where}[{key}]")
    try:
        return Distribution(space, weights)
    except InputError as exc:
        raise ParseError(f"{where}: {exc}") from None


def target_to_json(dist: Distribution) -> dict:
    return {"schema": "target/1", "distribution": distribution_to_json(dist)}


def target_from_json(doc: dict, space: ProductSpace, where: str = "target") -> Distribution:
    return distribution_from_json(_require(doc, "distribution", where), space, f"{where}.distribution")


# DGPs


def feedback_to_json(f: FeedbackFunction, space: ProductSpace) -> dict:
    out = {"kind": f.kind}
    if f.name:
        out["name"] = f.name
    if f.kind == "indicator":
        out["cells"] = [space.key(c) for c in sorted(f.cells, key=space.flat)]
    else:
        out["values"] = {space.key(p): format_number(v) for p, v in sorted(f.values.items(), key=lambda kv: space.flat(kv[0]))}
    return out


def feedback_from_json(raw: dict, space: ProductSpace, where: str) -> FeedbackFunction:
    kind = _require(raw, "kind", where)
    name = raw.get("name")
    if kind == "indicator":
        cells = set()
        for pat in _require(raw, "cells", where):
            try:
                cells |= indicator_of(space, pat).cells
            except InputError as exc:
                raise ParseError(f"{where}.cells: {exc}") from None
        return FeedbackFunction.indicator(cells, name=name)
    if kind == "dense":
        values = {}
        for key, v in _require(raw, "values", where).items():
            try:
                prof = space.coerce(key)
            except InputError as exc:
                raise ParseError(f"{where}.values[{key}]: {exc}") from None
            values[prof] = parse_number(v, f"{where}.values[{key}]")
        return FeedbackFunction.dense(values, name=name)
    raise ParseError(f"{where}: unknown feedback kind {kind!r}")


def dgp_to_json(dgp: PartiallySpecifiedDGP, players=None) -> dict:
    space = dgp.space
    players = list(players) if players else [f"P{i + 1}" for i in range(space.ndim)]
    return {
        "schema": "dgp/1",
        "players": players,
        "messages": {p: list(space.labels[i]) for i, p in enumerate(players)},
        "eta": distribution_to_json(dgp.eta),
        "feedback": [feedback_to_json(f, space) for f in dgp.feedback],
    }


def dgp_from_json(doc: dict, where: str = "dgp") -> PartiallySpecifiedDGP:
    raw_messages = _require(doc, "messages", where)
    if isinstance(raw_messages, dict):
        players = [str(p) for p in doc.get("players", list(raw_messages))]
        messages = _per_player(raw_messages, players, f"{where}.messages")
    else:
        messages = raw_messages
    _check_labels(messages, f"{where}.messages")
    space = ProductSpace(messages)
    eta = distribution_from_json(_require(doc, "eta", where), space, f"{where}.eta")
    feedback = [
        feedback_from_json(f, space, f"{where}.feedback[{k}]") for k, f in enumerate(doc.get("feedback", []))
    ]
    return PartiallySpecifiedDGP(space, eta, feedback)


# strategies


def strategy_to_json(sigma: StrategyProfile, players=None) -> dict:
    players = list(players) if players else [f"P{i + 1}" for i in range(sigma.messages.ndim)]
    maps = {}
    for p, row in zip(players, sigma.as_labels()):
        maps[p] = {m: a if isinstance(a, str) else {k: format_number(w) for k, w in a.items()} for m, a in row.items()}
    return {"schema": "strategy/1", "players": players, "maps": maps}


def strategy_from_json(doc: dict, messages: ProductSpace, actions: ProductSpace, players=None, where="strategy") -> StrategyProfile:
    raw = _require(doc, "maps", where)
    players = [str(p) for p in (players or doc.get("players") or (list(raw) if isinstance(raw, dict) else []))]
    maps = _per_player(raw, players, f"{where}.maps") if players else raw
    parsed = []
    for i, mp in enumerate(maps):
        if not isinstance(mp, dict):
            raise ParseError(f"{where}.maps[{i}]: expected an object from message to action")
        parsed.append(
            {m: ({k: parse_number(w, f"{where}.maps[{i}][{m}]") for k, w in a.items()} if isinstance(a, dict) else a) for m, a in mp.items()}
        )
    try:
        return StrategyProfile(messages, actions, parsed)
    except InputError as exc:
        raise ParseError(f"{where}: {exc}") from None


# mechanisms


def mechanism_to_json(game: Game, dgp: PartiallySpecifiedDGP, sigma: StrategyProfile, target: Distribution, epsilon=0, kind=None) -> dict:
    doc = {
        "schema": "mechanism/1",
        "game": game_to_json(game),
        "dgp": dgp_to_json(dgp, game.players),
        "strategy": strategy_to_json(sigma, game.players),
        "target": target_to_json(target),
        "epsilon": format_number(epsilon),
    }
    if kind:
        doc["kind"] = kind
    return doc


def mechanism_from_json(doc: dict, where: str = "mechanism"):
    """(game, dgp, sigma, target, epsilon) from a self-contained mechanism document."""
    game = game_from_json(_require(doc, "game", where), f"{where}.game")
    dgp = dgp_from_json(_require(doc, "dgp", where), f"{where}.dgp")
    sigma = strategy_from_json(_require(doc, "strategy", where), dgp.space, game.space, game.players, f"{where}.strategy")
    target = target_from_json(_require(doc, "target", where), game.space, f"{where}.target")
    eps = doc.get("epsilon", 0)
    eps = eps if isinstance(eps, float) else parse_number(eps, f"{where}.epsilon")
    return game, dgp, sigma, target, eps


# reports


def to_jsonable(obj):
    """Recursively convert results (Distributions, Fractions, numpy scalars) to JSON values."""
    if isinstance(obj, Distribution):
        return distribution_to_json(obj)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [to_jsonable(v) for v in items]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (int, np.integer)) and not isinstance(obj, (bool, np.bool_)):
        return int(obj)  # counts; exact rationals stay strings
    return format_number(obj)
