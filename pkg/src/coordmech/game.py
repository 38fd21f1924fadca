"""Finite normal-form games, distributions over product sets, strategies.

Everything here works in exact rational arithmetic when the inputs are
``Fraction`` and degrades to floats only when a float is supplied. Labels are
opaque strings; their order is fixed at construction and profiles are stored
as tuples of per-coordinate indices in row-major order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence, Union

import numpy as np

from .errors import InputError

Scalar = Union[Fraction, float]
Profile = tuple

FLOAT_SUM_TOL = 1e-12
DEFAULT_FLOAT_TOL = 1e-9


def to_fraction(x) -> Fraction:
    """Exact conversion of ints, floats, ``"num/den"`` strings and Fractions."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (bool, np.bool_)):
        raise InputError(f"not a number: {x!r}")
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise InputError(f"non-finite number: {x!r}")
        return Fraction(float(x))
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError):
            raise InputError(f"cannot parse {x!r} as a rational number") from None
    raise InputError(f"not a number: {x!r}")


class ProductSpace:
    """Finite product set ``X_1 x ... x X_n`` with labelled coordinates."""

    __slots__ = ("labels", "shape", "size", "_index")

    def __init__(self, labels: Iterable[Iterable]):
        labels = tuple(tuple(str(x) for x in coord) for coord in labels)
        if not labels:
            raise InputError("a product space needs at least one coordinate")
        for pos, coord in enumerate(labels):
            if not coord:
                raise InputError(f"coordinate {pos} has no elements")
            if len(set(coord)) != len(coord):
                raise InputError(f"duplicate labels in coordinate {pos}: {coord}")
        self.labels = labels
        self.shape = tuple(len(c) for c in labels)
        self.size = math.prod(self.shape)
        self._index = tuple({lab: i for i, lab in enumerate(c)} for c in labels)

    @property
    def ndim(self) -> int:
        return len(self.shape)

    def __eq__(self, other):
        return isinstance(other, ProductSpace) and self.labels == other.labels

    def __hash__(self):
        return hash(self.labels)

    def __repr__(self):
        return f"ProductSpace({self.labels!r})"

    def profiles(self) -> Iterator[Profile]:
        return itertools.product(*(range(n) for n in self.shape))

    def flat(self, profile: Profile) -> int:
        k = 0
        for i, n in zip(profile, self.shape):
            k = k * n + i
        return k

    def unflat(self, k: int) -> Profile:
        out = []
        for n in reversed(self.shape):
            k, r = divmod(k, n)
            out.append(r)
        return tuple(reversed(out))

    def label_index(self, coord: int, label) -> int:
        if isinstance(label, (int, np.integer)) and not isinstance(label, bool):
            if 0 <= label < self.shape[coord]:
                return int(label)
            raise InputError(f"index {label} out of range for coordinate {coord}")
        try:
            return self._index[coord][str(label)]
        except KeyError:
            raise InputError(f"unknown label {label!r} for coordinate {coord}") from None

    def coerce(self, profile) -> Profile:
        """Accept ``"a1,b1"``, a sequence of labels, or a tuple of indices."""
        if isinstance(profile, str):
            profile = [p.strip() for p in profile.split(",")]
        profile = tuple(profile)
        if len(profile) != self.ndim:
            raise InputError(f"profile {profile!r} has {len(profile)} entries, expected {self.ndim}")
        return tuple(self.label_index(c, x) for c, x in enumerate(profile))

    def key(self, profile: Profile) -> str:
        return ",".join(self.labels[c][i] for c, i in enumerate(profile))


class Game:
    """Finite game: players, per-player action labels, rational payoff tensors."""

    def __init__(self, players: Sequence[str], actions, payoffs):
        players = tuple(str(p) for p in players)
        if len(players) < 2:
            raise InputError("a game needs at least 2 players")
        if len(set(players)) != len(players):
            raise InputError("duplicate player names")
        if isinstance(actions, Mapping):
            try:
                actions = [actions[p] for p in players]
            except KeyError as exc:
                raise InputError(f"no actions for player {exc.args[0]!r}") from None
        space = ProductSpace(actions)
        if space.ndim != len(players):
            raise InputError("number of action sets differs from number of players")
        if isinstance(payoffs, Mapping):
            try:
                payoffs = [payoffs[p] for p in players]
            except KeyError as exc:
                raise InputError(f"no payoffs for player {exc.args[0]!r}") from None
        if len(payoffs) != len(players):
            raise InputError("one payoff table per player is required")
        tensors = []
        for p, table in zip(players, payoffs):
            t = np.empty(space.shape, dtype=object)
            if isinstance(table, Mapping):
                seen = set()
                for key, val in table.items():
                    prof = space.coerce(key)
                    t[prof] = to_fraction(val)
                    seen.add(prof)
                if len(seen) != space.size:
                    missing = [space.key(a) for a in space.profiles() if a not in seen]
                    raise InputError(f"payoffs of {p} missing profiles {missing[:5]}")
            else:
                arr = np.asarray(table, dtype=object)
                if arr.shape != space.shape:
                    raise InputError(f"payoff tensor of {p} has shape {arr.shape}, expected {space.shape}")
                for prof in space.profiles():
                    t[prof] = to_fraction(arr[prof])
            tensors.append(t)
        self.players = players
        self.space = space
        self.payoffs = tuple(tensors)

    @classmethod
    def from_cells(cls, cells, actions=None, players=None) -> "Game":
        """Build from a nested array of payoff vectors, e.g. ``[[(5, 5), (2, 7)], ...]``."""
        arr = np.asarray(cells, dtype=object)
        n = arr.shape[-1]
        if arr.ndim != n + 1:
            raise InputError("cells must have one payoff entry per player")
        players = players or [f"P{i + 1}" for i in range(n)]
        if actions is None:
            letters = "abcdefghijklmnopqrstuvwxyz"
            actions = [[f"{letters[i]}{j + 1}" for j in range(arr.shape[i])] for i in range(n)]
        return cls(players, actions, [arr[..., i] for i in range(n)])

    @property
    def n_players(self) -> int:
        return len(self.players)

    @property
    def actions(self):
        return self.space.labels

    def player_index(self, player) -> int:
        if isinstance(player, (int, np.integer)) and not isinstance(player, bool):
            if 0 <= player < self.n_players:
                return int(player)
        elif player in self.players:
            return self.players.index(player)
        raise InputError(f"unknown player {player!r}")

    def utility(self, player: int, profile: Profile) -> Fraction:
        return self.payoffs[player][profile]

    def max_deviation_gap(self) -> Fraction:
        """max over i, a, b of |u_i(a) - u_i(b, a_-i)|."""
        best = Fraction(0)
        for i, u in enumerate(self.payoffs):
            for a in self.space.profiles():
                for b in range(self.space.shape[i]):
                    dev = a[:i] + (b,) + a[i + 1:]
                    best = max(best, abs(u[a] - u[dev]))
        return best

    def __repr__(self):
        return f"Game(players={self.players}, actions={self.space.labels})"


class Distribution:
    """Probability distribution over a ProductSpace, stored sparsely.

    Exact (all weights ``Fraction``, summing to exactly one) unless any weight
    is a float, in which case all weights are floats and the sum is checked to
    within ``FLOAT_SUM_TOL``.
    """

    __slots__ = ("space", "_w", "exact")

    def __init__(self, space: ProductSpace, weights: Mapping, *, normalize: bool = False):
        exact = not any(isinstance(v, (float, np.floating)) for v in weights.values())
        w = {}
        for prof, val in weights.items():
            idx = space.coerce(prof)
            val = to_fraction(val) if exact else float(val)
            if val < 0:
                if exact or val < -FLOAT_SUM_TOL:
                    raise InputError(f"negative weight {val} at {space.key(idx)}")
                continue
            if val == 0:
                continue
            w[idx] = w.get(idx, 0) + val
        total = sum(w.values())
        if normalize:
            if total <= 0:
                raise InputError("cannot normalize a zero measure")
            w = {k: v / total for k, v in w.items()}
        elif exact and total != 1:
            raise InputError(f"weights sum to {total}, not 1")
        elif not exact and abs(total - 1.0) > FLOAT_SUM_TOL:
            raise InputError(f"weights sum to {total!r}, not 1")
        self.space = space
        self._w = w
        self.exact = exact

    @classmethod
    def from_dense(cls, space: ProductSpace, values, **kw) -> "Distribution":
        arr = np.asarray(values, dtype=object).reshape(space.shape)
        return cls(space, {p: arr[p] for p in space.profiles()}, **kw)

    @classmethod
    def point(cls, space: ProductSpace, profile) -> "Distribution":
        return cls(space, {space.coerce(profile): Fraction(1)})

    @classmethod
    def uniform(cls, space: ProductSpace, support=None) -> "Distribution":
        support = list(space.profiles()) if support is None else [space.coerce(p) for p in support]
        if not support:
            raise InputError("uniform distribution over an empty set")
        w = Fraction(1, len(set(support)))
        return cls(space, {p: w for p in support})

    def __getitem__(self, profile) -> Scalar:
        if not (isinstance(profile, tuple) and all(isinstance(i, int) for i in profile)):
            profile = self.space.coerce(profile)
        return self._w.get(profile, Fraction(0) if self.exact else 0.0)

    def items(self):
        return self._w.items()

    def __len__(self):
        return len(self._w)

    @property
    def support(self) -> frozenset:
        return frozenset(self._w)

    def dense(self) -> np.ndarray:
        out = np.zeros(self.space.shape)
        for p, v in self._w.items():
            out[p] = float(v)
        return out

    def to_float(self) -> "Distribution":
        if not self.exact:
            return self
        return Distribution(self.space, {p: float(v) for p, v in self._w.items()}, normalize=True)

    def marginal(self, coord: int) -> dict:
        out = {}
        for p, v in self._w.items():
            out[p[coord]] = out.get(p[coord], 0) + v
        return out

    def is_product(self) -> bool:
        """Exact test that the distribution equals the product of its marginals."""
        margs = [self.marginal(c) for c in range(self.space.ndim)]
        cells = itertools.product(*(sorted(m) for m in margs))
        count = 0
        for cell in cells:
            expected = math.prod(m[i] for m, i in zip(margs, cell))
            got = self._w.get(cell, 0)
            if (got != expected) if self.exact else abs(got - expected) > FLOAT_SUM_TOL:
                return False
            count += 1
        return count == len(self._w)

    def tv(self, other: "Distribution") -> float:
        """Total variation distance, half the L1 norm."""
        if other.space != self.space:
            raise InputError("distributions live on different spaces")
        keys = set(self._w) | set(other._w)
        return 0.5 * sum(abs(float(self._w.get(k, 0)) - float(other._w.get(k, 0))) for k in keys)

    def __eq__(self, other):
        if not isinstance(other, Distribution) or other.space != self.space:
            return NotImplemented
        return self._w == other._w

    __hash__ = None

    def as_keys(self) -> dict:
        return {self.space.key(p): v for p, v in sorted(self._w.items())}

    def __repr__(self):
        body = ", ".join(f"{k}: {v}" for k, v in self.as_keys().items())
        return f"Distribution({{{body}}})"


class StrategyProfile:
    """Per-player maps from messages to (mixtures over) actions."""

    def __init__(self, messages: ProductSpace, actions: ProductSpace, maps):
        if messages.ndim != actions.ndim:
            raise InputError("message and action spaces have different numbers of players")
        if isinstance(maps, Mapping):
            maps = [maps[i] for i in range(messages.ndim)]
        if len(maps) != messages.ndim:
            raise InputError("one strategy per player is required")
        table = []
        for i, mp in enumerate(maps):
            if not isinstance(mp, Mapping):
                mp = dict(enumerate(mp))
            rows = [None] * messages.shape[i]
            for msg, act in mp.items():
                m = messages.label_index(i, msg)
                if isinstance(act, Mapping):
                    mix = [(actions.label_index(i, a), to_fraction(w)) for a, w in act.items()]
                    mix = [(a, w) for a, w in mix if w != 0]
                    if any(w < 0 for _, w in mix) or sum(w for _, w in mix) != 1:
                        raise InputError(f"strategy of player {i} at {msg!r} is not a distribution")
                else:
                    mix = [(actions.label_index(i, act), Fraction(1))]
                rows[m] = tuple(sorted(mix))
            missing = [messages.labels[i][m] for m, r in enumerate(rows) if r is None]
            if missing:
                raise InputError(f"strategy of player {i} undefined on messages {missing}")
            table.append(tuple(rows))
        self.messages = messages
        self.actions = actions
        self.maps = tuple(table)

    @classmethod
    def obedient(cls, space: ProductSpace) -> "StrategyProfile":
        return cls(space, space, [list(range(n)) for n in space.shape])

    @property
    def is_pure(self) -> bool:
        return all(len(mix) == 1 for row in self.maps for mix in row)

    def mix(self, player: int, message: int):
        return self.maps[player][message]

    def joint(self, profile: Profile) -> Iterator[tuple]:
        """Yield (action profile, probability) for a message profile."""
        parts = [self.maps[i][m] for i, m in enumerate(profile)]
        for combo in itertools.product(*parts):
            yield tuple(a for a, _ in combo), math.prod((w for _, w in combo), start=Fraction(1))

    def as_labels(self) -> list:
        out = []
        for i, row in enumerate(self.maps):
            d = {}
            for m, mix in enumerate(row):
                lab = self.messages.labels[i][m]
                if len(mix) == 1:
                    d[lab] = self.actions.labels[i][mix[0][0]]
                else:
                    d[lab] = {self.actions.labels[i][a]: w for a, w in mix}
            out.append(d)
        return out


@dataclass(frozen=True)
class CEReport:
    is_ce: bool
    worst_gain: Scalar
    worst: tuple | None  # (player, recommended, deviation) as labels

    def __bool__(self):
        return self.is_ce


def _check_game_space(game: Game, q: Distribution):
    if q.space != game.space:
        raise InputError("distribution is not over the game's action profiles")


def deviation_gain(game: Game, q: Distribution, player, recommended, deviation) -> Scalar:
    """sum over a_-i of q(a_i, a_-i) [u_i(a_i, a_-i) - u_i(b, a_-i)], not normalized."""
    _check_game_space(game, q)
    i = game.player_index(player)
    a = game.space.label_index(i, recommended)
    b = game.space.label_index(i, deviation)
    u = game.payoffs[i]
    total = Fraction(0) if q.exact else 0.0
    for prof, w in q.items():
        if prof[i] != a:
            continue
        dev = prof[:i] + (b,) + prof[i + 1:]
        total += w * (u[prof] - u[dev])
    return total


def is_correlated_equilibrium(game: Game, q: Distribution, tol=None) -> CEReport:
    """Obedience check at every recommendation with positive marginal.

    ``tol`` defaults to 0 for exact distributions and ``DEFAULT_FLOAT_TOL``
    otherwise.
    """
    _check_game_space(game, q)
    if tol is None:
        tol = 0 if q.exact else DEFAULT_FLOAT_TOL
    worst_gain, worst = None, None
    for i in range(game.n_players):
        marg = game.space.shape[i]
        active = q.marginal(i)
        for a in range(marg):
            if not active.get(a, 0) > 0:
                continue
            for b in range(marg):
                if b == a:
                    continue
                g = deviation_gain(game, q, i, a, b)
                if worst_gain is None or g < worst_gain:
                    worst_gain = g
                    worst = (game.players[i], game.space.labels[i][a], game.space.labels[i][b])
    if worst_gain is None:
        worst_gain = Fraction(0) if q.exact else 0.0
    return CEReport(bool(worst_gain >= -tol), worst_gain, worst)


def pushforward(eta: Distribution, sigma: StrategyProfile) -> Distribution:
    """Outcome distribution from drawing m ~ eta and playing sigma(m)."""
    if eta.space != sigma.messages:
        raise InputError("message distribution and strategy use different message spaces")
    out = {}
    for m, w in eta.items():
        for a, p in sigma.joint(m):
            out[a] = out.get(a, 0) + w * p
    if not eta.exact:
        out = {a: float(v) for a, v in out.items()}
    return Distribution(sigma.actions, out)


def expected_payoffs(game: Game, mu: Distribution) -> tuple:
    _check_game_space(game, mu)
    zero = Fraction(0) if mu.exact else 0.0
    return tuple(sum((w * u[p] for p, w in mu.items()), zero) for u in game.payoffs)
