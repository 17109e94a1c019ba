"""Propositional formulas over named proposition variables.

These appear as guards on effect atoms, as the output of the to-formula
translation, and as the input language of the SAT solver. Connectives are
binary; the builder functions fold constants so that guards stay small.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from .names import Name


class Formula:
    __slots__ = ()


@dataclass(frozen=True)
class Top(Formula):
    def __str__(self) -> str:
        return "T"


@dataclass(frozen=True)
class Bot(Formula):
    def __str__(self) -> str:
        return "F"


@dataclass(frozen=True)
class Prop(Formula):
    name: Name

    def __str__(self) -> str:
        return self.name.text


@dataclass(frozen=True)
class And(Formula):
    lhs: Formula
    rhs: Formula

    def __str__(self) -> str:
        return f"({self.lhs} /\\ {self.rhs})"


@dataclass(frozen=True)
class Or(Formula):
    lhs: Formula
    rhs: Formula

    def __str__(self) -> str:
        return f"({self.lhs} \\/ {self.rhs})"


@dataclass(frozen=True)
class Implies(Formula):
    lhs: Formula
    rhs: Formula

    def __str__(self) -> str:
        return f"({self.lhs} => {self.rhs})"


TOP = Top()
BOT = Bot()


def conj2(a: Formula, b: Formula) -> Formula:
    """Conjunction with unit/absorption folding."""
    if isinstance(a, Top):
        return b
    if isinstance(b, Top):
        return a
    if isinstance(a, Bot) or isinstance(b, Bot):
        return BOT
    if a == b:
        return a
    return And(a, b)


def disj2(a: Formula, b: Formula) -> Formula:
    """Disjunction with unit/absorption folding."""
    if isinstance(a, Bot):
        return b
    if isinstance(b, Bot):
        return a
    if isinstance(a, Top) or isinstance(b, Top):
        return TOP
    if a == b:
        return a
    return Or(a, b)


def impl(a: Formula, b: Formula) -> Formula:
    """Implication with constant folding (a => T and F => b are T)."""
    if isinstance(a, Top):
        return b
    if isinstance(b, Top) or isinstance(a, Bot):
        return TOP
    if a == b:
        return TOP
    return Implies(a, b)


def neg(a: Formula) -> Formula:
    return impl(a, BOT)


def conj(parts: Iterable[Formula]) -> Formula:
    out: Formula = TOP
    for p in parts:
        out = conj2(out, p)
    return out


def disj(parts: Iterable[Formula]) -> Formula:
    out: Formula = BOT
    for p in parts:
        out = disj2(out, p)
    return out


def props(phi: Formula) -> frozenset[Name]:
    """All proposition variables occurring in phi."""
    if isinstance(phi, Prop):
        return frozenset((phi.name,))
    if isinstance(phi, (And, Or, Implies)):
        return props(phi.lhs) | props(phi.rhs)
    return frozenset()


class Valuation:
    """A finite map from proposition variables to booleans.

    Lookup is strict: evaluating a formula whose props are not all covered is
    a bug in the caller, so it raises rather than defaulting.
    """

    def __init__(self, entries: Mapping[Name, bool] | None = None) -> None:
        self._map: dict[Name, bool] = dict(entries) if entries else {}

    def __getitem__(self, name: Name) -> bool:
        try:
            return self._map[name]
        except KeyError:
            raise KeyError(f"valuation does not cover prop {name!r}") from None

    def __contains__(self, name: Name) -> bool:
        return name in self._map

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Valuation) and self._map == other._map

    def __repr__(self) -> str:
        inner = ", ".join(f"{n.text}={'T' if v else 'F'}"
                          for n, v in sorted(self._map.items(),
                                             key=lambda kv: kv[0].key()))
        return "{" + inner + "}"

    def items(self) -> list[tuple[Name, bool]]:
        return sorted(self._map.items(), key=lambda kv: kv[0].key())

    def names(self) -> frozenset[Name]:
        return frozenset(self._map)

    def extended(self, more: Mapping[Name, bool]) -> "Valuation":
        out = dict(self._map)
        out.update(more)
        return Valuation(out)

    def defaulted(self, names: Iterable[Name], value: bool = False) -> "Valuation":
        """Extend with a default for any of `names` not already covered."""
        out = dict(self._map)
        for n in names:
            out.setdefault(n, value)
        return Valuation(out)


def evaluate(phi: Formula, rho: Valuation) -> bool:
    """Classical truth of phi under rho (strict on missing props)."""
    if isinstance(phi, Top):
        return True
    if isinstance(phi, Bot):
        return False
    if isinstance(phi, Prop):
        return rho[phi.name]
    if isinstance(phi, And):
        return evaluate(phi.lhs, rho) and evaluate(phi.rhs, rho)
    if isinstance(phi, Or):
        return evaluate(phi.lhs, rho) or evaluate(phi.rhs, rho)
    if isinstance(phi, Implies):
        return (not evaluate(phi.lhs, rho)) or evaluate(phi.rhs, rho)
    raise TypeError(f"not a formula: {phi!r}")


def all_valuations(names: Iterable[Name]) -> Iterator[Valuation]:
    """Every valuation over `names`, in a deterministic order."""
    order = sorted(set(names), key=Name.key)
    for bits in itertools.product((False, True), repeat=len(order)):
        yield Valuation(dict(zip(order, bits)))


def formulas_equivalent(a: Formula, b: Formula) -> bool:
    """Truth-table equivalence (intended for small guard formulas)."""
    names = props(a) | props(b)
    return all(evaluate(a, rho) == evaluate(b, rho)
               for rho in all_valuations(names))


def tautology(phi: Formula) -> bool:
    return all(evaluate(phi, rho) for rho in all_valuations(props(phi)))
