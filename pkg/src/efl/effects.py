"""Internal effects, types, constraints and schemes.

Effects are kept in a guarded-atom normal form: a finite set of atoms, each an
effect variable paired with a propositional guard, with at most one atom per
variable. The empty set is the pure effect. Join merges atom sets (guards of a
shared variable are or-ed), and guarding an effect and-s the formula onto
every atom. Atoms whose guard folds to F are dropped; under any valuation they
contribute nothing.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .formulas import (BOT, TOP, Bot, Formula, Top, Valuation, all_valuations,
                       conj, conj2, disj2, evaluate, impl, props)
from .names import KIND_EFF, KIND_TYPE, Name

# ---------------------------------------------------------------------------
# Effects
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Effect:
    """A set of guarded effect atoms; () is the pure effect."""

    atoms: tuple[tuple[Name, Formula], ...]

    @staticmethod
    def var(name: Name) -> "Effect":
        if name.kind != KIND_EFF:
            raise ValueError(f"not an effect name: {name!r}")
        return Effect(((name, TOP),))

    def is_pure(self) -> bool:
        return not self.atoms

    def atom_names(self) -> frozenset[Name]:
        return frozenset(n for n, _ in self.atoms)

    def guard_of(self, name: Name) -> Formula:
        """Guard of `name`'s atom, or F if absent."""
        for n, g in self.atoms:
            if n == name:
                return g
        return BOT

    def __str__(self) -> str:
        if not self.atoms:
            return "pure"
        parts = []
        for name, g in self.atoms:
            if isinstance(g, Top):
                parts.append(name.text)
            else:
                parts.append(f"{name.text} ? {g}")
        return " \\/ ".join(parts)


def effect_of(entries: Mapping[Name, Formula]) -> Effect:
    """Build an effect from a var->guard map, dropping F-guarded atoms."""
    atoms = tuple(sorted(((n, g) for n, g in entries.items()
                          if not isinstance(g, Bot)),
                         key=lambda a: a[0].key()))
    return Effect(atoms)


PURE = Effect(())


def join(*effects: Effect) -> Effect:
    """Least upper bound: union of atoms, same-variable guards or-ed."""
    merged: dict[Name, Formula] = {}
    for e in effects:
        for name, g in e.atoms:
            if name in merged:
                merged[name] = disj2(merged[name], g)
            else:
                merged[name] = g
    return effect_of(merged)


def guard(e: Effect, phi: Formula) -> Effect:
    """Guard every atom of e by phi (conjoined onto existing guards)."""
    return effect_of({n: conj2(g, phi) for n, g in e.atoms})


def erase_guards(e: Effect, rho: Valuation) -> Effect:
    """Keep the atoms whose guard holds under rho, with guard T."""
    return effect_of({n: TOP for n, g in e.atoms if evaluate(g, rho)})


def to_formula(e: Effect, alpha: Name) -> Formula:
    """Presence of alpha in e, as a formula over the guards' props."""
    return e.guard_of(alpha)


def effect_props(e: Effect) -> frozenset[Name]:
    out: frozenset[Name] = frozenset()
    for _, g in e.atoms:
        out |= props(g)
    return out


def effects_equal(e1: Effect, e2: Effect) -> bool:
    """Semantic equality: same erased atoms under every valuation."""
    names = effect_props(e1) | effect_props(e2)
    return all(erase_guards(e1, rho) == erase_guards(e2, rho)
               for rho in all_valuations(names))


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


class Type:
    __slots__ = ()


@dataclass(frozen=True)
class TVar(Type):
    name: Name

    def __str__(self) -> str:
        return self.name.text


@dataclass(frozen=True)
class Arrow(Type):
    param: Type
    effect: Effect
    result: Type

    def __str__(self) -> str:
        lhs = f"({self.param})" if isinstance(self.param, (Arrow, ForallTyp,
                                                           ForallEff)) \
            else str(self.param)
        eff = "" if self.effect.is_pure() else str(self.effect)
        return f"{lhs} ->[{eff}] {self.result}"


@dataclass(frozen=True)
class ForallTyp(Type):
    binder: Name
    body: Type

    def __str__(self) -> str:
        return f"forall typ {self.binder.text}. {self.body}"


@dataclass(frozen=True)
class ForallEff(Type):
    binder: Name
    body: Type

    def __str__(self) -> str:
        return f"forall eff {self.binder.text}. {self.body}"


def arrow_count(t: Type) -> int:
    """Number of arrow constructors in t (drives constraint-free minting)."""
    if isinstance(t, Arrow):
        return 1 + arrow_count(t.param) + arrow_count(t.result)
    if isinstance(t, (ForallTyp, ForallEff)):
        return arrow_count(t.body)
    return 0


# ---------------------------------------------------------------------------
# Constraints and schemes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Constraint:
    """A subeffect constraint lhs <= rhs."""

    lhs: Effect
    rhs: Effect

    def __str__(self) -> str:
        rhs = "pure" if self.rhs.is_pure() else str(self.rhs)
        return f"{self.lhs} <: {rhs}"

    def key(self) -> str:
        return str(self)


ConstraintSet = frozenset  # frozenset[Constraint]


def constraint_set(items: Iterable[Constraint]) -> frozenset[Constraint]:
    """Build a constraint set, dropping trivial pure-LHS constraints."""
    return frozenset(c for c in items if not c.lhs.is_pure())


def sorted_constraints(omega: Iterable[Constraint]) -> list[Constraint]:
    return sorted(omega, key=Constraint.key)


def omega_to_formula(omega: Iterable[Constraint], alpha: Name) -> Formula:
    """Conjunction over omega of (lhs presence => rhs presence) at alpha."""
    return conj(impl(to_formula(c.lhs, alpha), to_formula(c.rhs, alpha))
                for c in sorted_constraints(omega))


def constraints_props(omega: Iterable[Constraint]) -> frozenset[Name]:
    out: frozenset[Name] = frozenset()
    for c in omega:
        out |= effect_props(c.lhs) | effect_props(c.rhs)
    return out


@dataclass(frozen=True)
class Scheme:
    """A constrained effect scheme: forall binders [constraints] => body."""

    binders: tuple[Name, ...]
    constraints: frozenset[Constraint]
    body: Type

    def __str__(self) -> str:
        if not self.binders and not self.constraints:
            return str(self.body)
        names = " ".join(b.text for b in self.binders)
        cs = ", ".join(str(c) for c in sorted_constraints(self.constraints))
        mid = f" [{cs}]" if cs else ""
        return f"forall {names}{mid} => {self.body}"


def mono(t: Type) -> Scheme:
    return Scheme((), frozenset(), t)


# ---------------------------------------------------------------------------
# Substitution (effect variables -> effects; type variables -> types)
# ---------------------------------------------------------------------------

EffSubst = Mapping[Name, Effect]


def subst_effect(theta: EffSubst, e: Effect) -> Effect:
    """Replace atoms by their images, pushing the atom's guard inward."""
    out = PURE
    for name, g in e.atoms:
        if name in theta:
            out = join(out, guard(theta[name], g))
        else:
            out = join(out, Effect(((name, g),)))
    return out


def subst_type(theta: EffSubst, t: Type) -> Type:
    if isinstance(t, TVar):
        return t
    if isinstance(t, Arrow):
        return Arrow(subst_type(theta, t.param),
                     subst_effect(theta, t.effect),
                     subst_type(theta, t.result))
    if isinstance(t, ForallTyp):
        return ForallTyp(t.binder, subst_type(theta, t.body))
    if isinstance(t, ForallEff):
        # Binder ids are globally unique, so capture is impossible.
        return ForallEff(t.binder, subst_type(theta, t.body))
    raise TypeError(f"not a type: {t!r}")


def subst_constraint(theta: EffSubst, c: Constraint) -> Constraint:
    return Constraint(subst_effect(theta, c.lhs), subst_effect(theta, c.rhs))


def subst_constraints(theta: EffSubst,
                      omega: Iterable[Constraint]) -> frozenset[Constraint]:
    return constraint_set(subst_constraint(theta, c) for c in omega)


def subst_scheme(theta: EffSubst, s: Scheme) -> Scheme:
    return Scheme(s.binders, subst_constraints(theta, s.constraints),
                  subst_type(theta, s.body))


def subst_type_vars(tmap: Mapping[Name, Type], t: Type) -> Type:
    """Substitute type variables (used by explicit type application)."""
    if isinstance(t, TVar):
        return tmap.get(t.name, t)
    if isinstance(t, Arrow):
        return Arrow(subst_type_vars(tmap, t.param), t.effect,
                     subst_type_vars(tmap, t.result))
    if isinstance(t, ForallTyp):
        return ForallTyp(t.binder, subst_type_vars(tmap, t.body))
    if isinstance(t, ForallEff):
        return ForallEff(t.binder, subst_type_vars(tmap, t.body))
    raise TypeError(f"not a type: {t!r}")


# ---------------------------------------------------------------------------
# Free variables / scoping / erasure over types
# ---------------------------------------------------------------------------


def free_eff_vars_effect(e: Effect) -> frozenset[Name]:
    return e.atom_names()


def free_eff_vars_type(t: Type) -> frozenset[Name]:
    if isinstance(t, TVar):
        return frozenset()
    if isinstance(t, Arrow):
        return (free_eff_vars_type(t.param) | free_eff_vars_effect(t.effect)
                | free_eff_vars_type(t.result))
    if isinstance(t, ForallTyp):
        return free_eff_vars_type(t.body)
    if isinstance(t, ForallEff):
        return free_eff_vars_type(t.body) - {t.binder}
    raise TypeError(f"not a type: {t!r}")


def free_eff_vars_constraints(omega: Iterable[Constraint]) -> frozenset[Name]:
    out: frozenset[Name] = frozenset()
    for c in omega:
        out |= free_eff_vars_effect(c.lhs) | free_eff_vars_effect(c.rhs)
    return out


def free_eff_vars_scheme(s: Scheme) -> frozenset[Name]:
    inner = free_eff_vars_type(s.body) | free_eff_vars_constraints(
        s.constraints)
    return inner - set(s.binders)


def free_typ_vars_type(t: Type) -> frozenset[Name]:
    if isinstance(t, TVar):
        return frozenset((t.name,))
    if isinstance(t, Arrow):
        return free_typ_vars_type(t.param) | free_typ_vars_type(t.result)
    if isinstance(t, ForallTyp):
        return free_typ_vars_type(t.body) - {t.binder}
    if isinstance(t, ForallEff):
        return free_typ_vars_type(t.body)
    raise TypeError(f"not a type: {t!r}")


def erase_guards_type(t: Type, rho: Valuation) -> Type:
    """Erase guards in every effect position of t under rho."""
    if isinstance(t, TVar):
        return t
    if isinstance(t, Arrow):
        return Arrow(erase_guards_type(t.param, rho),
                     erase_guards(t.effect, rho),
                     erase_guards_type(t.result, rho))
    if isinstance(t, ForallTyp):
        return ForallTyp(t.binder, erase_guards_type(t.body, rho))
    if isinstance(t, ForallEff):
        return ForallEff(t.binder, erase_guards_type(t.body, rho))
    raise TypeError(f"not a type: {t!r}")


def type_props(t: Type) -> frozenset[Name]:
    if isinstance(t, TVar):
        return frozenset()
    if isinstance(t, Arrow):
        return (type_props(t.param) | effect_props(t.effect)
                | type_props(t.result))
    if isinstance(t, (ForallTyp, ForallEff)):
        return type_props(t.body)
    raise TypeError(f"not a type: {t!r}")


def scheme_props(s: Scheme) -> frozenset[Name]:
    return type_props(s.body) | constraints_props(s.constraints)
