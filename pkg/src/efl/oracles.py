"""Independent oracles and random generators backing the test suite.

Nothing here is used by the checker itself. The derivation search re-decides
subeffecting by bounded proof search over the declarative rules, written
against the same data types but sharing no logic with the closure procedure
it cross-checks. The program generator emits well-shaped source text (shapes
are correct by construction; effects are left to inference), and the
end-to-end harness asserts that whatever inference accepts, the certificate
checker confirms under the witness valuation.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Iterable, Mapping

from .declarative import subtype_holds
from .driver import Discharger, check_program, verify_certificates
from .effects import (PURE, Arrow, Constraint, Effect, ForallEff, ForallTyp,
                      Scheme, TVar, Type, constraint_set, erase_guards,
                      erase_guards_type, join, subst_constraints,
                      subst_effect, subst_type)
from .formulas import (BOT, TOP, Formula, Prop, Top, Valuation, conj2, disj2,
                       evaluate, impl)
from .inference import Config, ShapeError, subtype
from .names import KIND_EFF, KIND_TYPE, Name, NameSupply
from .solver import sat
from .syntax import (EfApp, ELam, Expr, Lam, Let, Program, SArrow, SEJoin,
                     SEPure, SEVar, SEWild, SForallEff, SForallTyp, STVar,
                     SynEffect, SynType, TLam, TyApp, Var, App, Scope, Parser,
                     parse_program)
from .declarative import entails
from .inference import tr_type

# ---------------------------------------------------------------------------
# Bounded derivation search for subeffecting
# ---------------------------------------------------------------------------


def derivation_search_subeffect(omega: Iterable[Constraint], rho: Valuation,
                                e1: Effect, e2: Effect,
                                depth: int = 6) -> bool:
    """Decide omega |- e1 <= e2 under rho by bounded search over the
    declarative rules: reflexivity, the assumption axiom, bottom, the join
    rules, the three guard rules, and transitivity through assumption sides.
    """
    omega = list(omega)
    midpoints: list[Effect] = [PURE]
    for c in omega:
        for side in (c.lhs, c.rhs):
            if side not in midpoints:
                midpoints.append(side)
    memo: dict[tuple[Effect, Effect, int], bool] = {}

    def search(l: Effect, r: Effect, d: int) -> bool:
        if l.is_pure():
            return True
        if l == r:
            return True
        key = (l, r, d)
        if key in memo:
            return memo[key]
        memo[key] = False  # cut cycles pessimistically
        result = _search_steps(l, r, d)
        memo[key] = result
        return result

    def _search_steps(l: Effect, r: Effect, d: int) -> bool:
        if d <= 0:
            return False
        for c in omega:
            if c.lhs == l and c.rhs == r:
                return True
        if len(l.atoms) == 1:
            v, g = l.atoms[0]
            if not isinstance(g, Top):
                if not evaluate(g, rho):
                    return True  # guard is false: l erases to pure
                if search(Effect.var(v), r, d - 1):
                    return True  # peel the guard (it only shrinks l)
        if len(r.atoms) == 1:
            v, g = r.atoms[0]
            if not isinstance(g, Top) and evaluate(g, rho):
                if search(l, Effect.var(v), d - 1):
                    return True  # guard true on the right: peel it
        if len(l.atoms) >= 2:
            n = len(l.atoms)
            for mask in range(1, 2 ** n - 1):
                a = Effect(tuple(at for i, at in enumerate(l.atoms)
                                 if mask >> i & 1))
                b = Effect(tuple(at for i, at in enumerate(l.atoms)
                                 if not mask >> i & 1))
                if search(a, r, d - 1) and search(b, r, d - 1):
                    return True
        if len(r.atoms) >= 2:
            n = len(r.atoms)
            for mask in range(1, 2 ** n - 1):
                s = Effect(tuple(at for i, at in enumerate(r.atoms)
                                 if mask >> i & 1))
                if search(l, s, d - 1):
                    return True
        for m in midpoints:
            if m == l or m == r:
                continue
            if search(l, m, d - 1) and search(m, r, d - 1):
                return True
        return False

    return search(e1, e2, depth)


# ---------------------------------------------------------------------------
# Random formulas / effects / types (for property and bridge tests)
# ---------------------------------------------------------------------------


def random_guard(rng: random.Random, props: list[Name],
                 depth: int = 2) -> Formula:
    if depth == 0 or not props or rng.random() < 0.35:
        roll = rng.random()
        if roll < 0.4 or not props:
            return TOP if roll < 0.25 else (BOT if roll < 0.4 else TOP)
        return Prop(rng.choice(props))
    a = random_guard(rng, props, depth - 1)
    b = random_guard(rng, props, depth - 1)
    return rng.choice((conj2(a, b), disj2(a, b), impl(a, b)))


def random_effect(rng: random.Random, atoms: list[Name], props: list[Name],
                  max_atoms: int = 3) -> Effect:
    chosen = rng.sample(atoms, k=rng.randint(0, min(max_atoms, len(atoms))))
    out = PURE
    for v in chosen:
        out = join(out, Effect(((v, random_guard(rng, props)),)))
    return out


def random_type_pair(rng: random.Random, supply: NameSupply,
                     atoms: list[Name], props: list[Name],
                     depth: int = 2) -> tuple[Type, Type]:
    """Two structurally compatible types with independently random effects."""
    roll = rng.random()
    if depth == 0 or roll < 0.3:
        base = Name("Base", KIND_TYPE, 0)
        return TVar(base), TVar(base)
    if roll < 0.75:
        p1, p2 = random_type_pair(rng, supply, atoms, props, depth - 1)
        r1, r2 = random_type_pair(rng, supply, atoms, props, depth - 1)
        return (Arrow(p1, random_effect(rng, atoms, props), r1),
                Arrow(p2, random_effect(rng, atoms, props), r2))
    b1 = supply.fresh(KIND_EFF, "q")
    b2 = supply.fresh(KIND_EFF, "q")
    inner_atoms1 = atoms + [b1]
    inner_atoms2 = atoms + [b2]
    s1, s2 = random_type_pair(rng, supply, atoms, props, depth - 1)
    # Decorate each body over its own binder by a shared recipe: swap the
    # binder into a shared slot so shapes stay compatible.
    t1 = _sprinkle_binder(rng, s1, b1, props)
    t2 = _sprinkle_binder(rng, s2, b2, props)
    return ForallEff(b1, t1), ForallEff(b2, t2)


def _sprinkle_binder(rng: random.Random, t: Type, binder: Name,
                     props: list[Name]) -> Type:
    if isinstance(t, Arrow):
        eff = t.effect
        if rng.random() < 0.5:
            eff = join(eff, Effect(((binder, random_guard(rng, props)),)))
        return Arrow(_sprinkle_binder(rng, t.param, binder, props), eff,
                     _sprinkle_binder(rng, t.result, binder, props))
    if isinstance(t, (ForallTyp, ForallEff)):
        return type(t)(t.binder, _sprinkle_binder(rng, t.body, binder, props))
    return t


# ---------------------------------------------------------------------------
# Program generator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _SBase:
    name: str


@dataclass(frozen=True)
class _SArrow:
    param: "object"
    result: "object"


@dataclass(frozen=True)
class _SForallE:
    body: "object"


_UNIT = _SBase("Unit")
_INT = _SBase("Int")

GEN_PRELUDE = """\
effect IO
effect DB
type Unit
type Int
extern tt : Unit
extern one : Int
extern launch : Unit ->[IO] Unit
extern query : Unit ->[DB] Unit
extern inc : Int ->[] Int
extern seq : Unit ->[] Unit ->[] Unit
extern both : (Unit ->[IO \\/ DB] Unit) ->[IO \\/ DB] Unit
extern pass : forall eff h. (Unit ->[h] Unit) ->[] (Unit ->[h] Unit)
extern twice : forall eff h. (Unit ->[h] Unit) ->[h] Unit
"""

_ARROW_UU = _SArrow(_UNIT, _UNIT)

# (name, shape, latent effects known pure when called)
_PRELUDE_ENV: list[tuple[str, object, bool]] = [
    ("tt", _UNIT, True),
    ("one", _INT, True),
    ("launch", _ARROW_UU, False),
    ("query", _ARROW_UU, False),
    ("inc", _SArrow(_INT, _INT), True),
    ("seq", _SArrow(_UNIT, _SArrow(_UNIT, _UNIT)), True),
    ("both", _SArrow(_ARROW_UU, _UNIT), False),
    ("pass", _SForallE(_SArrow(_ARROW_UU, _ARROW_UU)), True),
    ("twice", _SForallE(_SArrow(_ARROW_UU, _UNIT)), False),
]


def _shape_arrows(s: object) -> int:
    if isinstance(s, _SArrow):
        return 1 + _shape_arrows(s.param) + _shape_arrows(s.result)
    if isinstance(s, _SForallE):
        return _shape_arrows(s.body)
    return 0


class _Gen:
    def __init__(self, rng: random.Random, size: int, mode: str) -> None:
        self.rng = rng
        self.size = size
        self.mode = mode
        self.counter = 0
        self.eff_scope: list[str] = []

    def fresh(self, stem: str) -> str:
        self.counter += 1
        return f"{stem}{self.counter}"

    # -- shapes ------------------------------------------------------------

    def shape(self, depth: int = 2) -> object:
        roll = self.rng.random()
        if depth == 0 or roll < 0.35:
            return _UNIT if self.rng.random() < 0.8 else _INT
        if roll < 0.72:
            return _SArrow(self.shape(depth - 1), self.shape(depth - 1))
        return _SForallE(_SArrow(self.shape(depth - 1),
                                 self.shape(depth - 1)))

    def def_shape(self) -> object:
        while True:
            s = self.shape()
            if self.mode == "constraint-free" and _shape_arrows(s) > 3:
                continue
            return s

    # -- annotations ---------------------------------------------------------

    def syn_effect(self) -> str:
        roll = self.rng.random()
        if roll < 0.5:
            return "_"
        if roll < 0.7:
            return ""
        pool = ["IO", "DB"] + self.eff_scope
        picks = self.rng.sample(pool, k=min(len(pool),
                                            self.rng.randint(1, 2)))
        return " \\/ ".join(picks)

    def syn_type(self, s: object) -> str:
        if isinstance(s, _SBase):
            return s.name
        if isinstance(s, _SArrow):
            lhs = self.syn_type(s.param)
            if isinstance(s.param, (_SArrow, _SForallE)):
                lhs = f"({lhs})"
            return f"{lhs} ->[{self.syn_effect()}] {self.syn_type(s.result)}"
        if isinstance(s, _SForallE):
            h = self.fresh("h")
            self.eff_scope.append(h)
            body = self.syn_type(s.body)
            self.eff_scope.pop()
            return f"forall eff {h}. {body}"
        raise TypeError(f"not a shape: {s!r}")

    # -- expressions ---------------------------------------------------------

    def leaf(self, s: object, env: list, pure: bool) -> str:
        have = [n for n, sh, _ in env if sh == s]
        if have and self.rng.random() < 0.7:
            return self.rng.choice(have)
        if s == _UNIT:
            if not pure and self.rng.random() < 0.5:
                return self.rng.choice(("(launch tt)", "(query tt)"))
            return "tt"
        if s == _INT:
            return "one" if self.rng.random() < 0.6 else "(inc one)"
        if isinstance(s, _SArrow):
            x = self.fresh("x")
            body = self.leaf(s.result,
                             env + [(x, s.param, True)], False)
            return f"(fn ({x} : {self.syn_type(s.param)}) => {body})"
        if isinstance(s, _SForallE):
            h = self.fresh("h")
            self.eff_scope.append(h)
            body = self.leaf(s.body, env, True)
            self.eff_scope.pop()
            return f"(efun {h} => {body})"
        raise TypeError(f"not a shape: {s!r}")

    def expr(self, s: object, env: list, budget: int, pure: bool) -> str:
        rng = self.rng
        if budget <= 2:
            return self.leaf(s, env, pure)
        options = ["leaf", "let"]
        if isinstance(s, _SArrow):
            options += ["lam", "lam"]
        if isinstance(s, _SForallE):
            options += ["efun", "efun"]
        if isinstance(s, (_SBase,)):
            options += ["app", "app", "eapp-call"]
        choice = rng.choice(options)

        if choice == "lam":
            x = self.fresh("x")
            ann = self.syn_type(s.param)
            body = self.expr(s.result, env + [(x, s.param, True)],
                             budget - 2, False)
            return f"(fn ({x} : {ann}) => {body})"

        if choice == "efun":
            h = self.fresh("h")
            self.eff_scope.append(h)
            body = self.expr(s.body, env, budget - 2, True)
            self.eff_scope.pop()
            return f"(efun {h} => {body})"

        if choice == "let":
            x = self.fresh("x")
            s1 = self.def_shape()
            bound = self.expr(s1, env, budget // 2, True)
            body = self.expr(s, env + [(x, s1, True)],
                             budget - budget // 2 - 1, pure)
            return f"(let {x} = {bound} in {body})"

        if choice == "app":
            # Either call a known arrow from the environment or synthesize a
            # lambda and call it immediately.
            candidates = [(n, sh) for n, sh, ok in env
                          if isinstance(sh, _SArrow) and sh.result == s
                          and (ok or not pure)]
            if candidates and rng.random() < 0.65:
                name, sh = rng.choice(candidates)
                arg = self.expr(sh.param, env, budget - 2, pure)
                return f"({name} {arg})"
            x = self.fresh("x")
            s1 = self.shape(1)
            body = self.expr(s, env + [(x, s1, True)],
                             budget // 2, pure)
            arg = self.expr(s1, env, budget - budget // 2 - 2, pure)
            return f"((fn ({x} : {self.syn_type(s1)}) => {body}) {arg})"

        if choice == "eapp-call":
            foralls = [(n, sh) for n, sh, ok in env
                       if isinstance(sh, _SForallE)
                       and isinstance(sh.body, _SArrow)
                       and sh.body.result == s and (ok or not pure)]
            if foralls:
                name, sh = rng.choice(foralls)
                arg = self.expr(sh.body.param, env, budget - 3, pure)
                return f"(({name} [eff {self._eapp_arg()}]) {arg})"
            return self.leaf(s, env, pure)

        return self.leaf(s, env, pure)

    def _eapp_arg(self) -> str:
        roll = self.rng.random()
        if roll < 0.3:
            return "_"
        if roll < 0.45:
            return "pure"
        pool = ["IO", "DB"] + self.eff_scope
        picks = self.rng.sample(pool,
                                k=min(len(pool), self.rng.randint(1, 2)))
        return " \\/ ".join(picks)

    def program(self) -> str:
        rng = self.rng
        env = list(_PRELUDE_ENV)
        parts = [GEN_PRELUDE]
        for _ in range(rng.randint(1, 2)):
            name = self.fresh("d")
            s = self.def_shape()
            src = self.expr(s, env, self.size, True)
            parts.append(f"let {name} = {src}")
            env.append((name, s, False))
        final_shape = _UNIT if rng.random() < 0.7 else _INT
        parts.append(self.expr(final_shape, env, self.size // 2, False))
        return "\n".join(parts) + "\n"


def gen_program(seed: int, size: int = 20, mode: str = "constrained") -> str:
    """Deterministic random well-shaped program as source text."""
    return _Gen(random.Random(seed), size, mode).program()


# ---------------------------------------------------------------------------
# Wildcard-under-quantifier metric
# ---------------------------------------------------------------------------


def _syn_effect_has_wild(se: SynEffect) -> bool:
    if isinstance(se, SEWild):
        return True
    if isinstance(se, SEJoin):
        return _syn_effect_has_wild(se.lhs) or _syn_effect_has_wild(se.rhs)
    return False


def _syn_type_wild_under(st: SynType, under: bool) -> bool:
    if isinstance(st, SArrow):
        if under and _syn_effect_has_wild(st.effect):
            return True
        return (_syn_type_wild_under(st.param, under)
                or _syn_type_wild_under(st.result, under))
    if isinstance(st, SForallEff):
        return _syn_type_wild_under(st.body, True)
    if isinstance(st, SForallTyp):
        return _syn_type_wild_under(st.body, under)
    return False


def _expr_wild_under(e: Expr, under: bool) -> bool:
    if isinstance(e, Lam):
        return (_syn_type_wild_under(e.ann, under)
                or _expr_wild_under(e.body, under))
    if isinstance(e, ELam):
        return _expr_wild_under(e.body, True)
    if isinstance(e, TLam):
        return _expr_wild_under(e.body, under)
    if isinstance(e, App):
        return _expr_wild_under(e.fn, under) or _expr_wild_under(e.arg, under)
    if isinstance(e, Let):
        return (_expr_wild_under(e.bound, under)
                or _expr_wild_under(e.body, under))
    if isinstance(e, TyApp):
        return (_expr_wild_under(e.fn, under)
                or _syn_type_wild_under(e.arg, under))
    if isinstance(e, EfApp):
        return (_expr_wild_under(e.fn, under)
                or (under and _syn_effect_has_wild(e.arg)))
    return False


def has_wildcard_under_quantifier(program: Program) -> bool:
    """True if any wildcard sits under an effect quantifier (annotation under
    a forall-eff, or anything inside an efun body)."""
    exprs = [e for _, e in program.defs]
    if program.main is not None:
        exprs.append(program.main)
    return any(_expr_wild_under(e, False) for e in exprs)


# ---------------------------------------------------------------------------
# End-to-end soundness harness
# ---------------------------------------------------------------------------


def end_to_end_soundness(source: str, mode: str = "constrained") -> str:
    """Check one generated program; returns "verified" or "unsat".

    Raises AssertionError if a well-shaped program hits a shape error, or if
    an accepted program's certificates fail to verify.
    """
    supply = NameSupply()
    program = parse_program(source, supply)
    outcome = check_program(program, supply, Config(mode=mode))
    if outcome.status == "infer-error":
        raise AssertionError(
            f"shape error on a well-shaped program: {outcome.error}\n"
            f"--- source ---\n{source}")
    if outcome.status == "unsat":
        return "unsat"
    verify_certificates(outcome)
    return "verified"


# ---------------------------------------------------------------------------
# Scheme comparison tools
# ---------------------------------------------------------------------------


def effect_universe(base: list[Name]) -> list[Effect]:
    """All joins of subsets of base (2^n effects, deterministic order)."""
    out = []
    n = len(base)
    for mask in range(2 ** n):
        e = PURE
        for i in range(n):
            if mask >> i & 1:
                e = join(e, Effect.var(base[i]))
        out.append(e)
    return out


def scheme_more_general(s1: Scheme, s2: Scheme, base: list[Name],
                        ambient: frozenset = frozenset()) -> bool:
    """Every instance of s2 is a weakening of an instance of s1.

    Brute force over instantiations of s1's binders into joins of `base` and
    s2's (skolemized) binders; `ambient` holds constraints both sides may
    assume (e.g. top-level bounds on surviving variables). Intended for small
    guard-free schemes.
    """
    rho = Valuation({})
    assumptions = frozenset(ambient) | s2.constraints
    universe = effect_universe(sorted(set(base) | set(s2.binders),
                                      key=Name.key))
    for combo in itertools.product(universe, repeat=len(s1.binders)):
        theta = dict(zip(s1.binders, combo))
        if not entails(assumptions, rho,
                       subst_constraints(theta, s1.constraints)):
            continue
        if subtype_holds(assumptions, rho,
                         subst_type(theta, s1.body), s2.body):
            return True
    return False


def schemes_equivalent(s1: Scheme, s2: Scheme, base: list[Name],
                       ambient: frozenset = frozenset()) -> bool:
    return (scheme_more_general(s1, s2, base, ambient)
            and scheme_more_general(s2, s1, base, ambient))


def concretize_scheme(scheme: Scheme, rho: Valuation,
                      inst: Mapping[Name, Effect]) -> Scheme:
    """Substitute surviving variables and erase guards under rho."""
    body = erase_guards_type(subst_type(inst, scheme.body), rho)
    om = []
    for c in scheme.constraints:
        lhs = erase_guards(subst_effect(inst, c.lhs), rho)
        rhs = erase_guards(subst_effect(inst, c.rhs), rho)
        om.append(Constraint(lhs, rhs))
    return Scheme(scheme.binders, constraint_set(om), body)


def scheme_admits_instances(scheme: Scheme, side: Formula,
                            targets: list[Type], rigid: Iterable[Name],
                            supply: NameSupply,
                            discharger: Discharger | None = None) -> bool:
    """Satisfiable to instantiate the scheme at every target simultaneously
    (with subtyping in both directions, i.e. type equivalence).

    Pass the discharger that produced `side` so surviving variables are
    eliminated against the same membership propositions."""
    if discharger is None:
        discharger = Discharger(tuple(rigid), supply)
    phi = side
    for target in targets:
        theta = {b: Effect.var(supply.fresh(KIND_EFF))
                 for b in scheme.binders}
        body = subst_type(theta, scheme.body)
        try:
            o1, f1 = subtype(body, target)
            o2, f2 = subtype(target, body)
        except ShapeError:
            return False
        om = subst_constraints(theta, scheme.constraints) | o1 | o2
        phi = conj2(phi, conj2(f1, conj2(f2, discharger.formula_for(om))))
    return sat(phi) is not None


def parse_closed_type(src: str, names: Iterable[Name],
                      supply: NameSupply) -> Type:
    """Parse a wildcard-free type against the given declared names."""
    scope = Scope()
    for n in names:
        scope.table(n.kind)[n.text] = n
    parser = Parser(src, supply, scope)
    st = parser.parse_type()
    parser.expect("eof", "end of input")
    props, gen, t = tr_type(st, supply)
    assert not props and not gen, "type was not wildcard-free"
    return t
