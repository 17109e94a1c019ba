"""Effect reconstruction.

Type shapes come from the mandatory annotations; only effects are inferred.
`infer` walks the expression once, minting fresh effect variables for
wildcards and instantiations, collecting subeffect constraints, building a
side formula over guard propositions, and emitting a Certificate for the
derivation it claims. Generalization at `let` happens in one of two modes:

- constrained: bound variables keep a residual constraint set in the scheme;
- constraint-free: the scheme has no constraints, at the price of minting
  2^(arrow count) bound variables and a grid of guard propositions.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .declarative import (CAbs, CApp, CEAbs, CEApp, CLet, CSub, CTAbs, CTApp,
                          CVar, Cert, subst_cert)
from .effects import (PURE, Arrow, Constraint, Effect, ForallEff, ForallTyp,
                      Scheme, TVar, Type, arrow_count, constraint_set, guard,
                      join, mono, subst_constraints, subst_effect, subst_type,
                      subst_type_vars)
from .formulas import TOP, Formula, Prop, conj, conj2
from .names import KIND_EFF, KIND_PROP, Name, NameSupply
from .syntax import (App, EfApp, ELam, Expr, Lam, Let, SArrow, SEJoin, SEPure,
                     SEVar, SEWild, SForallEff, SForallTyp, STVar, SynEffect,
                     SynType, TLam, TyApp, Var)
from .effects import omega_to_formula


class InferError(Exception):
    """Inference failure (CLI exit code 1)."""


class ShapeError(InferError):
    """A type-shape mismatch: wrong constructor where another was needed."""


class GenLimitError(InferError):
    """Constraint-free generalization exceeded the minted-variable cap."""


@dataclass(frozen=True)
class Config:
    mode: str = "constrained"  # or "constraint-free"
    max_gen_vars: int = 2 ** 16

    def __post_init__(self) -> None:
        if self.mode not in ("constrained", "constraint-free"):
            raise ValueError(f"bad mode: {self.mode!r}")


def purity(e: Effect) -> Constraint:
    return Constraint(e, PURE)


# ---------------------------------------------------------------------------
# Annotation translation
# ---------------------------------------------------------------------------


def tr_effect(se: SynEffect,
              supply: NameSupply) -> tuple[tuple[Name, ...], Effect]:
    """Translate a surface effect; wildcards become fresh variables."""
    if isinstance(se, SEVar):
        return (), Effect.var(se.name)
    if isinstance(se, SEPure):
        return (), PURE
    if isinstance(se, SEWild):
        a = supply.fresh(KIND_EFF)
        return (a,), Effect.var(a)
    if isinstance(se, SEJoin):
        g1, e1 = tr_effect(se.lhs, supply)
        g2, e2 = tr_effect(se.rhs, supply)
        return g1 + g2, join(e1, e2)
    raise TypeError(f"not a surface effect: {se!r}")


def tr_type(st: SynType, supply: NameSupply
            ) -> tuple[tuple[Name, ...], tuple[Name, ...], Type]:
    """Translate a surface type to (props, generated effect vars, type).

    Under an effect quantifier, each effect variable generated in the body is
    rebuilt as "fresh variable joined with the binder guarded by a fresh
    proposition": the proposition decides, per instantiation, whether the
    wildcard includes the quantified variable.
    """
    if isinstance(st, STVar):
        return (), (), TVar(st.name)
    if isinstance(st, SArrow):
        p1, g1, t1 = tr_type(st.param, supply)
        g0, eff = tr_effect(st.effect, supply)
        p2, g2, t2 = tr_type(st.result, supply)
        return p1 + p2, g1 + g0 + g2, Arrow(t1, eff, t2)
    if isinstance(st, SForallTyp):
        p, g, t = tr_type(st.body, supply)
        return p, g, ForallTyp(st.binder, t)
    if isinstance(st, SForallEff):
        p1, g1, t = tr_type(st.body, supply)
        new_props: list[Name] = []
        new_gen: list[Name] = []
        theta: dict[Name, Effect] = {}
        for beta in g1:
            p_b = supply.fresh(KIND_PROP)
            gamma_b = supply.fresh(KIND_EFF)
            new_props.append(p_b)
            new_gen.append(gamma_b)
            theta[beta] = join(Effect.var(gamma_b),
                               guard(Effect.var(st.binder), Prop(p_b)))
        return (p1 + tuple(new_props), tuple(new_gen),
                ForallEff(st.binder, subst_type(theta, t)))
    raise TypeError(f"not a surface type: {st!r}")


# ---------------------------------------------------------------------------
# Algorithmic subtyping
# ---------------------------------------------------------------------------


def subtype(t1: Type, t2: Type) -> tuple[frozenset, Formula]:
    """Constraints + side formula forcing t1 <= t2; ShapeError if the shapes
    can never match."""
    if isinstance(t1, TVar) and isinstance(t2, TVar):
        if t1.name == t2.name:
            return frozenset(), TOP
        raise ShapeError(f"type mismatch: {t1} vs {t2}")
    if isinstance(t1, Arrow) and isinstance(t2, Arrow):
        o1, f1 = subtype(t2.param, t1.param)
        o2, f2 = subtype(t1.result, t2.result)
        o3 = constraint_set((Constraint(t1.effect, t2.effect),))
        return o1 | o2 | o3, conj2(f1, f2)
    if isinstance(t1, ForallTyp) and isinstance(t2, ForallTyp):
        body2 = subst_type_vars({t2.binder: TVar(t1.binder)}, t2.body)
        return subtype(t1.body, body2)
    if isinstance(t1, ForallEff) and isinstance(t2, ForallEff):
        alpha = t1.binder
        body2 = subst_type({t2.binder: Effect.var(alpha)}, t2.body)
        omega, phi = subtype(t1.body, body2)
        # The quantified variable must not be constrained: project it out of
        # the constraints and demand the projection was already implied.
        projected = subst_constraints({alpha: PURE}, omega)
        return projected, conj2(phi, omega_to_formula(omega, alpha))
    raise ShapeError(f"shape mismatch: {t1} vs {t2}")


# ---------------------------------------------------------------------------
# Constraint normalization and separation
# ---------------------------------------------------------------------------


def normalize(omega) -> frozenset:
    """Split every constraint into single-guarded-atom-LHS constraints."""
    out = []
    for c in omega:
        for name, g in c.lhs.atoms:
            out.append(Constraint(Effect(((name, g),)), c.rhs))
    return constraint_set(out)


def separate(delta_g: frozenset, omega) -> tuple[frozenset, frozenset]:
    """Split normalized omega into (kept-in-scheme, propagated).

    Constraints bounding a variable of delta_g stay with the scheme; in the
    rest, delta_g variables on the right are zeroed out, since nothing may
    depend on a bound variable from outside its scheme.
    """
    erase_bound = {d: PURE for d in delta_g}
    kept, propagated = [], []
    for c in normalize(omega):
        name, _ = c.lhs.atoms[0]
        if name in delta_g:
            kept.append(c)
        else:
            propagated.append(Constraint(c.lhs,
                                         subst_effect(erase_bound, c.rhs)))
    return constraint_set(kept), constraint_set(propagated)


# ---------------------------------------------------------------------------
# Inference proper
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InferResult:
    props: tuple[Name, ...]
    gen: tuple[Name, ...]
    type: Type
    effect: Effect
    constraints: frozenset
    formula: Formula
    cert: Cert


@dataclass(frozen=True)
class Generalized:
    scheme: Scheme
    gen: tuple[Name, ...]        # variables that outlive the scheme
    props: tuple[Name, ...]      # propositions minted while generalizing
    omega_p: frozenset           # constraints propagated past the scheme
    formula: Formula             # extra conjuncts (constraint-free mode)
    theta: Mapping[Name, Effect]


def generalize(res: InferResult, supply: NameSupply,
               config: Config) -> Generalized:
    """Close res.type over its generated effect variables."""
    om = constraint_set(set(res.constraints) | {purity(res.effect)})
    if config.mode == "constrained":
        theta: dict[Name, Effect] = {}
        betas, gammas = [], []
        for a in res.gen:
            beta = supply.fresh(KIND_EFF)
            gamma = supply.fresh(KIND_EFF)
            betas.append(beta)
            gammas.append(gamma)
            theta[a] = join(Effect.var(beta), Effect.var(gamma))
        kept, propagated = separate(frozenset(gammas),
                                    subst_constraints(theta, om))
        scheme = Scheme(tuple(gammas), kept, subst_type(theta, res.type))
        return Generalized(scheme, tuple(betas), (), propagated, TOP, theta)

    # Constraint-free mode. With nothing generalized the substitution grid is
    # empty and minting would change nothing, so skip it.
    if not res.gen:
        return Generalized(Scheme((), frozenset(), res.type), (), (), om,
                           TOP, {})
    n = 2 ** arrow_count(res.type)
    if n > config.max_gen_vars:
        raise GenLimitError(
            f"constraint-free generalization wants {n} bound variables "
            f"(cap {config.max_gen_vars}); annotate the binding or use "
            f"constrained mode")
    gammas = [supply.fresh(KIND_EFF) for _ in range(n)]
    theta = {}
    betas = []
    grid_props: list[Name] = []
    for a in res.gen:
        beta = supply.fresh(KIND_EFF)
        betas.append(beta)
        parts = Effect.var(beta)
        for g in gammas:
            p = supply.fresh(KIND_PROP)
            grid_props.append(p)
            parts = join(parts, guard(Effect.var(g), Prop(p)))
        theta[a] = parts
    om1 = subst_constraints(theta, om)
    propagated = subst_constraints({g: PURE for g in gammas}, om1)
    extra = conj(omega_to_formula(om1, g) for g in gammas)
    scheme = Scheme(tuple(gammas), frozenset(), subst_type(theta, res.type))
    return Generalized(scheme, tuple(betas), tuple(grid_props), propagated,
                       extra, theta)


def infer(gamma: Mapping[Name, Scheme], expr: Expr, supply: NameSupply,
          config: Config | None = None) -> InferResult:
    """Reconstruct effects for expr under gamma.

    Returns the inferred type and effect together with the generated
    variables, propagated constraints, side formula and certificate. Raises
    InferError (ShapeError / GenLimitError) when no typing exists for
    structural reasons; unsatisfiable constraints are the caller's business.
    """
    config = config or Config()

    if isinstance(expr, Var):
        if expr.name not in gamma:
            raise InferError(f"unbound variable {expr.name}")
        scheme = gamma[expr.name]
        deltas = [supply.fresh(KIND_EFF) for _ in scheme.binders]
        theta = {b: Effect.var(d) for b, d in zip(scheme.binders, deltas)}
        return InferResult(
            props=(), gen=tuple(deltas),
            type=subst_type(theta, scheme.body), effect=PURE,
            constraints=subst_constraints(theta, scheme.constraints),
            formula=TOP,
            cert=CVar(tuple((b, theta[b]) for b in scheme.binders)))

    if isinstance(expr, Lam):
        props, gen, t1 = tr_type(expr.ann, supply)
        inner = dict(gamma)
        inner[expr.param] = mono(t1)
        r = infer(inner, expr.body, supply, config)
        return InferResult(
            props=props + r.props, gen=gen + r.gen,
            type=Arrow(t1, r.effect, r.type), effect=PURE,
            constraints=r.constraints, formula=r.formula,
            cert=CAbs(t1, r.cert))

    if isinstance(expr, App):
        r1 = infer(gamma, expr.fn, supply, config)
        r2 = infer(gamma, expr.arg, supply, config)
        if not isinstance(r1.type, Arrow):
            raise ShapeError(f"applied a non-function of type {r1.type}")
        arrow = r1.type
        o_sub, f_sub = subtype(r2.type, arrow.param)
        eff = join(r1.effect, r2.effect, arrow.effect)
        target = Arrow(arrow.param, eff, arrow.result)
        return InferResult(
            props=r1.props + r2.props, gen=r1.gen + r2.gen,
            type=arrow.result, effect=eff,
            constraints=r1.constraints | r2.constraints | o_sub,
            formula=conj2(r1.formula, conj2(r2.formula, f_sub)),
            cert=CApp(CSub(target, eff, r1.cert),
                      CSub(arrow.param, eff, r2.cert)))

    if isinstance(expr, Let):
        r1 = infer(gamma, expr.bound, supply, config)
        g = generalize(r1, supply, config)
        inner = dict(gamma)
        inner[expr.name] = g.scheme
        r2 = infer(inner, expr.body, supply, config)
        bound_cert = CSub(g.scheme.body, PURE, subst_cert(g.theta, r1.cert))
        return InferResult(
            props=r1.props + g.props + r2.props, gen=g.gen + r2.gen,
            type=r2.type, effect=r2.effect,
            constraints=g.omega_p | r2.constraints,
            formula=conj2(r1.formula, conj2(g.formula, r2.formula)),
            cert=CLet(g.scheme, bound_cert, r2.cert))

    if isinstance(expr, TLam):
        r = infer(gamma, expr.body, supply, config)
        return InferResult(
            props=r.props, gen=r.gen,
            type=ForallTyp(expr.binder, r.type), effect=PURE,
            constraints=constraint_set(set(r.constraints)
                                       | {purity(r.effect)}),
            formula=r.formula,
            cert=CTAbs(CSub(r.type, PURE, r.cert)))

    if isinstance(expr, ELam):
        r = infer(gamma, expr.body, supply, config)
        alpha = expr.binder
        om = constraint_set(set(r.constraints) | {purity(r.effect)})
        theta: dict[Name, Effect] = {}
        new_props, new_gen = [], []
        for beta in r.gen:
            p_b = supply.fresh(KIND_PROP)
            gamma_b = supply.fresh(KIND_EFF)
            new_props.append(p_b)
            new_gen.append(gamma_b)
            theta[beta] = join(Effect.var(gamma_b),
                               guard(Effect.var(alpha), Prop(p_b)))
        om1 = subst_constraints(theta, om)
        body_type = subst_type(theta, r.type)
        return InferResult(
            props=r.props + tuple(new_props), gen=tuple(new_gen),
            type=ForallEff(alpha, body_type), effect=PURE,
            constraints=subst_constraints({alpha: PURE}, om1),
            formula=conj2(r.formula, omega_to_formula(om1, alpha)),
            cert=CEAbs(CSub(body_type, PURE, subst_cert(theta, r.cert))))

    if isinstance(expr, TyApp):
        r = infer(gamma, expr.fn, supply, config)
        if not isinstance(r.type, ForallTyp):
            raise ShapeError(f"type application to a non-quantified type "
                             f"{r.type}")
        props, gen, t2 = tr_type(expr.arg, supply)
        return InferResult(
            props=r.props + props, gen=r.gen + gen,
            type=subst_type_vars({r.type.binder: t2}, r.type.body),
            effect=r.effect, constraints=r.constraints, formula=r.formula,
            cert=CTApp(r.cert, t2))

    if isinstance(expr, EfApp):
        r = infer(gamma, expr.fn, supply, config)
        if not isinstance(r.type, ForallEff):
            raise ShapeError(f"effect application to a non-quantified type "
                             f"{r.type}")
        gen, e2 = tr_effect(expr.arg, supply)
        return InferResult(
            props=r.props, gen=r.gen + gen,
            type=subst_type({r.type.binder: e2}, r.type.body),
            effect=r.effect, constraints=r.constraints, formula=r.formula,
            cert=CEApp(r.cert, e2))

    raise TypeError(f"not an expression: {expr!r}")
