"""Declarative judgements under a fixed valuation, and certificate replay."""
import pytest

from efl.declarative import (CAbs, CApp, CertificateError, CLet, CSub, CVar,
                             cert_props, certificate_valid, check_certificate,
                             entails, match_effect, match_type,
                             subeffect_holds, subst_cert, subtype_holds,
                             types_equivalent)
from efl.effects import (PURE, Arrow, Effect, ForallEff, Scheme, TVar, join,
                         mono)
from efl.formulas import TOP, Valuation
from efl.names import KIND_EXPR, NameSupply
from efl.syntax import App, Lam, Scope, Var, parse_expr, parse_type
from helpers import Names, con

RHO0 = Valuation({})


def _scope(ns, effs=("IO", "DB", "a", "b"), typs=("Unit",)):
    scope = Scope()
    for t in effs:
        scope.eff[t] = ns.eff(t)
    for t in typs:
        scope.typ[t] = ns.typ(t)
    return scope


# -- annotation matching -----------------------------------------------------


def test_match_effect_exact_without_wildcard(ns, supply):
    scope = _scope(ns)
    ann = parse_type("Unit ->[IO] Unit", supply, scope).effect
    assert match_effect(ann, ns.ev("IO"), RHO0)
    assert not match_effect(ann, join(ns.ev("IO"), ns.ev("DB")), RHO0)
    assert not match_effect(ann, PURE, RHO0)


def test_match_effect_wildcard_absorbs_leftovers(ns, supply):
    scope = _scope(ns)
    ann = parse_type("Unit ->[IO \\/ _] Unit", supply, scope).effect
    assert match_effect(ann, ns.ev("IO"), RHO0)
    assert match_effect(ann, join(ns.ev("IO"), ns.ev("DB")), RHO0)
    assert not match_effect(ann, ns.ev("DB"), RHO0)  # IO is required
    bare = parse_type("Unit ->[_] Unit", supply, scope).effect
    assert match_effect(bare, PURE, RHO0)
    assert match_effect(bare, join(ns.ev("IO"), ns.ev("DB")), RHO0)


def test_match_effect_erases_guards_first(ns, supply):
    scope = _scope(ns)
    p = ns.prop("p")
    guarded = ns.atom("IO", ns.p("p"))
    named = parse_type("Unit ->[IO] Unit", supply, scope).effect
    assert match_effect(named, guarded, Valuation({p: True}))
    assert not match_effect(named, guarded, Valuation({p: False}))
    wild = parse_type("Unit ->[_] Unit", supply, scope).effect
    assert match_effect(wild, guarded, Valuation({p: False}))


def test_match_type_structure(ns, supply):
    scope = _scope(ns)
    u = TVar(ns.typ("Unit"))
    ann = parse_type("Unit ->[IO] Unit", supply, scope)
    assert match_type(ann, Arrow(u, ns.ev("IO"), u), RHO0)
    assert not match_type(ann, Arrow(u, PURE, u), RHO0)
    assert not match_type(ann, u, RHO0)


def test_match_type_renames_quantifier_binders(ns, supply):
    scope = _scope(ns)
    u = TVar(ns.typ("Unit"))
    ann = parse_type("forall eff e. Unit ->[e] Unit", supply, scope)
    other = ns.eff("fresh")
    t = ForallEff(other, Arrow(u, Effect.var(other), u))
    assert match_type(ann, t, RHO0)
    # binder positions matter: the body must use the bound variable
    t_wrong = ForallEff(other, Arrow(u, ns.ev("IO"), u))
    assert not match_type(ann, t_wrong, RHO0)


# -- subeffecting ------------------------------------------------------------


def test_subeffect_reflexive_and_join(ns):
    x, y = ns.ev("x"), ns.ev("y")
    assert subeffect_holds([], RHO0, x, x)
    assert subeffect_holds([], RHO0, PURE, x)
    assert subeffect_holds([], RHO0, x, join(x, y))
    assert not subeffect_holds([], RHO0, join(x, y), x)


def test_subeffect_uses_assumptions(ns):
    io, db = ns.ev("IO"), ns.ev("DB")
    omega = [con(io, db)]
    assert subeffect_holds(omega, RHO0, join(io, db), db)
    assert not subeffect_holds(omega, RHO0, db, io)


def test_subeffect_chains_transitively(ns):
    x, y, z = ns.ev("x"), ns.ev("y"), ns.ev("z")
    omega = [con(x, y), con(y, z)]
    assert subeffect_holds(omega, RHO0, x, z)
    assert not subeffect_holds(omega, RHO0, z, x)


def test_subeffect_rule_fires_only_when_rhs_covered(ns):
    x, y, z = ns.ev("x"), ns.ev("y"), ns.ev("z")
    # x <: z cannot help the goal x <: y because z is never covered
    assert not subeffect_holds([con(x, z)], RHO0, x, y)


def test_subeffect_respects_guards(ns):
    p = ns.prop("p")
    x, y = ns.ev("x"), ns.ev("y")
    omega = [con(ns.atom("x", ns.p("p")), y)]
    on = Valuation({p: True})
    off = Valuation({p: False})
    assert subeffect_holds(omega, on, x, y)
    assert not subeffect_holds(omega, off, x, y)
    # a guarded goal vanishes when its guard is false
    assert subeffect_holds([], off, ns.atom("x", ns.p("p")), PURE)
    assert not subeffect_holds([], on, ns.atom("x", ns.p("p")), PURE)


def test_entails(ns):
    x, y, z = ns.ev("x"), ns.ev("y"), ns.ev("z")
    omega = [con(x, y), con(y, z)]
    assert entails(omega, RHO0, [con(x, z), con(x, y)])
    assert not entails(omega, RHO0, [con(z, x)])


# -- subtyping ---------------------------------------------------------------


def test_subtype_contravariant_parameters(ns):
    u = TVar(ns.typ("Unit"))
    io, db = ns.ev("IO"), ns.ev("DB")
    wide = Arrow(Arrow(u, join(io, db), u), PURE, u)
    narrow = Arrow(Arrow(u, io, u), PURE, u)
    assert subtype_holds([], RHO0, wide, narrow)
    assert not subtype_holds([], RHO0, narrow, wide)


def test_subtype_covariant_results_and_effects(ns):
    u = TVar(ns.typ("Unit"))
    io, db = ns.ev("IO"), ns.ev("DB")
    assert subtype_holds([], RHO0, Arrow(u, io, u), Arrow(u, join(io, db), u))
    assert not subtype_holds([], RHO0, Arrow(u, join(io, db), u),
                             Arrow(u, io, u))


def test_subtype_renames_effect_binders(ns, supply):
    u = TVar(ns.typ("Unit"))
    a = supply.fresh("eff", "a")
    b = supply.fresh("eff", "b")
    t1 = ForallEff(a, Arrow(u, Effect.var(a), u))
    t2 = ForallEff(b, Arrow(u, Effect.var(b), u))
    assert subtype_holds([], RHO0, t1, t2)
    assert types_equivalent([], RHO0, t1, t2)


def test_types_equivalent_uses_assumptions(ns):
    u = TVar(ns.typ("Unit"))
    x, y = ns.ev("x"), ns.ev("y")
    omega = [con(x, y), con(y, x)]
    assert types_equivalent(omega, RHO0, Arrow(u, x, u), Arrow(u, y, u))
    assert not types_equivalent([], RHO0, Arrow(u, x, u), Arrow(u, y, u))


# -- certificates ------------------------------------------------------------


def _app_setup(ns, supply):
    """gamma with f : Unit ->[IO] Unit and x : Unit; expr `f x`."""
    u = TVar(ns.typ("Unit"))
    io = ns.ev("IO")
    f = supply.fresh(KIND_EXPR, "f")
    x = supply.fresh(KIND_EXPR, "x")
    gamma = {f: mono(Arrow(u, io, u)), x: mono(u)}
    expr = App(Var(f), Var(x))
    return u, io, gamma, expr


def test_certificate_application_replays(ns, supply):
    u, io, gamma, expr = _app_setup(ns, supply)
    cert = CApp(CSub(Arrow(u, io, u), io, CVar(())),
                CSub(u, io, CVar(())))
    t, e = check_certificate(frozenset(), RHO0, gamma, expr, cert)
    assert t == u and e == io
    assert certificate_valid(frozenset(), RHO0, gamma, expr, cert)


def test_certificate_application_requires_equal_effects(ns, supply):
    u, io, gamma, expr = _app_setup(ns, supply)
    # argument effect left pure: operand/operator/arrow effects must agree
    cert = CApp(CSub(Arrow(u, io, u), io, CVar(())), CVar(()))
    with pytest.raises(CertificateError) as exc:
        check_certificate(frozenset(), RHO0, gamma, expr, cert)
    assert exc.value.rule == "app"


def test_certificate_application_requires_exact_argument_type(ns, supply):
    u, io, gamma, expr = _app_setup(ns, supply)
    bad = CApp(CSub(Arrow(Arrow(u, PURE, u), io, u), io, CVar(())),
               CSub(Arrow(u, PURE, u), io, CVar(())))
    with pytest.raises(CertificateError) as exc:
        check_certificate(frozenset(), RHO0, gamma, expr, bad)
    assert exc.value.rule == "sub"  # the CSub retype of f is not a supertype


def test_certificate_sub_rejects_non_subeffect(ns, supply):
    u, io, gamma, expr = _app_setup(ns, supply)
    f = expr.fn.name
    shrunk = CSub(Arrow(u, io, u), PURE, CSub(Arrow(u, io, u), io, CVar(())))
    with pytest.raises(CertificateError) as exc:
        check_certificate(frozenset(), RHO0, gamma, Var(f), shrunk)
    assert exc.value.rule == "sub"
    assert "subeffect" in str(exc.value)


def test_certificate_shape_mismatch_names_the_rule(ns, supply):
    u, io, gamma, expr = _app_setup(ns, supply)
    with pytest.raises(CertificateError) as exc:
        check_certificate(frozenset(), RHO0, gamma, expr, CVar(()))
    assert exc.value.rule == "app"


def test_certificate_lambda_annotation_must_match(ns, supply):
    scope = _scope(ns)
    u = TVar(ns.typ("Unit"))
    expr = parse_expr("fn (x : Unit ->[IO] Unit) => x", supply, scope)
    good = CAbs(Arrow(u, ns.ev("IO"), u), CVar(()))
    t, e = check_certificate(frozenset(), RHO0, {}, expr, good)
    assert t == Arrow(Arrow(u, ns.ev("IO"), u), PURE,
                      Arrow(u, ns.ev("IO"), u))
    assert e == PURE
    bad = CAbs(u, CVar(()))
    with pytest.raises(CertificateError) as exc:
        check_certificate(frozenset(), RHO0, {}, expr, bad)
    assert exc.value.rule == "abs"


def test_certificate_var_instantiation_checks_constraints(ns, supply):
    u = TVar(ns.typ("Unit"))
    a = ns.eff("a")
    io, db = ns.ev("IO"), ns.ev("DB")
    w = supply.fresh(KIND_EXPR, "w")
    gamma = {w: Scheme((a,), frozenset({con(Effect.var(a), io)}),
                       Arrow(u, Effect.var(a), u))}
    good = CVar(((a, io),))
    t, _ = check_certificate(frozenset(), RHO0, gamma, Var(w), good)
    assert t == Arrow(u, io, u)
    with pytest.raises(CertificateError) as exc:
        check_certificate(frozenset(), RHO0, gamma, Var(w), CVar(((a, db),)))
    assert exc.value.rule == "var"
    with pytest.raises(CertificateError) as exc:
        check_certificate(frozenset(), RHO0, gamma, Var(w), CVar(()))
    assert "binders" in str(exc.value)


def test_certificate_let_scopes_scheme_constraints(ns, supply):
    scope = _scope(ns)
    u = TVar(ns.typ("Unit"))
    b = ns.eff("b")
    io = ns.ev("IO")
    k = supply.fresh(KIND_EXPR, "k")
    scope.expr["k"] = k
    gamma = {k: mono(Arrow(u, io, u))}
    expr = parse_expr("let w = k in w", supply, scope)
    scheme = Scheme((b,), frozenset({con(io, Effect.var(b))}),
                    Arrow(u, Effect.var(b), u))
    cert = CLet(scheme,
                CSub(Arrow(u, Effect.var(b), u), PURE, CVar(())),
                CVar(((b, io),)))
    t, e = check_certificate(frozenset(), RHO0, gamma, expr, cert)
    assert t == Arrow(u, io, u) and e == PURE
    # without the scheme constraint in scope, the bound retype is invalid
    bare = CLet(Scheme((b,), frozenset(), Arrow(u, Effect.var(b), u)),
                CSub(Arrow(u, Effect.var(b), u), PURE, CVar(())),
                CVar(((b, io),)))
    with pytest.raises(CertificateError) as exc:
        check_certificate(frozenset(), RHO0, gamma, expr, bare)
    assert exc.value.rule == "sub"


def test_subst_cert_rewrites_annotations(ns):
    u = TVar(ns.typ("Unit"))
    a, b = ns.eff("a"), ns.eff("b")
    cert = CSub(Arrow(u, Effect.var(a), u), Effect.var(a), CVar(()))
    got = subst_cert({a: Effect.var(b)}, cert)
    assert got == CSub(Arrow(u, Effect.var(b), u), Effect.var(b), CVar(()))


def test_cert_props_collects_guard_propositions(ns):
    u = TVar(ns.typ("Unit"))
    cert = CSub(Arrow(u, ns.atom("a", ns.p("p")), u),
                ns.atom("b", ns.p("q")), CVar(()))
    assert cert_props(cert) == {ns.prop("p"), ns.prop("q")}
