"""The declarative side: matching, subeffecting, subtyping, certificates.

Everything here is indexed by a valuation rho for the guard propositions: an
answer is relative to one choice of guards. Subeffecting under a constraint
set is decided by a closure procedure; `oracles.derivation_search_subeffect`
is the independent bounded proof search it is validated against.

A Certificate records the rule applied at every node of a typing derivation.
`check_certificate` replays it bottom-up against the expression and recomputes
each judgement; it trusts nothing from inference beyond the certificate.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .effects import (PURE, Arrow, Constraint, Effect, ForallEff, ForallTyp,
                      Scheme, TVar, Type, constraints_props, effect_props,
                      erase_guards, scheme_props, subst_constraints,
                      subst_effect, subst_type, subst_type_vars, type_props)
from .formulas import Valuation
from .names import Name
from .syntax import (App, EfApp, ELam, Expr, Lam, Let, SArrow, SEJoin, SEPure,
                     SEVar, SEWild, SForallEff, SForallTyp, STVar, SynEffect,
                     SynType, TLam, TyApp, Var)

# ---------------------------------------------------------------------------
# Matching surface annotations against internal types/effects
# ---------------------------------------------------------------------------


def _effect_parts(se: SynEffect) -> tuple[set[Name], bool]:
    """Named variables of a surface effect and whether it has a wildcard."""
    if isinstance(se, SEVar):
        return {se.name}, False
    if isinstance(se, SEPure):
        return set(), False
    if isinstance(se, SEWild):
        return set(), True
    if isinstance(se, SEJoin):
        l, wl = _effect_parts(se.lhs)
        r, wr = _effect_parts(se.rhs)
        return l | r, wl or wr
    raise TypeError(f"not a surface effect: {se!r}")


def match_effect(se: SynEffect, eff: Effect, rho: Valuation) -> bool:
    """Does the annotation se describe eff under rho?

    A wildcard component absorbs any leftover atoms; without one the named
    variables must be exactly the atoms of eff (after guard erasure).
    """
    named, wild = _effect_parts(se)
    atoms = erase_guards(eff, rho).atom_names()
    if wild:
        return named <= atoms
    return named == atoms


def match_type(st: SynType, t: Type, rho: Valuation) -> bool:
    """Does the annotation st describe the internal type t under rho?"""
    if isinstance(st, STVar):
        return isinstance(t, TVar) and t.name == st.name
    if isinstance(st, SArrow):
        return (isinstance(t, Arrow)
                and match_type(st.param, t.param, rho)
                and match_effect(st.effect, t.effect, rho)
                and match_type(st.result, t.result, rho))
    if isinstance(st, SForallTyp):
        if not isinstance(t, ForallTyp):
            return False
        body = subst_type_vars({t.binder: TVar(st.binder)}, t.body)
        return match_type(st.body, body, rho)
    if isinstance(st, SForallEff):
        if not isinstance(t, ForallEff):
            return False
        body = subst_type({t.binder: Effect.var(st.binder)}, t.body)
        return match_type(st.body, body, rho)
    raise TypeError(f"not a surface type: {st!r}")


# ---------------------------------------------------------------------------
# Subeffecting / entailment / subtyping under a valuation
# ---------------------------------------------------------------------------


def subeffect_holds(omega: Iterable[Constraint], rho: Valuation,
                    e1: Effect, e2: Effect) -> bool:
    """Decide omega |- e1 <= e2 under rho.

    After erasing guards everything is a set of atoms. Starting from the
    atoms of e2, repeatedly fire assumptions l <= r whose erased RHS is
    already covered to also cover their erased LHS; e1 must end up covered.
    Each closure step is justified by assumption + join + transitivity, and
    every declarative rule preserves coveredness, so this is exactly the
    subeffect relation.
    """
    goal = erase_guards(e1, rho).atom_names()
    covered = set(erase_guards(e2, rho).atom_names())
    rules = [(erase_guards(c.lhs, rho).atom_names(),
              erase_guards(c.rhs, rho).atom_names()) for c in omega]
    changed = True
    while changed:
        changed = False
        for lhs, rhs in rules:
            if rhs <= covered and not lhs <= covered:
                covered |= lhs
                changed = True
    return goal <= covered


def entails(omega: Iterable[Constraint], rho: Valuation,
            omega2: Iterable[Constraint]) -> bool:
    """omega |- every constraint of omega2, under rho."""
    return all(subeffect_holds(omega, rho, c.lhs, c.rhs) for c in omega2)


def subtype_holds(omega: Iterable[Constraint], rho: Valuation,
                  t1: Type, t2: Type) -> bool:
    """Structural subtyping: covariant results, contravariant parameters,
    subeffecting on arrows, congruence under quantifiers."""
    if isinstance(t1, TVar):
        return isinstance(t2, TVar) and t1.name == t2.name
    if isinstance(t1, Arrow):
        return (isinstance(t2, Arrow)
                and subtype_holds(omega, rho, t2.param, t1.param)
                and subeffect_holds(omega, rho, t1.effect, t2.effect)
                and subtype_holds(omega, rho, t1.result, t2.result))
    if isinstance(t1, ForallTyp):
        if not isinstance(t2, ForallTyp):
            return False
        body2 = subst_type_vars({t2.binder: TVar(t1.binder)}, t2.body)
        return subtype_holds(omega, rho, t1.body, body2)
    if isinstance(t1, ForallEff):
        if not isinstance(t2, ForallEff):
            return False
        body2 = subst_type({t2.binder: Effect.var(t1.binder)}, t2.body)
        return subtype_holds(omega, rho, t1.body, body2)
    raise TypeError(f"not a type: {t1!r}")


def types_equivalent(omega: Iterable[Constraint], rho: Valuation,
                     t1: Type, t2: Type) -> bool:
    return (subtype_holds(omega, rho, t1, t2)
            and subtype_holds(omega, rho, t2, t1))


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------


class Cert:
    __slots__ = ()


@dataclass(frozen=True)
class CVar(Cert):
    """Variable lookup; theta instantiates the scheme's bound variables."""

    theta: tuple[tuple[Name, Effect], ...]


@dataclass(frozen=True)
class CAbs(Cert):
    param_type: Type
    body: Cert


@dataclass(frozen=True)
class CApp(Cert):
    fn: Cert
    arg: Cert


@dataclass(frozen=True)
class CTAbs(Cert):
    body: Cert


@dataclass(frozen=True)
class CEAbs(Cert):
    body: Cert


@dataclass(frozen=True)
class CTApp(Cert):
    fn: Cert
    arg: Type


@dataclass(frozen=True)
class CEApp(Cert):
    fn: Cert
    arg: Effect


@dataclass(frozen=True)
class CLet(Cert):
    scheme: Scheme
    bound: Cert
    body: Cert


@dataclass(frozen=True)
class CSub(Cert):
    """Weakening to the recorded type and effect."""

    typ: Type
    effect: Effect
    inner: Cert


class CertificateError(Exception):
    def __init__(self, rule: str, msg: str) -> None:
        super().__init__(f"{rule}: {msg}")
        self.rule = rule


def subst_cert(theta: Mapping[Name, Effect], cert: Cert) -> Cert:
    """Apply an effect substitution to every annotation stored in cert."""
    if isinstance(cert, CVar):
        return CVar(tuple((n, subst_effect(theta, e)) for n, e in cert.theta))
    if isinstance(cert, CAbs):
        return CAbs(subst_type(theta, cert.param_type),
                    subst_cert(theta, cert.body))
    if isinstance(cert, CApp):
        return CApp(subst_cert(theta, cert.fn), subst_cert(theta, cert.arg))
    if isinstance(cert, CTAbs):
        return CTAbs(subst_cert(theta, cert.body))
    if isinstance(cert, CEAbs):
        return CEAbs(subst_cert(theta, cert.body))
    if isinstance(cert, CTApp):
        return CTApp(subst_cert(theta, cert.fn), subst_type(theta, cert.arg))
    if isinstance(cert, CEApp):
        return CEApp(subst_cert(theta, cert.fn),
                     subst_effect(theta, cert.arg))
    if isinstance(cert, CLet):
        from .effects import subst_scheme
        return CLet(subst_scheme(theta, cert.scheme),
                    subst_cert(theta, cert.bound),
                    subst_cert(theta, cert.body))
    if isinstance(cert, CSub):
        return CSub(subst_type(theta, cert.typ),
                    subst_effect(theta, cert.effect),
                    subst_cert(theta, cert.inner))
    raise TypeError(f"not a certificate: {cert!r}")


def cert_props(cert: Cert) -> frozenset[Name]:
    """Guard propositions mentioned anywhere in the certificate."""
    if isinstance(cert, CVar):
        out: frozenset[Name] = frozenset()
        for _, e in cert.theta:
            out |= effect_props(e)
        return out
    if isinstance(cert, CAbs):
        return type_props(cert.param_type) | cert_props(cert.body)
    if isinstance(cert, CApp):
        return cert_props(cert.fn) | cert_props(cert.arg)
    if isinstance(cert, (CTAbs, CEAbs)):
        return cert_props(cert.body)
    if isinstance(cert, CTApp):
        return cert_props(cert.fn) | type_props(cert.arg)
    if isinstance(cert, CEApp):
        return cert_props(cert.fn) | effect_props(cert.arg)
    if isinstance(cert, CLet):
        return (scheme_props(cert.scheme) | cert_props(cert.bound)
                | cert_props(cert.body))
    if isinstance(cert, CSub):
        return (type_props(cert.typ) | effect_props(cert.effect)
                | cert_props(cert.inner))
    raise TypeError(f"not a certificate: {cert!r}")


def check_certificate(omega: frozenset, rho: Valuation,
                      gamma: Mapping[Name, Scheme], expr: Expr,
                      cert: Cert) -> tuple[Type, Effect]:
    """Replay the derivation; return the judgement it proves.

    Raises CertificateError naming the first failing rule. The caller must
    supply a rho covering every guard proposition in omega, gamma and cert.
    """
    if isinstance(cert, CSub):
        t_in, e_in = check_certificate(omega, rho, gamma, expr, cert.inner)
        if not subtype_holds(omega, rho, t_in, cert.typ):
            raise CertificateError("sub", f"{t_in} is not a subtype of "
                                          f"{cert.typ}")
        if not subeffect_holds(omega, rho, e_in, cert.effect):
            raise CertificateError("sub", f"[{e_in}] is not a subeffect of "
                                          f"[{cert.effect}]")
        return cert.typ, cert.effect

    if isinstance(expr, Var):
        if not isinstance(cert, CVar):
            raise CertificateError("var", "certificate shape mismatch")
        if expr.name not in gamma:
            raise CertificateError("var", f"unbound variable {expr.name}")
        scheme = gamma[expr.name]
        theta = dict(cert.theta)
        if set(theta) != set(scheme.binders):
            raise CertificateError("var", "instantiation does not cover the "
                                          "scheme's binders")
        inst = subst_constraints(theta, scheme.constraints)
        if not entails(omega, rho, inst):
            raise CertificateError("var", "instantiated scheme constraints "
                                          "not entailed")
        return subst_type(theta, scheme.body), PURE

    if isinstance(expr, Lam):
        if not isinstance(cert, CAbs):
            raise CertificateError("abs", "certificate shape mismatch")
        if not match_type(expr.ann, cert.param_type, rho):
            raise CertificateError("abs", f"annotation {expr.ann} does not "
                                          f"match {cert.param_type}")
        inner = dict(gamma)
        inner[expr.param] = Scheme((), frozenset(), cert.param_type)
        t_body, e_body = check_certificate(omega, rho, inner, expr.body,
                                           cert.body)
        return Arrow(cert.param_type, e_body, t_body), PURE

    if isinstance(expr, App):
        if not isinstance(cert, CApp):
            raise CertificateError("app", "certificate shape mismatch")
        t_fn, e_fn = check_certificate(omega, rho, gamma, expr.fn, cert.fn)
        t_arg, e_arg = check_certificate(omega, rho, gamma, expr.arg,
                                         cert.arg)
        if not isinstance(t_fn, Arrow):
            raise CertificateError("app", f"applied a non-function: {t_fn}")
        if t_fn.param != t_arg:
            raise CertificateError("app", f"argument type {t_arg} is not "
                                          f"exactly {t_fn.param}")
        if not (e_fn == e_arg == t_fn.effect):
            raise CertificateError("app", "operand, operator and arrow "
                                          "effects differ")
        return t_fn.result, t_fn.effect

    if isinstance(expr, Let):
        if not isinstance(cert, CLet):
            raise CertificateError("let", "certificate shape mismatch")
        scheme = cert.scheme
        omega_inner = frozenset(omega) | scheme.constraints
        t1, e1 = check_certificate(omega_inner, rho, gamma, expr.bound,
                                   cert.bound)
        if t1 != scheme.body:
            raise CertificateError("let", f"bound type {t1} is not the "
                                          f"scheme body {scheme.body}")
        if not e1.is_pure():
            raise CertificateError("let", "bound expression is not pure")
        inner = dict(gamma)
        inner[expr.name] = scheme
        return check_certificate(omega, rho, inner, expr.body, cert.body)

    if isinstance(expr, TLam):
        if not isinstance(cert, CTAbs):
            raise CertificateError("tabs", "certificate shape mismatch")
        t_body, e_body = check_certificate(omega, rho, gamma, expr.body,
                                           cert.body)
        if not e_body.is_pure():
            raise CertificateError("tabs", "body is not pure")
        return ForallTyp(expr.binder, t_body), PURE

    if isinstance(expr, ELam):
        if not isinstance(cert, CEAbs):
            raise CertificateError("eabs", "certificate shape mismatch")
        t_body, e_body = check_certificate(omega, rho, gamma, expr.body,
                                           cert.body)
        if not e_body.is_pure():
            raise CertificateError("eabs", "body is not pure")
        return ForallEff(expr.binder, t_body), PURE

    if isinstance(expr, TyApp):
        if not isinstance(cert, CTApp):
            raise CertificateError("tapp", "certificate shape mismatch")
        t_fn, e_fn = check_certificate(omega, rho, gamma, expr.fn, cert.fn)
        if not isinstance(t_fn, ForallTyp):
            raise CertificateError("tapp", f"type-applied a non-forall: "
                                           f"{t_fn}")
        if not match_type(expr.arg, cert.arg, rho):
            raise CertificateError("tapp", f"annotation {expr.arg} does not "
                                           f"match {cert.arg}")
        return subst_type_vars({t_fn.binder: cert.arg}, t_fn.body), e_fn

    if isinstance(expr, EfApp):
        if not isinstance(cert, CEApp):
            raise CertificateError("eapp", "certificate shape mismatch")
        t_fn, e_fn = check_certificate(omega, rho, gamma, expr.fn, cert.fn)
        if not isinstance(t_fn, ForallEff):
            raise CertificateError("eapp", f"effect-applied a non-forall: "
                                           f"{t_fn}")
        if not match_effect(expr.arg, cert.arg, rho):
            raise CertificateError("eapp", f"annotation {expr.arg} does not "
                                           f"match [{cert.arg}]")
        return subst_type({t_fn.binder: cert.arg}, t_fn.body), e_fn

    raise CertificateError("shape", f"no rule for {type(expr).__name__} "
                                    f"against {type(cert).__name__}")


def certificate_valid(omega: frozenset, rho: Valuation,
                      gamma: Mapping[Name, Scheme], expr: Expr,
                      cert: Cert) -> bool:
    try:
        check_certificate(omega, rho, gamma, expr, cert)
        return True
    except CertificateError:
        return False
