"""Whole-program checking: the pipeline behind `efl check` and the REPL.

Definitions are inferred in order, each one generalized like a let binding,
its propagated constraints discharged over the declared effect constants and
pushed into an incremental SAT session. Effect variables that escape to the
top level (instantiation variables of earlier definitions) are eliminated
before discharge: each one is re-expressed as a guarded join over the rigid
constants with fresh persistent "membership" propositions, so the solver gets
to pick which constants the variable stands for. On success the session's
model is the witness valuation under which every emitted certificate must
replay.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .declarative import (CAbs, CApp, CEAbs, CEApp, CLet, CSub, CTAbs, CTApp,
                          CVar, Cert, CertificateError, cert_props,
                          check_certificate, subst_cert)
from .effects import (PURE, Arrow, Constraint, Effect, ForallEff, ForallTyp,
                      Scheme, TVar, Type, constraint_set, constraints_props,
                      effect_props, free_eff_vars_constraints,
                      free_eff_vars_scheme, free_eff_vars_type, join, mono,
                      scheme_props, sorted_constraints, subst_constraints,
                      subst_scheme, type_props)
from .formulas import TOP, Formula, Prop, Valuation, conj2, props
from .inference import (Config, Generalized, InferError, InferResult,
                        generalize, infer, tr_type)
from .names import KIND_EFF, KIND_PROP, Name, NameSupply
from .solver import SolverSession, discharge_toplevel, simplify_constraints
from .syntax import Expr, Program


class Discharger:
    """Eliminates surviving effect variables and discharges constraint sets.

    Membership propositions are persistent: the same (variable, constant)
    pair always maps to the same proposition, so constraints pushed across
    several definitions agree on what the shared survivors mean.
    """

    def __init__(self, rigid: tuple[Name, ...], supply: NameSupply) -> None:
        self.rigid = tuple(sorted(set(rigid), key=Name.key))
        self.supply = supply
        self._member: dict[tuple[Name, Name], Name] = {}

    def add_rigid(self, name: Name) -> None:
        """Admit a new constant (REPL use). Formulas already pushed keep the
        elimination they were given; only later discharges see the newcomer."""
        self.rigid = tuple(sorted(set(self.rigid) | {name}, key=Name.key))

    def membership(self, var: Name, const: Name) -> Name:
        key = (var, const)
        if key not in self._member:
            self._member[key] = self.supply.fresh(
                KIND_PROP, f"m_{var.text}_{const.text}")
        return self._member[key]

    def memberships(self) -> list[Name]:
        return [self._member[k] for k in sorted(self._member,
                                                key=lambda k: (k[0].key(),
                                                               k[1].key()))]

    def eliminate_effect(self, e: Effect) -> Effect:
        rigid = set(self.rigid)
        out = PURE
        for v, g in e.atoms:
            if v in rigid:
                out = join(out, Effect(((v, g),)))
            else:
                for c in self.rigid:
                    atom = Effect(((c, conj2(g, Prop(self.membership(v, c)))),))
                    out = join(out, atom)
        return out

    def eliminate(self, omega) -> frozenset:
        return constraint_set(
            Constraint(self.eliminate_effect(c.lhs),
                       self.eliminate_effect(c.rhs))
            for c in sorted_constraints(omega))

    def formula_for(self, omega) -> Formula:
        """Discharge omega over the rigid constants, survivors eliminated."""
        return discharge_toplevel(self.rigid, self.eliminate(omega))


# ---------------------------------------------------------------------------
# Display helpers
# ---------------------------------------------------------------------------


def _names_in_effect(e: Effect) -> set[Name]:
    out = set()
    for v, g in e.atoms:
        out.add(v)
        out |= props(g)
    return out


def _names_in_type(t: Type) -> set[Name]:
    if isinstance(t, TVar):
        return {t.name}
    if isinstance(t, Arrow):
        return (_names_in_type(t.param) | _names_in_effect(t.effect)
                | _names_in_type(t.result))
    if isinstance(t, (ForallTyp, ForallEff)):
        return {t.binder} | _names_in_type(t.body)
    raise TypeError(f"not a type: {t!r}")


def _display_letters() -> itertools.chain:
    alphabet = "abcdefghijklmnopqrstuvwxyz"
    return itertools.chain(alphabet,
                           (f"{c}{i}" for i in itertools.count(1)
                            for c in alphabet))


def display_scheme(s: Scheme, simplify: bool = True) -> str:
    """Human form: constraints simplified, binders renamed a, b, c, ..."""
    if simplify:
        omega = simplify_constraints(s.constraints,
                                     frozenset(free_eff_vars_type(s.body)))
        binders = [b for b in s.binders
                   if b in free_eff_vars_type(s.body)
                   or b in free_eff_vars_constraints(omega)]
    else:
        omega = s.constraints
        binders = list(s.binders)
    used = _names_in_type(s.body) | frozenset().union(
        *[_names_in_effect(c.lhs) | _names_in_effect(c.rhs) for c in omega],
        frozenset())
    used_texts = {n.text for n in used}
    rename: dict[Name, Effect] = {}
    letters = _display_letters()
    fresh_uid = itertools.count(10 ** 9)
    for b in binders:
        text = next(t for t in letters if t not in used_texts)
        used_texts.add(text)
        rename[b] = Effect.var(Name(text, KIND_EFF, next(fresh_uid)))
    shown = subst_scheme(rename, Scheme(tuple(rename[b].atoms[0][0]
                                              for b in binders), omega,
                                        s.body))
    return str(shown)


def display_type_and_effect(t: Type, e: Effect) -> str:
    eff = "" if e.is_pure() else str(e)
    return f"{t} @ [{eff}]"


def render_cert(c: Cert) -> str:
    """Deterministic s-expression form of a certificate (for --dump-cert)."""
    if isinstance(c, CVar):
        inst = ", ".join(f"{n.text} := {e}" for n, e in c.theta)
        return f"(var {{{inst}}})"
    if isinstance(c, CAbs):
        return f"(abs {c.param_type} {render_cert(c.body)})"
    if isinstance(c, CApp):
        return f"(app {render_cert(c.fn)} {render_cert(c.arg)})"
    if isinstance(c, CTAbs):
        return f"(tabs {render_cert(c.body)})"
    if isinstance(c, CEAbs):
        return f"(eabs {render_cert(c.body)})"
    if isinstance(c, CTApp):
        return f"(tapp {render_cert(c.fn)} {c.arg})"
    if isinstance(c, CEApp):
        return f"(eapp {render_cert(c.fn)} [{c.arg}])"
    if isinstance(c, CLet):
        return (f"(let {c.scheme} {render_cert(c.bound)} "
                f"{render_cert(c.body)})")
    if isinstance(c, CSub):
        return f"(sub {c.typ} [{c.effect}] {render_cert(c.inner)})"
    raise TypeError(f"not a certificate: {c!r}")


# ---------------------------------------------------------------------------
# Whole-program checking
# ---------------------------------------------------------------------------


@dataclass
class DefRecord:
    name: Name
    expr: Expr
    gamma_before: dict
    res: InferResult
    gen: Generalized


@dataclass
class CheckOutcome:
    status: str  # "ok" | "unsat" | "infer-error"
    stdout_lines: list[str]
    error: str | None
    exit_code: int
    rigid: tuple[Name, ...] = ()
    gamma: dict = field(default_factory=dict)
    defs: list = field(default_factory=list)
    omega: frozenset = frozenset()
    formula: Formula = TOP
    witness: Valuation | None = None
    records: list = field(default_factory=list)
    main: InferResult | None = None
    main_expr: Expr | None = None
    main_gamma: dict = field(default_factory=dict)
    discharger: Discharger | None = None

    def stdout(self) -> str:
        return "".join(line + "\n" for line in self.stdout_lines)


def prepare_definition(gamma: dict, name: Name, expr: Expr,
                       supply: NameSupply, config: Config,
                       discharger: Discharger) -> tuple[DefRecord, Formula]:
    """Infer + generalize one definition; the returned formula is what must
    be pushed for it to be accepted. Raises InferError."""
    res = infer(gamma, expr, supply, config)
    gen = generalize(res, supply, config)
    phi = conj2(res.formula,
                conj2(gen.formula, discharger.formula_for(gen.omega_p)))
    return DefRecord(name, expr, dict(gamma), res, gen), phi


def prepare_expression(gamma: dict, expr: Expr, supply: NameSupply,
                       config: Config,
                       discharger: Discharger) -> tuple[InferResult, Formula]:
    """Infer a top-level expression (no generalization, effects allowed)."""
    res = infer(gamma, expr, supply, config)
    phi = conj2(res.formula, discharger.formula_for(res.constraints))
    return res, phi


def check_program(program: Program, supply: NameSupply,
                  config: Config | None = None,
                  display_simplify: bool = True) -> CheckOutcome:
    """Infer, generalize, discharge and report every definition in order."""
    config = config or Config()
    rigid = tuple(program.effects)
    discharger = Discharger(rigid, supply)
    session = SolverSession()
    gamma: dict[Name, Scheme] = {}
    lines: list[str] = []
    defs: list[tuple[Name, Scheme]] = []
    records: list[DefRecord] = []
    omega_acc: set[Constraint] = set()

    def failure(status: str, message: str, code: int) -> CheckOutcome:
        return CheckOutcome(status, lines, message, code, rigid=rigid,
                            gamma=gamma, defs=defs,
                            omega=frozenset(omega_acc),
                            formula=session.formula, witness=None,
                            records=records, discharger=discharger)

    for name, st in program.externs:
        _, _, t = tr_type(st, supply)
        gamma[name] = mono(t)

    for name, expr in program.defs:
        try:
            rec, phi = prepare_definition(gamma, name, expr, supply, config,
                                          discharger)
        except InferError as ex:
            return failure("infer-error",
                           f"error: in definition '{name.text}': {ex}", 1)
        if not session.push(phi):
            return failure(
                "unsat",
                f"error: effect constraints unsatisfiable at definition "
                f"'{name.text}'", 1)
        omega_acc |= rec.gen.omega_p
        gamma[name] = rec.gen.scheme
        defs.append((name, rec.gen.scheme))
        records.append(rec)
        lines.append(f"{name.text} : "
                     f"{display_scheme(rec.gen.scheme, display_simplify)}")

    main_res: InferResult | None = None
    main_gamma = dict(gamma)
    if program.main is not None:
        try:
            main_res, phi = prepare_expression(gamma, program.main, supply,
                                               config, discharger)
        except InferError as ex:
            return failure("infer-error",
                           f"error: in final expression: {ex}", 1)
        if not session.push(phi):
            return failure("unsat",
                           "error: effect constraints unsatisfiable in the "
                           "final expression", 1)
        omega_acc |= main_res.constraints
        lines.append("it : " + display_type_and_effect(main_res.type,
                                                       main_res.effect))

    witness = session.model()
    assert witness is not None  # every push above was satisfiable
    return CheckOutcome("ok", lines, None, 0, rigid=rigid, gamma=gamma,
                        defs=defs, omega=frozenset(omega_acc),
                        formula=session.formula, witness=witness,
                        records=records, main=main_res,
                        main_expr=program.main, main_gamma=main_gamma,
                        discharger=discharger)


def total_valuation(outcome: CheckOutcome) -> Valuation:
    """The witness extended (default false) over every relevant proposition."""
    all_props: set[Name] = set(props(outcome.formula))
    all_props |= constraints_props(outcome.omega)
    for rec in outcome.records:
        all_props |= cert_props(wrapped_cert(rec))
        all_props |= scheme_props(rec.gen.scheme)
    if outcome.main is not None:
        all_props |= cert_props(outcome.main.cert)
    base = outcome.witness if outcome.witness is not None else Valuation({})
    return base.defaulted(sorted(all_props, key=Name.key))


def wrapped_cert(rec: DefRecord) -> Cert:
    """The definition's certificate as used at top level: substituted by the
    generalization and weakened to (scheme body, pure)."""
    return CSub(rec.gen.scheme.body, PURE,
                subst_cert(rec.gen.theta, rec.res.cert))


def verify_certificates(outcome: CheckOutcome) -> None:
    """Replay every certificate under the witness; CertificateError on any
    mismatch. Only meaningful for an "ok" outcome."""
    rho = total_valuation(outcome)
    omega = outcome.omega
    for rec in outcome.records:
        scheme = rec.gen.scheme
        t, e = check_certificate(omega | scheme.constraints, rho,
                                 rec.gamma_before, rec.expr,
                                 wrapped_cert(rec))
        if t != scheme.body or not e.is_pure():
            raise CertificateError(
                "toplevel", f"definition '{rec.name.text}' derived {t} @ "
                            f"[{e}], expected its scheme body, pure")
    if outcome.main is not None:
        t, e = check_certificate(omega, rho, outcome.main_gamma,
                                 outcome.main_expr, outcome.main.cert)
        if t != outcome.main.type or e != outcome.main.effect:
            raise CertificateError(
                "toplevel", "final expression's certificate derives a "
                            "different judgement than reported")
