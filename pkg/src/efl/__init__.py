"""efl: a type-and-effect checker with inferred, guarded, set-like effects.

Types are explicit; effects are reconstructed. Schemes quantify over effect
variables, guards condition an effect's presence on propositions, and the
residual proposition formula is discharged by a small SAT solver. Every
accepted program comes with a typing certificate that replays against the
declarative rules under the solver's witness valuation.
"""
from .declarative import (Cert, CertificateError, certificate_valid,
                          check_certificate, entails, match_effect,
                          match_type, subeffect_holds, subtype_holds)
from .driver import (CheckOutcome, Discharger, check_program, display_scheme,
                     verify_certificates)
from .effects import (PURE, Arrow, Constraint, Effect, ForallEff, ForallTyp,
                      Scheme, TVar, Type, effects_equal, erase_guards, guard,
                      join, omega_to_formula, to_formula)
from .formulas import (BOT, TOP, Formula, Prop, Valuation, evaluate,
                       formulas_equivalent)
from .inference import (Config, GenLimitError, InferError, InferResult,
                        ShapeError, generalize, infer, normalize, separate,
                        subtype, tr_effect, tr_type)
from .names import Name, NameSupply
from .solver import (SolverSession, discharge_toplevel, sat,
                     simplify_constraints)
from .syntax import Program, SourceError, parse_expr, parse_program

__version__ = "0.1.0"

__all__ = [
    "Arrow", "BOT", "Cert", "CertificateError", "CheckOutcome", "Config",
    "Constraint", "Discharger", "Effect", "ForallEff", "ForallTyp", "Formula",
    "GenLimitError", "InferError", "InferResult", "Name", "NameSupply",
    "PURE", "Program", "Prop", "PURE", "Scheme", "ShapeError",
    "SolverSession", "SourceError", "TOP", "TVar", "Type", "Valuation",
    "certificate_valid", "check_certificate", "check_program",
    "discharge_toplevel", "display_scheme", "effects_equal", "entails",
    "erase_guards", "evaluate", "formulas_equivalent", "generalize", "guard",
    "infer", "join", "match_effect", "match_type", "normalize",
    "omega_to_formula", "parse_expr", "parse_program", "sat", "separate",
    "simplify_constraints", "subeffect_holds", "subtype", "subtype_holds",
    "to_formula", "tr_effect", "tr_type", "verify_certificates",
]
