"""Command line interface: `efl check FILE` and `efl repl`.

Exit codes: 0 = accepted, 1 = type/effect error (shape mismatch, an
unsatisfiable constraint system, or a certificate that fails verification),
2 = parse or scope error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .declarative import CertificateError
from .driver import (CheckOutcome, Discharger, check_program, display_scheme,
                     display_type_and_effect, prepare_definition,
                     prepare_expression, render_cert, verify_certificates,
                     wrapped_cert)
from .effects import Scheme, mono, sorted_constraints
from .formulas import conj2
from .inference import Config, InferError, infer, tr_type
from .names import Name, NameSupply
from .solver import SolverSession, sat, simplify_constraints
from .syntax import Parser, Scope, SourceError, parse_program


def build_arg_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="efl",
        description="Type-and-effect checker with effect inference, "
                    "effect guards and SAT-backed constraint discharge.")
    p.add_argument("--mode", choices=("constrained", "constraint-free"),
                   default="constrained",
                   help="let-generalization strategy (default: constrained)")
    sub = p.add_subparsers(dest="command", required=True)
    c = sub.add_parser("check", help="check a .efl file")
    c.add_argument("file", help="path to the source file")
    c.add_argument("--verify", action="store_true",
                   help="re-validate every certificate under the witness")
    c.add_argument("--dump-cert", action="store_true",
                   help="print each definition's typing certificate")
    c.add_argument("--dump-formula", action="store_true",
                   help="print the accumulated discharge formula")
    c.add_argument("--no-simplify", action="store_true",
                   help="report schemes without constraint simplification")
    sub.add_parser("repl", help="interactive session reading stdin")
    return p


def cmd_check(args: argparse.Namespace) -> int:
    try:
        src = Path(args.file).read_text()
    except OSError as ex:
        print(f"error: cannot read {args.file}: {ex}", file=sys.stderr)
        return 2
    supply = NameSupply()
    try:
        program = parse_program(src, supply)
    except SourceError as ex:
        print(f"error: {args.file}: {ex}", file=sys.stderr)
        return 2
    outcome = check_program(program, supply, Config(mode=args.mode),
                            display_simplify=not args.no_simplify)
    sys.stdout.write(outcome.stdout())
    if args.dump_formula:
        print(f"formula: {outcome.formula}")
    if args.dump_cert:
        for rec in outcome.records:
            print(f"cert {rec.name.text}: {render_cert(wrapped_cert(rec))}")
        if outcome.main is not None:
            print(f"cert it: {render_cert(outcome.main.cert)}")
    if outcome.error is not None:
        print(outcome.error, file=sys.stderr)
        return outcome.exit_code
    if args.verify:
        try:
            verify_certificates(outcome)
        except CertificateError as ex:
            print(f"error: certificate verification failed: {ex}",
                  file=sys.stderr)
            return 1
        print("certificates: verified")
    return 0


class Repl:
    """Interactive session; accepted inputs extend the environment, rejected
    ones leave it untouched."""

    def __init__(self, config: Config) -> None:
        self.config = config
        self.supply = NameSupply()
        self.scope = Scope()
        self.gamma: dict[Name, Scheme] = {}
        self.session = SolverSession()
        self.discharger = Discharger((), self.supply)
        self.omega = set()

    def handle(self, line: str) -> str | None:
        """Process one input line; returns the text to print (or None)."""
        line = line.strip()
        if not line:
            return None
        if line in (":quit", ":q"):
            raise EOFError
        if line == ":constraints":
            protected = frozenset(self.discharger.rigid)
            simplified = simplify_constraints(frozenset(self.omega),
                                              protected)
            if not simplified:
                return "(no constraints)"
            return "\n".join(str(c) for c in sorted_constraints(simplified))
        if line.startswith(":type"):
            rest = line[len(":type"):]
            return self._show_type(rest)
        if line.startswith(":"):
            return f"error: unknown command {line.split()[0]!r}"
        return self._handle_item(line)

    def _show_type(self, src: str) -> str:
        parser = Parser(src, self.supply, self.scope)
        try:
            expr = parser.parse_expr()
            parser.expect("eof", "end of input")
            res = infer(self.gamma, expr, self.supply, self.config)
        except SourceError as ex:
            return f"parse error: {ex}"
        except InferError as ex:
            return f"error: {ex}"
        phi = conj2(res.formula, self.discharger.formula_for(res.constraints))
        if sat(conj2(self.session.formula, phi)) is None:
            return "error: effect constraints unsatisfiable"
        return display_type_and_effect(res.type, res.effect)

    def _handle_item(self, line: str) -> str:
        parser = Parser(line, self.supply, self.scope)
        try:
            kind, name, payload = parser.parse_repl_item()
        except SourceError as ex:
            return f"parse error: {ex}"
        if kind == "effect":
            self.discharger.add_rigid(name)
            self.scope = parser.scope
            return f"effect {name.text}"
        if kind == "type":
            self.scope = parser.scope
            return f"type {name.text}"
        if kind == "extern":
            _, _, t = tr_type(payload, self.supply)
            self.gamma[name] = mono(t)
            self.scope = parser.scope
            return f"{name.text} : {t}"
        if kind == "def":
            try:
                rec, phi = prepare_definition(self.gamma, name, payload,
                                              self.supply, self.config,
                                              self.discharger)
            except InferError as ex:
                return f"error: {ex}"
            if not self.session.push(phi):
                return ("error: effect constraints unsatisfiable; "
                        "input rejected")
            self.gamma[name] = rec.gen.scheme
            self.omega |= rec.gen.omega_p
            self.scope = parser.scope
            return f"{name.text} : {display_scheme(rec.gen.scheme)}"
        # bare expression
        try:
            res, phi = prepare_expression(self.gamma, payload, self.supply,
                                          self.config, self.discharger)
        except InferError as ex:
            return f"error: {ex}"
        if not self.session.push(phi):
            return "error: effect constraints unsatisfiable; input rejected"
        self.omega |= res.constraints
        return "it : " + display_type_and_effect(res.type, res.effect)


def cmd_repl(args: argparse.Namespace) -> int:
    repl = Repl(Config(mode=args.mode))
    interactive = sys.stdin.isatty()
    while True:
        if interactive:
            sys.stdout.write("efl> ")
            sys.stdout.flush()
        line = sys.stdin.readline()
        if not line:
            break
        try:
            out = repl.handle(line)
        except EOFError:
            break
        if out is not None:
            print(out)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_arg_parser().parse_args(argv)
    if args.command == "check":
        return cmd_check(args)
    return cmd_repl(args)


if __name__ == "__main__":
    sys.exit(main())
