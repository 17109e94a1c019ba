"""Surface syntax: lexer, parser, and scope resolution for .efl sources.

A program is a prelude of declarations (`effect N`, `type N`,
`extern f : S`) followed by definitions (`let x = e`) and at most one final
expression. A top-level `let` with an `in` clause is the final expression.

The parser resolves every identifier occurrence to the globally unique Name
minted for its binder, so later passes never deal with strings. Parse and
scope errors carry source positions and map to exit code 2 in the CLI.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .names import KIND_EFF, KIND_EXPR, KIND_TYPE, Name, NameSupply


class SourceError(Exception):
    """A parse or scope error with a source position."""

    def __init__(self, msg: str, line: int, col: int) -> None:
        super().__init__(f"line {line}, col {col}: {msg}")
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# Surface AST
# ---------------------------------------------------------------------------


class SynEffect:
    __slots__ = ()


@dataclass(frozen=True)
class SEVar(SynEffect):
    name: Name

    def __str__(self) -> str:
        return self.name.text


@dataclass(frozen=True)
class SEPure(SynEffect):
    def __str__(self) -> str:
        return "pure"


@dataclass(frozen=True)
class SEWild(SynEffect):
    def __str__(self) -> str:
        return "_"


@dataclass(frozen=True)
class SEJoin(SynEffect):
    lhs: SynEffect
    rhs: SynEffect

    def __str__(self) -> str:
        return f"{self.lhs} \\/ {self.rhs}"


class SynType:
    __slots__ = ()


@dataclass(frozen=True)
class STVar(SynType):
    name: Name

    def __str__(self) -> str:
        return self.name.text


@dataclass(frozen=True)
class SArrow(SynType):
    param: SynType
    effect: SynEffect
    result: SynType

    def __str__(self) -> str:
        lhs = f"({self.param})" if isinstance(self.param, (SArrow, SForallTyp,
                                                           SForallEff)) \
            else str(self.param)
        eff = "" if isinstance(self.effect, SEPure) else str(self.effect)
        return f"{lhs} ->[{eff}] {self.result}"


@dataclass(frozen=True)
class SForallTyp(SynType):
    binder: Name
    body: SynType

    def __str__(self) -> str:
        return f"forall typ {self.binder.text}. {self.body}"


@dataclass(frozen=True)
class SForallEff(SynType):
    binder: Name
    body: SynType

    def __str__(self) -> str:
        return f"forall eff {self.binder.text}. {self.body}"


class Expr:
    __slots__ = ()


@dataclass(frozen=True)
class Var(Expr):
    name: Name

    def __str__(self) -> str:
        return self.name.text


@dataclass(frozen=True)
class Lam(Expr):
    param: Name
    ann: SynType
    body: Expr

    def __str__(self) -> str:
        return f"fn ({self.param.text} : {self.ann}) => {self.body}"


@dataclass(frozen=True)
class App(Expr):
    fn: Expr
    arg: Expr

    def __str__(self) -> str:
        return f"{_app_str(self.fn)} {_atom_str(self.arg)}"


@dataclass(frozen=True)
class Let(Expr):
    name: Name
    bound: Expr
    body: Expr

    def __str__(self) -> str:
        return f"let {self.name.text} = {self.bound} in {self.body}"


@dataclass(frozen=True)
class TLam(Expr):
    binder: Name
    body: Expr

    def __str__(self) -> str:
        return f"tfun {self.binder.text} => {self.body}"


@dataclass(frozen=True)
class ELam(Expr):
    binder: Name
    body: Expr

    def __str__(self) -> str:
        return f"efun {self.binder.text} => {self.body}"


@dataclass(frozen=True)
class TyApp(Expr):
    fn: Expr
    arg: SynType

    def __str__(self) -> str:
        return f"{_app_str(self.fn)} [type {self.arg}]"


@dataclass(frozen=True)
class EfApp(Expr):
    fn: Expr
    arg: SynEffect

    def __str__(self) -> str:
        return f"{_app_str(self.fn)} [eff {self.arg}]"


def _atom_str(e: Expr) -> str:
    if isinstance(e, (Var,)):
        return str(e)
    return f"({e})"


def _app_str(e: Expr) -> str:
    if isinstance(e, (Var, App, TyApp, EfApp)):
        return str(e)
    return f"({e})"


@dataclass(frozen=True)
class Program:
    effects: tuple[Name, ...]
    types: tuple[Name, ...]
    externs: tuple[tuple[Name, SynType], ...]
    defs: tuple[tuple[Name, Expr], ...]
    main: Expr | None


def free_vars(e: Expr) -> frozenset[Name]:
    """Free expression variables of e."""
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Lam):
        return free_vars(e.body) - {e.param}
    if isinstance(e, App):
        return free_vars(e.fn) | free_vars(e.arg)
    if isinstance(e, Let):
        return free_vars(e.bound) | (free_vars(e.body) - {e.name})
    if isinstance(e, (TLam, ELam)):
        return free_vars(e.body)
    if isinstance(e, (TyApp, EfApp)):
        return free_vars(e.fn)
    raise TypeError(f"not an expression: {e!r}")


def effect_is_wildcard_free(se: SynEffect) -> bool:
    if isinstance(se, SEWild):
        return False
    if isinstance(se, SEJoin):
        return (effect_is_wildcard_free(se.lhs)
                and effect_is_wildcard_free(se.rhs))
    return True


def type_is_wildcard_free(st: SynType) -> bool:
    if isinstance(st, SArrow):
        return (type_is_wildcard_free(st.param)
                and effect_is_wildcard_free(st.effect)
                and type_is_wildcard_free(st.result))
    if isinstance(st, (SForallTyp, SForallEff)):
        return type_is_wildcard_free(st.body)
    return True


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

KEYWORDS = frozenset(("fn", "let", "in", "tfun", "efun", "forall", "typ",
                      "eff", "type", "effect", "extern", "pure"))

_PUNCT = ("=>", "->", "\\/", "(", ")", "[", "]", ":", ".", "=", "_")


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "kw", punctuation text, or "eof"
    text: str
    line: int
    col: int


def tokenize(src: str) -> list[Token]:
    toks: list[Token] = []
    line, col, i = 1, 1, 0
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if src.startswith("--", i):
            while i < n and src[i] != "\n":
                i += 1
            continue
        if c.isalpha():
            j = i
            while j < n and (src[j].isalnum() or src[j] in "_'"):
                j += 1
            word = src[i:j]
            kind = "kw" if word in KEYWORDS else "ident"
            toks.append(Token(kind, word, line, col))
            col += j - i
            i = j
            continue
        for p in _PUNCT:
            if src.startswith(p, i):
                toks.append(Token(p, p, line, col))
                i += len(p)
                col += len(p)
                break
        else:
            raise SourceError(f"unexpected character {c!r}", line, col)
    toks.append(Token("eof", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# Parser with scope resolution
# ---------------------------------------------------------------------------


class Scope:
    """Per-kind string->Name environments with lexical extension."""

    def __init__(self, typ: dict[str, Name] | None = None,
                 eff: dict[str, Name] | None = None,
                 expr: dict[str, Name] | None = None) -> None:
        self.typ = dict(typ or {})
        self.eff = dict(eff or {})
        self.expr = dict(expr or {})

    def copy(self) -> "Scope":
        return Scope(self.typ, self.eff, self.expr)

    def table(self, kind: str) -> dict[str, Name]:
        return {KIND_TYPE: self.typ, KIND_EFF: self.eff,
                KIND_EXPR: self.expr}[kind]


class Parser:
    def __init__(self, src: str, supply: NameSupply,
                 scope: Scope | None = None) -> None:
        self.toks = tokenize(src)
        self.pos = 0
        self.supply = supply
        self.scope = scope.copy() if scope is not None else Scope()
        # Bracket depth before each token: application may not continue
        # across a line break at depth 0, so consecutive top-level items
        # do not glue together.
        self.depth = []
        d = 0
        for t in self.toks:
            self.depth.append(d)
            if t.kind in ("(", "["):
                d += 1
            elif t.kind in (")", "]"):
                d -= 1

    # -- token plumbing ----------------------------------------------------

    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def expect(self, kind: str, what: str | None = None) -> Token:
        t = self.peek()
        if t.kind != kind and not (kind == "kw" and t.kind == "kw"):
            wanted = what or repr(kind)
            raise SourceError(f"expected {wanted}, found {t.text or 'end of input'!r}",
                              t.line, t.col)
        return self.next()

    def expect_kw(self, word: str) -> Token:
        t = self.peek()
        if t.kind != "kw" or t.text != word:
            raise SourceError(f"expected {word!r}, found {t.text or 'end of input'!r}",
                              t.line, t.col)
        return self.next()

    def at_kw(self, word: str) -> bool:
        t = self.peek()
        return t.kind == "kw" and t.text == word

    def ident(self) -> Token:
        t = self.peek()
        if t.kind != "ident":
            raise SourceError(f"expected identifier, found {t.text or 'end of input'!r}",
                              t.line, t.col)
        return self.next()

    # -- scope helpers -----------------------------------------------------

    def bind(self, kind: str, tok: Token) -> Name:
        name = self.supply.fresh(kind, tok.text)
        self.scope.table(kind)[tok.text] = name
        return name

    def lookup(self, kind: str, tok: Token) -> Name:
        table = self.scope.table(kind)
        if tok.text not in table:
            noun = {KIND_TYPE: "type", KIND_EFF: "effect",
                    KIND_EXPR: "variable"}[kind]
            raise SourceError(f"unbound {noun} {tok.text!r}", tok.line,
                              tok.col)
        return table[tok.text]

    # -- effects -----------------------------------------------------------

    def parse_effect(self) -> SynEffect:
        out = self.parse_effect_atom()
        while self.peek().kind == "\\/":
            self.next()
            out = SEJoin(out, self.parse_effect_atom())
        return out

    def parse_effect_atom(self) -> SynEffect:
        t = self.peek()
        if t.kind == "_":
            self.next()
            return SEWild()
        if self.at_kw("pure"):
            self.next()
            return SEPure()
        if t.kind == "(":
            self.next()
            e = self.parse_effect()
            self.expect(")")
            return e
        if t.kind == "ident":
            self.next()
            return SEVar(self.lookup(KIND_EFF, t))
        raise SourceError(f"expected an effect, found {t.text or 'end of input'!r}",
                          t.line, t.col)

    # -- types ---------------------------------------------------------------

    def parse_type(self) -> SynType:
        lhs = self.parse_type_atom()
        if self.peek().kind == "->":
            self.next()
            eff: SynEffect = SEPure()
            if self.peek().kind == "[":
                self.next()
                if self.peek().kind != "]":
                    eff = self.parse_effect()
                self.expect("]")
            rhs = self.parse_type()
            return SArrow(lhs, eff, rhs)
        return lhs

    def parse_type_atom(self) -> SynType:
        t = self.peek()
        if self.at_kw("forall"):
            self.next()
            kind_tok = self.peek()
            if self.at_kw("typ"):
                self.next()
                saved = self.scope.copy()
                binder = self.bind(KIND_TYPE, self.ident())
                self.expect(".")
                body = self.parse_type()
                self.scope = saved
                return SForallTyp(binder, body)
            if self.at_kw("eff"):
                self.next()
                saved = self.scope.copy()
                binder = self.bind(KIND_EFF, self.ident())
                self.expect(".")
                body = self.parse_type()
                self.scope = saved
                return SForallEff(binder, body)
            raise SourceError("expected 'typ' or 'eff' after 'forall'",
                              kind_tok.line, kind_tok.col)
        if t.kind == "(":
            self.next()
            ty = self.parse_type()
            self.expect(")")
            return ty
        if t.kind == "ident":
            self.next()
            return STVar(self.lookup(KIND_TYPE, t))
        raise SourceError(f"expected a type, found {t.text or 'end of input'!r}",
                          t.line, t.col)

    # -- expressions ---------------------------------------------------------

    def parse_expr(self) -> Expr:
        if self.at_kw("fn"):
            self.next()
            self.expect("(")
            param_tok = self.ident()
            self.expect(":")
            ann = self.parse_type()
            self.expect(")")
            self.expect("=>")
            saved = self.scope.copy()
            param = self.bind(KIND_EXPR, param_tok)
            body = self.parse_expr()
            self.scope = saved
            return Lam(param, ann, body)
        if self.at_kw("tfun"):
            self.next()
            binder_tok = self.ident()
            self.expect("=>")
            saved = self.scope.copy()
            binder = self.bind(KIND_TYPE, binder_tok)
            body = self.parse_expr()
            self.scope = saved
            return TLam(binder, body)
        if self.at_kw("efun"):
            self.next()
            binder_tok = self.ident()
            self.expect("=>")
            saved = self.scope.copy()
            binder = self.bind(KIND_EFF, binder_tok)
            body = self.parse_expr()
            self.scope = saved
            return ELam(binder, body)
        if self.at_kw("let"):
            self.next()
            name_tok = self.ident()
            self.expect("=")
            bound = self.parse_expr()
            self.expect_kw("in")
            saved = self.scope.copy()
            name = self.bind(KIND_EXPR, name_tok)
            body = self.parse_expr()
            self.scope = saved
            return Let(name, bound, body)
        return self.parse_app()

    def _continues_application(self) -> bool:
        """Juxtaposition stops at a line break outside any brackets."""
        t = self.peek()
        prev = self.toks[self.pos - 1]
        return t.line == prev.line or self.depth[self.pos] > 0

    def parse_app(self) -> Expr:
        out = self.parse_atom_expr()
        while self._continues_application():
            t = self.peek()
            if t.kind == "[":
                nxt = self.peek(1)
                if nxt.kind == "kw" and nxt.text in ("type", "eff"):
                    self.next()
                    self.next()
                    if nxt.text == "type":
                        arg_t = self.parse_type()
                        self.expect("]")
                        out = TyApp(out, arg_t)
                    else:
                        arg_e = self.parse_effect()
                        self.expect("]")
                        out = EfApp(out, arg_e)
                    continue
                raise SourceError("expected 'type' or 'eff' after '['",
                                  nxt.line, nxt.col)
            if t.kind == "ident" or t.kind == "(":
                out = App(out, self.parse_atom_expr())
                continue
            break
        return out

    def parse_atom_expr(self) -> Expr:
        t = self.peek()
        if t.kind == "ident":
            self.next()
            return Var(self.lookup(KIND_EXPR, t))
        if t.kind == "(":
            self.next()
            e = self.parse_expr()
            self.expect(")")
            return e
        raise SourceError(f"expected an expression, found {t.text or 'end of input'!r}",
                          t.line, t.col)

    # -- programs ------------------------------------------------------------

    def parse_program(self) -> Program:
        effects: list[Name] = []
        types: list[Name] = []
        externs: list[tuple[Name, SynType]] = []
        while True:
            if self.at_kw("effect"):
                self.next()
                tok = self.ident()
                self._check_fresh_decl(KIND_EFF, tok)
                effects.append(self.bind(KIND_EFF, tok))
            elif self.at_kw("type"):
                self.next()
                tok = self.ident()
                self._check_fresh_decl(KIND_TYPE, tok)
                types.append(self.bind(KIND_TYPE, tok))
            elif self.at_kw("extern"):
                self.next()
                tok = self.ident()
                self._check_fresh_decl(KIND_EXPR, tok)
                self.expect(":")
                ty = self.parse_type()
                if not type_is_wildcard_free(ty):
                    raise SourceError(
                        f"extern {tok.text!r} has a wildcard in its type",
                        tok.line, tok.col)
                externs.append((self.bind(KIND_EXPR, tok), ty))
            else:
                break
        defs: list[tuple[Name, Expr]] = []
        main: Expr | None = None
        while self.peek().kind != "eof":
            if self.at_kw("let"):
                self.next()
                name_tok = self.ident()
                self.expect("=")
                bound = self.parse_expr()
                if self.at_kw("in"):
                    self.next()
                    saved = self.scope.copy()
                    name = self.bind(KIND_EXPR, name_tok)
                    body = self.parse_expr()
                    self.scope = saved
                    main = Let(name, bound, body)
                    break
                defs.append((self.bind(KIND_EXPR, name_tok), bound))
            else:
                main = self.parse_expr()
                break
        t = self.peek()
        if t.kind != "eof":
            raise SourceError(f"unexpected {t.text!r} after program end",
                              t.line, t.col)
        return Program(tuple(effects), tuple(types), tuple(externs),
                       tuple(defs), main)

    def _check_fresh_decl(self, kind: str, tok: Token) -> None:
        if tok.text in self.scope.table(kind):
            raise SourceError(f"duplicate declaration of {tok.text!r}",
                              tok.line, tok.col)

    def parse_repl_item(self):
        """One REPL input.

        Returns one of ('def', name, expr), ('expr', None, expr),
        ('effect', name, None), ('type', name, None),
        ('extern', name, syntype).
        """
        if self.at_kw("effect"):
            self.next()
            tok = self.ident()
            self._check_fresh_decl(KIND_EFF, tok)
            name = self.bind(KIND_EFF, tok)
            self.expect("eof", "end of input")
            return ("effect", name, None)
        if self.at_kw("type"):
            self.next()
            tok = self.ident()
            self._check_fresh_decl(KIND_TYPE, tok)
            name = self.bind(KIND_TYPE, tok)
            self.expect("eof", "end of input")
            return ("type", name, None)
        if self.at_kw("extern"):
            self.next()
            tok = self.ident()
            self._check_fresh_decl(KIND_EXPR, tok)
            self.expect(":")
            ty = self.parse_type()
            if not type_is_wildcard_free(ty):
                raise SourceError(
                    f"extern {tok.text!r} has a wildcard in its type",
                    tok.line, tok.col)
            self.expect("eof", "end of input")
            return ("extern", self.bind(KIND_EXPR, tok), ty)
        if self.at_kw("let"):
            save = self.pos
            self.next()
            name_tok = self.ident()
            self.expect("=")
            bound = self.parse_expr()
            if self.at_kw("in"):
                # A let-in is an ordinary expression; reparse as one.
                self.pos = save
                e = self.parse_expr()
                self.expect("eof", "end of input")
                return ("expr", None, e)
            self.expect("eof", "end of input")
            name = self.bind(KIND_EXPR, name_tok)
            return ("def", name, bound)
        e = self.parse_expr()
        self.expect("eof", "end of input")
        return ("expr", None, e)


def parse_program(src: str, supply: NameSupply) -> Program:
    return Parser(src, supply).parse_program()


def parse_expr(src: str, supply: NameSupply,
               scope: Scope | None = None) -> Expr:
    p = Parser(src, supply, scope)
    e = p.parse_expr()
    p.expect("eof", "end of input")
    return e


def parse_type(src: str, supply: NameSupply,
               scope: Scope | None = None) -> SynType:
    p = Parser(src, supply, scope)
    t = p.parse_type()
    p.expect("eof", "end of input")
    return t
