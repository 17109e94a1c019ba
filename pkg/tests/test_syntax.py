"""Lexing, parsing, scope resolution and pretty-printing."""
import pytest

from efl.names import NameSupply
from efl.syntax import (App, Lam, Parser, Scope, SourceError, parse_program,
                        tokenize)

PRELUDE = """effect IO
effect DB
type Unit
extern f : forall eff a. Unit ->[a] Unit
extern g : forall typ t. t ->[] t
extern u : Unit
"""


def _parse(body: str):
    return parse_program(PRELUDE + body + "\n", NameSupply())


def test_tokenize_kinds_and_positions():
    toks = tokenize("let f' = fn (x : Int) => x -- note\n[eff _]")
    assert [(t.kind, t.text) for t in toks[:4]] == [
        ("kw", "let"), ("ident", "f'"), ("=", "="), ("kw", "fn")]
    assert toks[0].line == 1 and toks[0].col == 1
    assert toks[1].text == "f'"          # primes stay part of the name
    texts = [t.text for t in toks]
    assert "note" not in texts           # comments are skipped
    bracket = next(t for t in toks if t.kind == "[")
    assert (bracket.line, bracket.col) == (2, 1)
    assert toks[-1].kind == "eof"


def test_tokenize_error_position():
    with pytest.raises(SourceError) as exc:
        tokenize("let x = $")
    assert str(exc.value) == "line 1, col 9: unexpected character '$'"
    assert exc.value.line == 1 and exc.value.col == 9


def test_guard_syntax_is_output_only():
    with pytest.raises(SourceError):
        tokenize("Unit ->[a ? p] Unit")


@pytest.mark.parametrize("tsrc", [
    "Unit",
    "Unit ->[] Unit",
    "Unit ->[IO \\/ DB] Unit",
    "(Unit ->[IO] Unit) ->[] Unit",
    "forall eff a. Unit ->[a] Unit",
    "forall typ t. t ->[] t",
    "forall eff a. forall eff b. Unit ->[a \\/ b] Unit",
])
def test_type_rendering_round_trips(tsrc):
    prog = _parse(f"extern w : {tsrc}\nu")
    rendered = str(prog.externs[-1][1])
    assert rendered == tsrc
    again = _parse(f"extern w : {rendered}\nu")
    assert str(again.externs[-1][1]) == rendered


@pytest.mark.parametrize("esrc", [
    "f [eff IO] u",
    "g [type Unit] u",
    "fn (x : Unit) => x",
    "let w = u in w",
    "efun e => fn (x : Unit ->[e] Unit) => x u",
    "tfun t => fn (x : t) => x",
])
def test_expr_rendering_round_trips(esrc):
    prog = _parse(esrc)
    rendered = str(prog.main)
    again = _parse(rendered)
    assert str(again.main) == rendered


def test_application_is_left_associative():
    prog = _parse("extern two : Unit ->[] Unit ->[] Unit\ntwo u u")
    main = prog.main
    assert isinstance(main, App) and isinstance(main.fn, App)
    assert str(main) == "two u u"


def test_instantiation_binds_like_an_atom():
    bare = _parse("f [eff IO] u")
    parened = _parse("(f [eff IO]) u")
    assert str(bare.main) == str(parened.main) == "f [eff IO] u"
    assert isinstance(bare.main, App)


def test_application_stops_at_line_break():
    prog = _parse("extern a : Unit ->[] Unit\nlet r = a\nu")
    assert str(prog.defs[-1][1]) == "a"
    assert str(prog.main) == "u"


def test_application_continues_inside_brackets():
    prog = _parse("extern a : Unit ->[] Unit\nlet r = (a\nu)\nr")
    assert str(prog.defs[-1][1]) == "a u"


def test_lambda_body_extends_right():
    prog = _parse("fn (x : Unit) => f [eff IO] x")
    assert isinstance(prog.main, Lam)
    assert str(prog.main) == "fn (x : Unit) => f [eff IO] x"


def test_let_in_is_an_expression():
    prog = _parse("let w = u in f [eff IO] w")
    assert str(prog.main) == "let w = u in f [eff IO] w"


def test_duplicate_declarations_rejected():
    with pytest.raises(SourceError, match="duplicate declaration of 'IO'"):
        parse_program("effect IO\neffect IO\ntype Unit\nextern u : Unit\nu\n",
                      NameSupply())
    with pytest.raises(SourceError, match="duplicate declaration of 'u'"):
        _parse("extern u : Unit\nu")


def test_toplevel_let_may_shadow():
    prog = _parse("let u = f [eff IO] u\nlet u = u\nu")
    assert len(prog.defs) == 2
    # the second definition's body refers to the first, not to itself
    first_name = prog.defs[0][0]
    assert str(prog.defs[1][1]) == "u"
    assert prog.defs[1][1].name == first_name


def test_unbound_names_are_positioned_errors():
    with pytest.raises(SourceError) as exc:
        _parse("v")
    assert "unbound variable 'v'" in str(exc.value)
    with pytest.raises(SourceError, match="unbound type 'Unita'"):
        _parse("extern w : Unita\nu")
    with pytest.raises(SourceError, match="unbound effect 'XX'"):
        _parse("extern w : Unit ->[XX] Unit\nu")


def test_extern_types_must_be_wildcard_free():
    with pytest.raises(SourceError, match="wildcard"):
        _parse("extern w : Unit ->[_] Unit\nu")


def test_lambda_annotations_may_use_wildcards():
    prog = _parse("fn (k : Unit ->[_] Unit) => k u")
    assert str(prog.main) == "fn (k : Unit ->[_] Unit) => k u"


def test_main_expression_is_optional():
    prog = parse_program("effect IO\ntype Unit\nextern u : Unit\n",
                         NameSupply())
    assert prog.main is None


def test_repl_items_cover_all_forms():
    supply = NameSupply()
    scope = Scope()
    seen = []
    for line in ["effect IO", "type Unit", "extern u : Unit",
                 "let y = fn (x : Unit) => u", "y u"]:
        parser = Parser(line, supply, scope)
        item = parser.parse_repl_item()
        scope = parser.scope
        seen.append(item[0])
    assert seen == ["effect", "type", "extern", "def", "expr"]


def test_repl_scope_is_isolated_until_adopted():
    supply = NameSupply()
    scope = Scope()
    parser = Parser("effect IO", supply, scope)
    parser.parse_repl_item()
    # the caller's scope is untouched until it adopts parser.scope
    assert "IO" not in scope.eff
    assert "IO" in parser.scope.eff
