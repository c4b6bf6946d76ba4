import json
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amedet.frontend import (
    IllegalCharacter,
    LexError,
    MalformedHeader,
    UnbalancedBraces,
    UnterminatedString,
    flatten,
    format_function,
    ir_to_dict,
    parse_function,
    parse_source,
    resolve_symbols,
    tokenize,
)
from amedet.frontend.ir import CALL_VALUE, PLAIN, SELF_CALL, TRANSFER_LIKE, Call, Loop, Require, Assignment
from amedet.frontend.parser import classify_call
from amedet.frontend.symbols import EXTERNAL, PARAM, STATE
from amedet.corpus import corpus_files

from conftest import WITHDRAW, parse_one, wrap


def kinds_values(src):
    return [(t.kind, t.value) for t in tokenize(src)]


# -- tokenize -------------------------------------------------------------------


def test_tokenize_call_value_chain():
    assert kinds_values("msg.sender.call.value(x)()") == [
        ("identifier", "msg"), ("member-dot", "."), ("identifier", "sender"), ("member-dot", "."),
        ("identifier", "call"), ("member-dot", "."), ("identifier", "value"),
        ("punctuation", "("), ("identifier", "x"), ("punctuation", ")"),
        ("punctuation", "("), ("punctuation", ")"),
    ]


def test_tokenize_empty():
    assert tokenize("") == []


def test_tokenize_while_header():
    assert kinds_values("while (i < 9) { }") == [
        ("keyword", "while"), ("punctuation", "("), ("identifier", "i"), ("punctuation", "<"),
        ("literal", "9"), ("punctuation", ")"), ("punctuation", "{"), ("punctuation", "}"),
    ]


def test_tokenize_drops_comments_and_keeps_positions():
    toks = tokenize("a // c\n  /* x\n y */ b")
    assert [(t.value, t.line, t.column) for t in toks] == [("a", 1, 1), ("b", 3, 7)]


def test_unterminated_string_position():
    with pytest.raises(UnterminatedString) as exc:
        tokenize('x = "abc')
    assert (exc.value.line, exc.value.column) == (1, 5)


def test_illegal_character_position():
    with pytest.raises(IllegalCharacter) as exc:
        tokenize("a\n  #")
    assert (exc.value.line, exc.value.column) == (2, 3)
    assert isinstance(exc.value, LexError)


# -- parse ------------------------------------------------------------------------


def test_parse_withdraw_three_statements():
    ir, _ = parse_one(WITHDRAW)
    assert ir.name == "withdraw"
    assert ir.params == (("amount", "uint"),)
    kinds = [type(s) for s in ir.statements]
    assert kinds == [Require, Call, Assignment]
    assert ir.statements[1].kind == CALL_VALUE
    assert ir.statements[2].op == "-="


def test_parse_empty_function():
    ir = parse_function("function f() {}")
    assert ir.statements == ()


def test_parse_for_without_condition():
    ir = parse_function("function f() { for(;;){} }")
    (loop,) = ir.statements
    assert isinstance(loop, Loop)
    assert loop.kind == "for" and loop.cond is None


def test_statement_spans_are_monotone(corpus_units):
    for unit in corpus_units.values():
        for ir in unit.functions:
            starts = [fs.stmt.span[:2] for fs in flatten(ir.statements) if fs.role == "stmt"]
            top = [s.span[:2] for s in ir.statements]
            assert top == sorted(top)
            assert all(s[0] > 0 for s in starts)


def test_unbalanced_braces_abort_one_function_only():
    src = "contract C {\n function good() { x = 1; }\n function bad() { if (x) { y = 2; }\n"
    unit = parse_source(src)
    assert [f.name for f in unit.functions] == ["good"]
    assert [e.name for e in unit.errors] == ["bad"]
    assert "UnbalancedBraces" in unit.errors[0].error or "brace" in unit.errors[0].error.lower()
    with pytest.raises(UnbalancedBraces):
        parse_function("function bad() { if (x) { y = 2; }")


def test_malformed_header_aborts_one_function_only():
    src = "contract C {\n function f uint a) { x = 1; }\n function ok() { y = 1; }\n}"
    unit = parse_source(src)
    assert [f.name for f in unit.functions] == ["ok"]
    assert len(unit.errors) == 1
    with pytest.raises(MalformedHeader):
        parse_function("function f uint a) { }")


def test_unknown_statement_is_opaque_with_reads():
    ir = parse_function("function f() { assembly { let x := y } z = w; }")
    assert len(ir.statements) == 2
    assert "w" in ir.statements[1].reads


# -- symbols --------------------------------------------------------------------------


def test_resolve_symbols_examples():
    ir, index = parse_one(WITHDRAW)
    table = resolve_symbols(ir, index.state_vars)
    assert table["userBalance"].kind == STATE and table["userBalance"].balance_like
    assert table.kind("amount") == PARAM
    ir2 = parse_function("function f() { require(tx.origin == owner); }")
    table2 = resolve_symbols(ir2, {})
    assert table2.kind("tx.origin") == EXTERNAL
    assert table2.kind("owner") == EXTERNAL


def test_every_identifier_is_classified(corpus_units):
    for unit in corpus_units.values():
        for ir in unit.functions:
            table = resolve_symbols(ir, unit.index_for(ir).state_vars)
            for fs in flatten(ir.statements):
                for name in fs.stmt.reads:
                    assert name in table


def test_balance_two_signal_heuristic():
    state = "mapping(address => uint) funds;"
    ir, index = parse_one(wrap("require(funds[msg.sender] >= x); funds[msg.sender] -= x;", state))
    assert resolve_symbols(ir, index.state_vars)["funds"].balance_like
    ir, index = parse_one(wrap("funds[msg.sender] -= x;", state))
    assert not resolve_symbols(ir, index.state_vars)["funds"].balance_like


# -- call classification -----------------------------------------------------------------


def test_classify_call_examples():
    assert classify_call("msg.sender.call.value", "f") == CALL_VALUE
    assert classify_call("f", "f") == SELF_CALL
    assert classify_call("this.f", "f") == SELF_CALL
    assert classify_call("pay", "f", frozenset({"pay"})) == TRANSFER_LIKE
    assert classify_call("owner.transfer", "f") == PLAIN


paths = st.lists(st.sampled_from(["msg", "sender", "call", "value", "f", "g", "this", "pay"]), min_size=1, max_size=4)


@given(paths, st.sampled_from(["f", "g"]))
def test_classify_call_is_pure(parts, fname):
    path = ".".join(parts)
    first = classify_call(path, fname, frozenset({"pay"}))
    assert first == classify_call(path, fname, frozenset({"pay"}))
    assert (first == CALL_VALUE) == (path == "call.value" or path.endswith(".call.value"))


def test_call_kinds_in_corpus_match_classifier(corpus_units):
    for unit in corpus_units.values():
        for ir in unit.functions:
            tl = unit.index_for(ir).transfer_like
            for fs in flatten(ir.statements):
                for c in fs.stmt.calls():
                    assert c.kind == classify_call(c.path, ir.name, tl)


# -- expression read-sets ------------------------------------------------------------------


def check_reads(expr):
    expected = set()
    for child in expr.children():
        check_reads(child)
        expected |= child.reads
    if expr.own_identifier() is not None:
        expected.add(expr.own_identifier())
    assert expr.reads == expected


def test_read_set_is_union_of_children(corpus_units):
    for unit in corpus_units.values():
        for ir in unit.functions:
            for fs in flatten(ir.statements):
                for e in fs.stmt.exprs():
                    check_reads(e)


# -- round trip and invariance -----------------------------------------------------------------


def test_pretty_print_round_trip(corpus_units):
    for unit in corpus_units.values():
        for ir in unit.functions:
            again = parse_function(format_function(ir), contract=ir.contract, state_vars=ir.state_vars,
                                   transfer_like=unit.index_for(ir).transfer_like)
            assert again == ir


def test_ir_json_is_serializable(corpus_units):
    for unit in corpus_units.values():
        for ir in unit.functions:
            doc = ir_to_dict(ir)
            assert json.loads(json.dumps(doc)) == doc
            assert doc["name"] == ir.name


def statement_counts(src):
    unit = parse_source(src)
    return [(f.name, len(flatten(f.statements))) for f in unit.functions]


_CORPUS_TEXT = [p.read_text() for p in corpus_files()]
_SPLIT = re.compile(r"(\s+)")


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(_CORPUS_TEXT), st.data())
def test_statement_count_invariant_under_comments_and_whitespace(src, data):
    pieces = _SPLIT.split(src)
    out = []
    for p in pieces:
        if p and p.isspace():
            extra = data.draw(st.sampled_from([p, p + " ", "\n" + p, " /* noise */ ", "  // note\n"]))
            out.append(extra)
        else:
            out.append(p)
    assert statement_counts("".join(out)) == statement_counts(src)
