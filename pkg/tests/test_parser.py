from __future__ import annotations

import random

import pytest

from sirsql import nodes as n
from sirsql.errors import ParseError, UnrenderableNode
from sirsql.lexer import tokenize
from sirsql.parser import parse, parse_one
from sirsql.render import RenderTarget, render, render_source

from conftest import fixture_text

SP_TABLE = """
Create Table SP (
  S# Char, P# Char, QTY Int,
  Primary Key (S#, P#),
  I_S (Select SNAME, STATUS, CITY As SCITY From S Where SP.S# = S#),
  I_P (Select PNAME, COLOR, WEIGHT, CITY As PCITY From P Where SP.P# = P#)
);
"""


def test_lexer_hash_identifiers_and_positions():
    tokens = tokenize("Select S#\nFrom SP;")
    assert [t.value for t in tokens[:2]] == ["Select", "S#"]
    assert (tokens[2].value, tokens[2].line, tokens[2].col) == ("From", 2, 1)


def test_lexer_comments_and_strings():
    tokens = tokenize("-- line\n/* block\n*/ 'it''s' x")
    assert tokens[0].value == "it's"
    assert tokens[1].value == "x"


def test_lexer_star_slash_is_two_tokens():
    values = [t.value for t in tokenize("*/P.P#")][:3]
    assert values == ["*", "/", "P"]


def test_figure3_table_shape():
    stmt = parse_one(SP_TABLE)
    assert isinstance(stmt, n.CreateSirTable)
    assert [a.name for a in stmt.attributes] == ["S#", "P#", "QTY"]
    assert [ie.name for ie in stmt.ies] == ["I_S", "I_P"]
    assert all(isinstance(ie.form, n.SelectForm) for ie in stmt.ies)
    assert stmt.is_sir
    pk = [e for e in stmt.elements if isinstance(e, n.PrimaryKeyClause)]
    assert pk[0].columns == ["S#", "P#"]


def test_zero_ie_table_is_stored_relation():
    stmt = parse_one("Create Table S (S# Char Primary Key, SNAME Char);")
    assert not stmt.is_sir
    assert stmt.attributes[0].is_primary_key


def test_minimal_star_query():
    stmt = parse_one("Select * From SP;")
    assert isinstance(stmt, n.Query)
    assert isinstance(stmt.select.items[0].expr, n.Star)


def test_alter_with_star_minus_replacement():
    stmt = parse_one(
        "Alter Table SP Alter I_P As I_P_ALL (Select */P.P# From P Where SP.P# = P.P#);")
    action = stmt.action
    assert isinstance(action, n.AlterIe)
    assert action.target == "I_P"
    assert action.replacement.name == "I_P_ALL"
    item = action.replacement.form.select.items[0].expr
    assert isinstance(item, n.StarMinus)
    assert (item.excluded[0].table, item.excluded[0].name) == ("P", "P#")


def test_alter_add_value_ies_with_position():
    stmt = parse_one(
        "Alter Table P Add After WEIGHT WEIGHT_T As ( WEIGHT_KG / 1000),"
        " WEIGHT_KG As (Round (WEIGHT / 2.1,1));")
    action = stmt.action
    assert action.position == ("after", "WEIGHT")
    assert [i.name for i in action.items] == ["WEIGHT_T", "WEIGHT_KG"]
    assert all(isinstance(i.form, n.ValueForm) for i in action.items)


def test_trailing_from_after_ie_is_ignored_with_warning():
    stmt = parse_one(
        "Alter Table S Add RANK As (IIF(status is not null,"
        " (select count(*) +1 from S X where x.status > s.status), null)) FROM S;")
    assert stmt.action.items[0].name == "RANK"
    assert any("FROM S" in w for w in stmt.warnings)


def test_duplicate_attribute_rejected():
    with pytest.raises(ParseError, match="duplicate"):
        parse("Create Table T (A Char, A Int);")


def test_syntax_error_carries_position_and_expectations():
    with pytest.raises(ParseError) as err:
        parse("Create Tabel T (A Char);")
    assert err.value.line == 1
    assert err.value.col is not None
    assert err.value.expected


def test_unterminated_statement():
    with pytest.raises(ParseError, match="unterminated"):
        parse("Select * From SP")


def test_insert_select_paper_form():
    stmt = parse_one("Insert SP (select 'S4' as S#, 'P4' as P#, 100 as QTY);")
    assert isinstance(stmt, n.Insert)
    assert stmt.columns is None
    assert isinstance(stmt.source, n.Select)
    assert [i.alias for i in stmt.source.items] == ["S#", "P#", "QTY"]


def test_insert_values_multi_row():
    stmt = parse_one("Insert Into S Values ('S1','a','b','c'), ('S2','d','e','f');")
    assert len(stmt.source.rows) == 2


def test_update_delete_forms():
    upd = parse_one("Update SP set QTY = 250 where S# = 'S1' and P# = 'P1';")
    assert upd.assignments[0][0] == "QTY"
    dele = parse_one("Delete SP Where S# = 'S1';")
    assert dele.table == "SP"
    assert dele.where is not None


def test_drop_modes_and_views():
    assert parse_one("Drop Table S Cascade;").mode == "cascade"
    assert parse_one("Drop Table S;").mode == "restrict"
    assert isinstance(parse_one("Drop View V2;"), n.DropView)


def test_select_clauses_round_trip():
    text = ("Select Top 3 S#, Count(*) As N From SP X"
            " Where QTY > 100 And CITY Like 'L%'"
            " Group By S# Order By N Desc, S#;")
    stmt = parse_one(text)
    assert stmt.select.limit == "3"
    assert stmt.select.order_by[0].descending
    assert parse(render_source(stmt)) == [stmt]


def test_joins_and_subqueries_round_trip():
    text = ("Select SP.P#, (Select PNAME From P Where SP.P# = P.P#) As PNAME, QTY"
            " From S Left Join SP On S.S# = SP.S# Where SNAME = 'Smith';")
    stmt = parse_one(text)
    join = stmt.select.from_[0]
    assert isinstance(join, n.Join) and join.kind == "left"
    assert parse(render_source(stmt)) == [stmt]


CORPUS = [
    SP_TABLE,
    "Select * From SP;",
    "Select */QTY From SP;",
    "Select */(S#, P#) From SP;",
    "Create View V2 As Select SNAME, P.P#, PNAME, QTY From S, SP, P"
    " Where S.S# = SP.S# And SP.P# = P.P#;",
    "Alter Table SP Alter I_P As I_P_ALL (Select */P.P# From P Where SP.P# = P.P#);",
    "Alter Table P Add After WEIGHT WEIGHT_T As ( WEIGHT_KG / 1000),"
    " WEIGHT_KG As (Round (WEIGHT / 2.1,1));",
    "Alter Table S Alter STATUS As STATUS (Select Int (SUM(QTY)/100)"
    " FROM SP_B WHERE S.S# = S#);",
    "Alter Table SP Drop I_P;",
    "Insert SP (select 'S4' as S#, 'P4' as P#, 100 as QTY);",
    "Insert Into SP Values ('S1', 'P1', 300);",
    "Update SP set QTY = 250, CITY = 'Paris' where S# = 'S1' and P# = 'P1';",
    "Delete SP Where S# = 'S1';",
    "Drop Table S Cascade;",
    "Create Index SP_QTY On SP (QTY);",
    "Create Unique Index S_NAME On S (SNAME);",
    "Select S#, SNAME, STATUS, RANK From S Order By RANK;",
    "Select count(*) + 1 From S X Where X.STATUS > S.STATUS;",
    "Select IIF(STATUS is not null, 1, null) As flag From S;",
]


@pytest.mark.parametrize("source", CORPUS)
def test_round_trip_corpus(source):
    first = parse(source)
    again = parse("\n".join(render_source(s) for s in first))
    assert again == first


def test_whitespace_and_comments_never_change_ast():
    rng = random.Random(7)
    for source in CORPUS:
        tokens = source.replace("\n", " ").split(" ")
        noisy = []
        for token in tokens:
            noisy.append(token)
            gap = rng.choice([" ", "  ", "\n", " /* x */ ", " -- c\n"])
            noisy.append(gap)
        assert parse("".join(noisy)) == parse(source)


def test_render_bracket_quoting():
    expr = parse_one("Select S.S# From S;").select.items[0].expr
    assert render(expr, RenderTarget(quoting="bracket")) == "S.[S#]"
    assert render(expr, RenderTarget()) == 'S."S#"'


def test_render_rejects_empty_select_list():
    select = n.Select(items=[], from_=[n.TableName(name="S")])
    with pytest.raises(UnrenderableNode):
        render(n.Query(select=select), RenderTarget())


def test_render_rejects_star_minus_before_expansion():
    stmt = parse_one("Select */QTY From SP;")
    with pytest.raises(UnrenderableNode):
        render(stmt, RenderTarget())


def test_render_rejects_ie_declarations():
    stmt = parse_one(SP_TABLE)
    with pytest.raises(UnrenderableNode):
        render(stmt, RenderTarget())


def test_render_is_deterministic():
    stmt = parse_one("Select S#, SNAME From S Where STATUS >= 20 Order By S#;")
    target = RenderTarget()
    assert render(stmt, target) == render(stmt, target)


def test_fixture_files_round_trip():
    for name in ("sp2_schema.sirsql", "sp2_data.sirsql", "sp3_alters.sirsql"):
        source = fixture_text(name)
        first = parse(source)
        assert parse("\n".join(render_source(s) for s in first)) == first
