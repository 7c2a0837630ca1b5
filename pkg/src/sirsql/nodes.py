"""AST node types for the sirsql dialect.

Nodes are plain dataclasses.  Structural equality deliberately ignores
source positions and parse warnings so that round-trip comparisons
(parse(render(parse(s))) == parse(s)) hold regardless of layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field


# --- expressions -----------------------------------------------------------

@dataclass
class Literal:
    text: str          # lexeme as written, preserved for deterministic rendering
    kind: str          # 'number' | 'string' | 'null'


@dataclass
class ColumnRef:
    name: str
    table: str | None = None


@dataclass
class Call:
    func: str
    args: list
    star: bool = False          # COUNT(*)
    distinct: bool = False


@dataclass
class Unary:
    op: str
    operand: object


@dataclass
class Binary:
    op: str                     # =, <>, <, <=, >, >=, +, -, *, /, %, ||, AND, OR, LIKE
    left: object
    right: object


@dataclass
class IsNull:
    operand: object
    negated: bool = False


@dataclass
class InList:
    operand: object
    items: list                 # expressions, or a single Subquery
    negated: bool = False


@dataclass
class Paren:
    inner: object


@dataclass
class Subquery:
    select: "Select"


@dataclass
class Tuple:
    """Row value, e.g. (a, b) IN (...); built by rewrites, not by the grammar."""
    items: list


# --- select ----------------------------------------------------------------

@dataclass
class Star:
    qualifier: str | None = None


@dataclass
class StarMinus:
    excluded: list              # list of ColumnRef; non-empty


@dataclass
class SelectItem:
    expr: object                # expression | Star | StarMinus
    alias: str | None = None


@dataclass
class TableName:
    name: str
    alias: str | None = None


@dataclass
class DerivedTable:
    """FROM (SELECT ...) alias; built by rewrites, not by the grammar."""
    select: "Select"
    alias: str


@dataclass
class Join:
    left: object                # TableName | Join | DerivedTable
    kind: str                   # 'inner' | 'left' | 'right'
    right: object
    on: object                  # expression


@dataclass
class OrderItem:
    expr: object
    descending: bool = False


@dataclass
class Select:
    items: list
    from_: list = field(default_factory=list)   # TableName | Join entries (comma list)
    where: object = None
    group_by: list = field(default_factory=list)
    order_by: list = field(default_factory=list)
    distinct: bool = False
    limit: str | None = None    # numeric lexeme from TOP n / LIMIT n


# --- schema elements -------------------------------------------------------

@dataclass
class AttributeDecl:
    name: str
    sql_type: str
    type_args: list = field(default_factory=list)  # numeric lexemes, e.g. Decimal(10,2)
    is_primary_key: bool = False
    not_null: bool = False


@dataclass
class SelectForm:
    select: Select


@dataclass
class ValueForm:
    items: list                 # list of (name, expression)


@dataclass
class IeDecl:
    name: str
    form: object                # SelectForm | ValueForm
    position: tuple | None = None   # ('before'|'after', attr) or None = append


@dataclass
class PrimaryKeyClause:
    columns: list


@dataclass
class UniqueClause:
    columns: list


@dataclass
class ForeignKeyClause:
    columns: list
    ref_table: str
    ref_columns: list


# --- statements ------------------------------------------------------------

@dataclass
class _Positioned:
    line: int = field(default=0, kw_only=True, compare=False)
    col: int = field(default=0, kw_only=True, compare=False)
    warnings: list = field(default_factory=list, kw_only=True, compare=False)


@dataclass
class CreateSirTable(_Positioned):
    name: str
    elements: list              # AttributeDecl | IeDecl | key clauses, in source order

    @property
    def attributes(self):
        return [e for e in self.elements if isinstance(e, AttributeDecl)]

    @property
    def ies(self):
        return [e for e in self.elements if isinstance(e, IeDecl)]

    @property
    def is_sir(self):
        return bool(self.ies)


@dataclass
class CreateView(_Positioned):
    name: str
    select: Select


@dataclass
class AlterAdd:
    position: tuple | None      # ('before'|'after', attr) or None
    items: list                 # AttributeDecl | IeDecl


@dataclass
class AlterIe:
    target: str                 # existing IE or attribute name
    replacement: IeDecl


@dataclass
class AlterDrop:
    target: str


@dataclass
class AlterTable(_Positioned):
    name: str
    action: object              # AlterAdd | AlterIe | AlterDrop


@dataclass
class DropTable(_Positioned):
    name: str
    mode: str = "restrict"      # 'restrict' | 'cascade'


@dataclass
class DropView(_Positioned):
    name: str


@dataclass
class CreateIndex(_Positioned):
    name: str
    table: str
    columns: list
    unique: bool = False


@dataclass
class Query(_Positioned):
    select: Select


@dataclass
class Insert(_Positioned):
    table: str
    columns: list | None        # explicit column list or None
    source: object              # ValuesRows | Select


@dataclass
class ValuesRows:
    rows: list                  # list of list of expressions


@dataclass
class Update(_Positioned):
    table: str
    assignments: list           # list of (column, expression)
    where: object = None


@dataclass
class Delete(_Positioned):
    table: str
    where: object = None


Statement = (CreateSirTable, CreateView, AlterTable, DropTable, DropView,
             CreateIndex, Query, Insert, Update, Delete)


def walk(node):
    """Yield node and every dataclass descendant, depth-first."""
    if node is None:
        return
    yield node
    values = getattr(node, "__dataclass_fields__", None)
    if values is None:
        if isinstance(node, (list, tuple)):
            for item in node:
                yield from walk(item)
        return
    for name in values:
        child = getattr(node, name)
        if isinstance(child, (list, tuple)):
            for item in child:
                yield from walk(item)
        elif hasattr(child, "__dataclass_fields__"):
            yield from walk(child)
