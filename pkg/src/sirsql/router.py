"""Route DML and queries against the catalog.

Queries pass through: a relation with IEs is addressed by its full view,
which carries the relation's own name in the kernel.  Writes against such
a relation are rewritten to its stored base when they touch stored
attributes only, and rejected otherwise: inherited attributes are never
writable under the default policy, and they are never materialized, so a
rewritten write followed by a query always shows freshly computed values.

WHERE clauses over inherited attributes are evaluated by selecting the
matching base keys through the full view first (one statement, pre-write
state).
"""

from __future__ import annotations

from dataclasses import dataclass

from . import nodes as n
from .catalog import Catalog
from .compiler import conjoin
from .errors import InvariantViolation, RejectedWrite, UnknownColumn, UnknownRelation
from .kernel import KernelConnection

PASS_THROUGH, BASE_REWRITE, REJECTED = "pass_through", "base_rewrite", "rejected"


@dataclass
class RoutedStatement:
    original: object
    kind: str                       # pass_through | base_rewrite | rejected
    kernel_stmt: object = None      # AST to render for the kernel
    target: str | None = None       # base table name for rewrites
    reason: str | None = None       # rejection reason
    inserted_columns: list | None = None   # stored columns an insert binds


def route(stmt, catalog: Catalog) -> RoutedStatement:
    """Classify a parsed statement and rewrite it for the kernel."""
    if isinstance(stmt, n.Query):
        expanded = _expand_query_stars(stmt.select, catalog)
        return RoutedStatement(original=stmt, kind=PASS_THROUGH,
                               kernel_stmt=n.Query(select=expanded))
    if isinstance(stmt, n.Insert):
        return _route_insert(stmt, catalog)
    if isinstance(stmt, n.Update):
        return _route_update(stmt, catalog)
    if isinstance(stmt, n.Delete):
        return _route_delete(stmt, catalog)
    raise InvariantViolation(f"router does not handle {type(stmt).__name__}")


def _lookup(catalog: Catalog, name: str):
    """Catalog entry for a relation, or None for a bare kernel object."""
    if name in catalog:
        return catalog.get(name)
    if catalog.resolve_columns(name) is not None:
        return None  # generated object (base or stage view): plain kernel relation
    raise UnknownRelation(f"no relation named {name!r}")


def _expand_query_stars(select: n.Select, catalog: Catalog) -> n.Select:
    """Expand star-minus items in a user query against the catalog."""
    has_star_minus = any(isinstance(sub, n.StarMinus) for sub in n.walk(select))
    if not has_star_minus:
        return select

    import copy
    select = copy.deepcopy(select)

    def sources_of(sel: n.Select):
        out = {}
        for entry in sel.from_:
            stack = [entry]
            while stack:
                item = stack.pop()
                if isinstance(item, n.Join):
                    stack.extend([item.left, item.right])
                elif isinstance(item, n.TableName):
                    cols = catalog.resolve_columns(item.name)
                    if cols is None:
                        raise UnknownRelation(
                            f"cannot expand star-minus: unknown relation {item.name!r}")
                    out[item.alias or item.name] = cols
        return out

    for sub in n.walk(select):
        if not isinstance(sub, n.Select):
            continue
        if not any(isinstance(i.expr, n.StarMinus) for i in sub.items):
            continue
        from .compiler import expand_star_minus
        col_map = sources_of(sub)
        new_items = []
        for item in sub.items:
            if isinstance(item.expr, n.StarMinus):
                for col in expand_star_minus(item.expr, col_map):
                    new_items.append(n.SelectItem(expr=n.ColumnRef(name=col)))
            else:
                new_items.append(item)
        sub.items = new_items
    return select


def _route_insert(stmt: n.Insert, catalog: Catalog) -> RoutedStatement:
    entry = _lookup(catalog, stmt.table)
    if entry is None or entry.kind != "sir":
        return RoutedStatement(original=stmt, kind=PASS_THROUGH, kernel_stmt=stmt)
    stored = {c.casefold(): c for c in entry.scheme.stored_names}
    inherited = {c.casefold() for c in entry.inherited_names()}

    columns = stmt.columns
    if columns is None and isinstance(stmt.source, n.Select):
        # the paper-style INSERT R (SELECT v AS col, ...) binds by alias
        aliases = [item.alias for item in stmt.source.items]
        if all(aliases):
            columns = aliases
    if columns is None:
        if isinstance(stmt.source, n.ValuesRows):
            arity = len(stmt.source.rows[0])
            if arity != len(stored):
                raise UnknownColumn(
                    f"INSERT into {entry.name} without a column list must supply"
                    f" its {len(stored)} stored attributes, got {arity}")
            columns = entry.scheme.stored_names
        else:
            raise RejectedWrite(
                f"INSERT ... SELECT into {entry.name} needs a column list or"
                " aliases naming stored attributes")
    bound = []
    for col in columns:
        key = col.casefold()
        if key in inherited:
            return RoutedStatement(
                original=stmt, kind=REJECTED,
                reason=f"{entry.name}.{col} is an inherited attribute; it is not writable")
        if key not in stored:
            raise UnknownColumn(f"{entry.name} has no stored attribute {col!r}")
        bound.append(stored[key])
    rewritten = n.Insert(table=entry.plan[0].name, columns=bound, source=stmt.source)
    return RoutedStatement(original=stmt, kind=BASE_REWRITE, kernel_stmt=rewritten,
                           target=entry.plan[0].name, inserted_columns=bound)


def _key_filter(entry, where) -> object:
    """WHERE for the base: keys selected through the full view's predicate."""
    key_cols = entry.scheme.primary_key() or entry.scheme.stored_names
    key_refs = [n.ColumnRef(name=c) for c in key_cols]
    inner = n.Select(items=[n.SelectItem(expr=n.ColumnRef(name=c)) for c in key_cols],
                     from_=[n.TableName(name=entry.name)],
                     where=where)
    operand = key_refs[0] if len(key_refs) == 1 else n.Tuple(items=key_refs)
    return n.InList(operand=operand, items=[n.Subquery(select=inner)])


def _where_touches_inherited(entry, where) -> bool:
    inherited = {c.casefold() for c in entry.inherited_names()}
    for ref in (sub for sub in n.walk(where) if isinstance(sub, n.ColumnRef)):
        if ref.name.casefold() in inherited:
            if ref.table is None or ref.table.casefold() == entry.name.casefold():
                return True
    return False


def _route_update(stmt: n.Update, catalog: Catalog) -> RoutedStatement:
    entry = _lookup(catalog, stmt.table)
    if entry is None or entry.kind != "sir":
        return RoutedStatement(original=stmt, kind=PASS_THROUGH, kernel_stmt=stmt)
    stored = {c.casefold() for c in entry.scheme.stored_names}
    for col, _ in stmt.assignments:
        if col.casefold() not in stored:
            return RoutedStatement(
                original=stmt, kind=REJECTED,
                reason=f"{entry.name}.{col} is not a writable stored attribute"
                       " (inherited attributes cannot be updated)")
    base = entry.plan[0].name
    where = stmt.where
    if where is not None and _where_touches_inherited(entry, where):
        where = _key_filter(entry, where)
    rewritten = n.Update(table=base, assignments=stmt.assignments, where=where)
    return RoutedStatement(original=stmt, kind=BASE_REWRITE, kernel_stmt=rewritten, target=base)


def _route_delete(stmt: n.Delete, catalog: Catalog) -> RoutedStatement:
    entry = _lookup(catalog, stmt.table)
    if entry is None or entry.kind != "sir":
        return RoutedStatement(original=stmt, kind=PASS_THROUGH, kernel_stmt=stmt)
    base = entry.plan[0].name
    where = stmt.where
    if where is not None and _where_touches_inherited(entry, where):
        where = _key_filter(entry, where)
    rewritten = n.Delete(table=base, where=where)
    return RoutedStatement(original=stmt, kind=BASE_REWRITE, kernel_stmt=rewritten, target=base)


# --- integrity checks -------------------------------------------------------


def check_ie_integrity(entry, catalog: Catalog, conn: KernelConnection) -> list[tuple]:
    """Rows whose recursive join matches more than one source tuple.

    For each join-form IE the check counts matches per base key against the
    stage the IE reads (everything produced before it), returning
    (ie_name, key_values, match_count) for every count above one.
    """
    from .compiler import canonicalize, substitute_relation
    from .render import render

    if entry.kind != "sir":
        raise InvariantViolation(f"{entry.name} is not a relation with IEs")
    violations = []
    key_cols = entry.scheme.primary_key() or entry.scheme.stored_names
    produced: list[str] = []
    stage_of = {}
    for pos, ie_name in enumerate(entry.ie_order):
        stage_of[ie_name.casefold()] = pos      # stage index the IE reads (0 = base)
    for ie in entry.scheme.ies:
        index = next(i for i, e in enumerate(entry.scheme.elements)
                     if e.name.casefold() == ie.name.casefold())
        canon = canonicalize(ie, entry.scheme, catalog,
                             produced_so_far=produced, declared_index=index)
        produced.extend(canon.produced_attrs)
        if canon.kind != "join":
            continue
        pos = stage_of[ie.name.casefold()]
        prev = entry.plan[0].name if pos == 0 else f"{entry.name}_{pos}"
        key_items = [n.SelectItem(expr=n.ColumnRef(name=c, table=prev)) for c in key_cols]
        count_item = n.SelectItem(expr=n.Call(func="COUNT", args=[], star=True), alias="n")
        sources = [substitute_relation(t, entry.name, prev) for t in canon.sources]
        preds = []
        for label, src_col, encl_col in canon.join_pairs:
            preds.append(n.Binary(op="=",
                                  left=n.ColumnRef(name=encl_col, table=prev),
                                  right=n.ColumnRef(name=src_col, table=label)))
        if canon.residual is not None:
            preds.append(substitute_relation(canon.residual, entry.name, prev))
        select = n.Select(items=key_items + [count_item],
                          from_=[n.TableName(name=prev)] + sources,
                          where=conjoin(preds),
                          group_by=[n.ColumnRef(name=c, table=prev) for c in key_cols])
        sql = render(n.Query(select=select), conn.render_target).rstrip(";")
        rows = conn.query(f"SELECT * FROM ({sql}) WHERE n > 1")
        for row in rows.rows:
            violations.append((ie.name, tuple(row[:-1]), row[-1]))
    return violations


def enforce_insert_computability(entry, inserted_keys: list[tuple],
                                 conn: KernelConnection) -> None:
    """Strict-integrity mode: the just-inserted rows must have every
    select-form inherited attribute computed (non-NULL).  Runs inside the
    insert's transaction; raising rolls the insert back.

    Value-form attributes are exempt: arithmetic over NULL inputs is
    legitimateNULL propagation, not a failed inheritance.
    """
    from .errors import IaNotComputable
    from .render import quote_ident

    checked = [c for c in entry.columns
               if c.is_inherited and _ie_kind(entry, c.ie_name) in ("join", "subquery")]
    if not checked or not inserted_keys:
        return
    key_cols = entry.scheme.primary_key() or entry.scheme.stored_names
    target = conn.render_target
    key_list = ", ".join(quote_ident(c, target) for c in key_cols)
    operand = f"({key_list})" if len(key_cols) > 1 else key_list
    placeholders = ", ".join(
        "(" + ", ".join("?" for _ in key_cols) + ")" if len(key_cols) > 1 else "?"
        for _ in inserted_keys)
    params = [v for key in inserted_keys for v in (key if len(key_cols) > 1 else key[:1])]
    cols = ", ".join(quote_ident(c.name, target) for c in checked)
    sql = (f"SELECT {key_list}, {cols} FROM {quote_ident(entry.name, target)}"
           f" WHERE {operand} IN ({placeholders})")
    rows = conn.execute(sql, tuple(params))
    failures = []
    for row in rows.rows:
        key = tuple(row[:len(key_cols)])
        for offset, col in enumerate(checked):
            if row[len(key_cols) + offset] is None:
                failures.append((col.ie_name, key))
    if failures:
        raise IaNotComputable(sorted(set(failures)))


def _ie_kind(entry, ie_name: str) -> str:
    ie = entry.scheme.find_ie(ie_name)
    if ie is None:
        return "join"
    if isinstance(ie.form, n.ValueForm):
        return "value"
    select = ie.form.select
    from .compiler import contains_aggregate
    if len(select.items) == 1 and not isinstance(select.items[0].expr, (n.Star, n.StarMinus)) \
            and contains_aggregate(select.items[0].expr):
        return "subquery"
    return "join"
