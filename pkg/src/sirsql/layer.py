"""The middleware session: executes dialect statements over one kernel DB.

Every DDL statement is one atomic unit: the generated kernel DDL and the
catalog meta-rows commit together or not at all, and the in-memory catalog
is only updated after the commit.  Queries and DML go through the router.

DDL mutations are serialized by a lock (single writer); reads can come
from any number of threads as long as each uses its own connection.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from . import nodes as n
from .catalog import (SIR, STORED, VIEW, Catalog, CatalogEntry, ColumnInfo,
                      PlanItem, ie_references, referenced_relations,
                      scheme_from_ast, scheme_to_ast)
from .compiler import (CompileOptions, alter_steps, apply_alter, compile_index,
                       compile_sir, plan_drop, rewrite_to_base)
from .errors import (CircularReferenceError, InvariantViolation, NameCollision,
                     RejectedWrite, UnknownRelation)
from .kernel import KernelConnection, RowSet
from .parser import parse
from .render import render, render_source
from .router import (BASE_REWRITE, REJECTED, check_ie_integrity,
                     enforce_insert_computability, route)


@dataclass
class StatementResult:
    statement: object
    action: str
    objects: list = field(default_factory=list)     # kernel objects created/dropped
    rowcount: int | None = None
    rows: RowSet | None = None
    warnings: list = field(default_factory=list)


class SirLayer:
    def __init__(self, conn: KernelConnection,
                 options: CompileOptions | None = None,
                 strict_integrity: bool = False):
        self.conn = conn
        self.options = options or CompileOptions()
        self.strict_integrity = strict_integrity
        self.catalog = Catalog.load(conn)
        self._ddl_lock = threading.Lock()

    @property
    def target(self):
        return self.conn.render_target

    # --- entry points ---

    def apply_source(self, text: str) -> list[StatementResult]:
        """Parse and execute statements in order, each in its own atomic unit."""
        return [self.apply_statement(stmt) for stmt in parse(text)]

    def apply_statement(self, stmt) -> StatementResult:
        if isinstance(stmt, n.CreateSirTable):
            return self._create_table(stmt)
        if isinstance(stmt, n.CreateView):
            return self._create_view(stmt)
        if isinstance(stmt, n.AlterTable):
            return self._alter_table(stmt)
        if isinstance(stmt, n.DropTable):
            return self._drop(stmt.name, stmt.mode, expect_view=False)
        if isinstance(stmt, n.DropView):
            return self._drop(stmt.name, "restrict", expect_view=True)
        if isinstance(stmt, n.CreateIndex):
            return self._create_index(stmt)
        if isinstance(stmt, n.Query):
            routed = route(stmt, self.catalog)
            rows = self.conn.query(render(routed.kernel_stmt, self.target),
                                   origin=render_source(stmt))
            return StatementResult(stmt, "query", rows=rows, warnings=stmt.warnings)
        if isinstance(stmt, (n.Insert, n.Update, n.Delete)):
            return self._dml(stmt)
        raise InvariantViolation(f"unsupported statement {type(stmt).__name__}")

    def query(self, sql: str) -> RowSet:
        stmts = parse(sql)
        if len(stmts) != 1 or not isinstance(stmts[0], n.Query):
            raise InvariantViolation("expected exactly one SELECT statement")
        return self.apply_statement(stmts[0]).rows

    def explain(self, name: str) -> list[str]:
        """The stored kernel plan of a relation, one DDL statement per entry."""
        return [item.sql for item in self.catalog.get(name).plan]

    def check(self, name: str) -> list[tuple]:
        return check_ie_integrity(self.catalog.get(name), self.catalog, self.conn)

    # --- DDL ---

    def _check_kernel_name_free(self, names: list[str]):
        for name in names:
            if self.conn.object_kind(name) is not None:
                raise NameCollision(f"kernel object {name!r} already exists")

    def _probe_view(self, conn, name: str, origin: str):
        # the engine only resolves a view body on first use; force that now so
        # a bad definition fails inside this transaction, not at query time
        from .render import quote_ident
        conn.execute(f"SELECT * FROM {quote_ident(name, self.target)} LIMIT 0",
                     origin=origin)

    def _resolve_references(self, scheme) -> list[str]:
        refs = []
        for ie in scheme.ies:
            for ref in ie_references(ie, scheme.name):
                if self.catalog.resolve_columns(ref) is None:
                    raise UnknownRelation(
                        f"IE {ie.name} in {scheme.name} references unknown relation {ref!r}")
                if ref.casefold() not in {r.casefold() for r in refs}:
                    refs.append(ref)
        return refs

    def _apply_rewrite_to_base(self, scheme):
        """With the option on, rewrite cycle-closing IE references to bases."""
        refs = self._resolve_references(scheme)
        try:
            self.catalog.check_acyclic(scheme.name, refs)
            return scheme
        except CircularReferenceError:
            if not self.options.rewrite_to_base:
                raise
        for index, element in enumerate(scheme.elements):
            if not isinstance(element, n.IeDecl):
                continue
            offenders = []
            for ref in ie_references(element, scheme.name):
                if ref in self.catalog and self._reaches(ref, scheme.name):
                    offenders.append(ref)
            if offenders:
                scheme.elements[index] = rewrite_to_base(
                    element, scheme.name, self.catalog, offenders)
        refs = self._resolve_references(scheme)
        self.catalog.check_acyclic(scheme.name, refs)
        return scheme

    def _reaches(self, start: str, goal: str) -> bool:
        frontier, seen = [start.casefold()], set()
        goal = goal.casefold()
        while frontier:
            node = frontier.pop()
            if node == goal:
                return True
            if node in seen:
                continue
            seen.add(node)
            for src, dst in self.catalog._edges:
                if src == node:
                    frontier.append(dst)
        return False

    def _entry_from_compiled(self, compiled, kind: str) -> CatalogEntry:
        return CatalogEntry(
            name=compiled.scheme.name, kind=kind, scheme=compiled.scheme,
            columns=compiled.columns, plan=compiled.plan.items,
            references=compiled.references, canonical_texts=compiled.canonical_texts,
            ie_order=compiled.ie_order,
            source_text=render_source(scheme_to_ast(compiled.scheme)))

    def _create_table(self, stmt: n.CreateSirTable) -> StatementResult:
        with self._ddl_lock:
            self.catalog.check_name_free(stmt.name)
            scheme = scheme_from_ast(stmt)
            self.catalog.validate_scheme(scheme)
            scheme = self._apply_rewrite_to_base(scheme)
            compiled = compile_sir(scheme, self.catalog, self.options, self.target)
            self._check_kernel_name_free([i.name for i in compiled.plan.items])
            entry = self._entry_from_compiled(compiled, SIR if scheme.ies else STORED)

            def work(conn):
                self.catalog.ensure_meta(conn)
                for item in compiled.plan.items:
                    conn.execute(item.sql, origin=render_source(stmt))
                    if item.kind == "view":
                        self._probe_view(conn, item.name, render_source(stmt))
                self.catalog.persist(entry, conn)

            self.conn.within_transaction(work)
            self.catalog.attach(entry)
            return StatementResult(stmt, "create table",
                                   objects=[i.name for i in compiled.plan.items],
                                   warnings=stmt.warnings)

    def _create_view(self, stmt: n.CreateView) -> StatementResult:
        with self._ddl_lock:
            self.catalog.check_name_free(stmt.name)
            refs = []
            for ref in referenced_relations(stmt.select):
                if self.catalog.resolve_columns(ref) is None:
                    raise UnknownRelation(f"view {stmt.name} references unknown relation {ref!r}")
                refs.append(ref)
            self.catalog.check_acyclic(stmt.name, refs)
            routed = route(n.Query(select=stmt.select), self.catalog)
            kernel_stmt = n.CreateView(name=stmt.name, select=routed.kernel_stmt.select)
            sql = render(kernel_stmt, self.target)
            self._check_kernel_name_free([stmt.name])

            def work(conn):
                self.catalog.ensure_meta(conn)
                conn.execute(sql, origin=render_source(stmt))
                self._probe_view(conn, stmt.name, render_source(stmt))
                columns = [ColumnInfo(c, None, False, True, None)
                           for c in conn.introspect(stmt.name)]
                entry = CatalogEntry(
                    name=stmt.name, kind=VIEW, scheme=None, columns=columns,
                    plan=[PlanItem(stmt.name, "view", sql)],
                    references=refs, source_text=render_source(stmt))
                self.catalog.persist(entry, conn)
                return entry

            entry = self.conn.within_transaction(work)
            self.catalog.attach(entry)
            return StatementResult(stmt, "create view", objects=[stmt.name],
                                   warnings=stmt.warnings)

    def _alter_table(self, stmt: n.AlterTable) -> StatementResult:
        with self._ddl_lock:
            entry = self.catalog.get(stmt.name)
            if entry.kind == VIEW:
                raise InvariantViolation(
                    f"{entry.name} is a view; drop it and recreate (or create a table)")
            new_scheme = apply_alter(entry.scheme, stmt.action, self.catalog)
            self.catalog.validate_scheme(new_scheme)
            new_scheme = self._apply_rewrite_to_base(new_scheme)

            scratch = self.catalog.copy()
            scratch.detach(entry.name)
            compiled = compile_sir(new_scheme, scratch, self.options, self.target)
            new_entry = self._entry_from_compiled(compiled, SIR if new_scheme.ies else STORED)
            steps = alter_steps(entry, compiled, self.target)
            scratch.attach(new_entry)

            updates = [(entry, new_entry, steps)]
            updates.extend(self._dependent_recompiles(entry.name, new_entry, scratch))

            def work(conn):
                self.catalog.ensure_meta(conn)
                for old, new, maintenance in updates:
                    for item in maintenance:
                        conn.execute(item.sql, origin=render_source(stmt))
                        if item.sql.upper().startswith("CREATE VIEW"):
                            self._probe_view(conn, item.name, render_source(stmt))
                    self.catalog.persist_replace(new, conn)

            self.conn.within_transaction(work)
            for _, new, _ in updates:
                self.catalog.attach(new)
            return StatementResult(stmt, "alter table",
                                   objects=[i.name for i in compiled.plan.items],
                                   warnings=stmt.warnings)

    def _dependent_recompiles(self, changed: str, new_entry, scratch):
        """Recompile dependents whose IEs star over a changed relation, so they
        inherit added or dropped attributes automatically; cascades while
        column lists keep changing."""
        from .compiler import recompile_steps
        updates = []
        changed_set = {changed.casefold()}
        frontier = [changed]
        while frontier:
            current = frontier.pop(0)
            for dep_name in self.catalog.dependents_of(current):
                if dep_name.casefold() in changed_set:
                    continue
                dep = scratch.get(dep_name)
                if dep.kind != SIR or not self._stars_over(dep, current):
                    continue
                recompiled = compile_sir(dep.scheme, scratch, self.options, self.target)
                new_dep = self._entry_from_compiled(recompiled, SIR)
                steps = recompile_steps(dep, recompiled, self.target)
                scratch.attach(new_dep)
                updates.append((dep, new_dep, steps))
                changed_set.add(dep_name.casefold())
                if [c.name for c in new_dep.columns] != [c.name for c in dep.columns]:
                    frontier.append(dep_name)
        return updates

    def _stars_over(self, entry, relation: str) -> bool:
        for ie in entry.scheme.ies:
            if not isinstance(ie.form, n.SelectForm):
                continue
            sources = {t.name.casefold() for t in ie.form.select.from_
                       if isinstance(t, n.TableName)}
            if relation.casefold() not in sources:
                continue
            if any(isinstance(i.expr, (n.Star, n.StarMinus)) for i in ie.form.select.items):
                return True
        return False

    def _drop(self, name: str, mode: str, expect_view: bool) -> StatementResult:
        with self._ddl_lock:
            plans = plan_drop(name, mode, self.catalog, self.target, expect_view=expect_view)
            dropped = []

            def work(conn):
                for entry, steps in plans:
                    for item in steps:
                        conn.execute(item.sql)
                        dropped.append(item.name)
                    self.catalog.persist_remove(entry.name, conn)

            self.conn.within_transaction(work)
            for entry, _ in plans:
                self.catalog.detach(entry.name)
            return StatementResult(None, "drop", objects=dropped)

    def _create_index(self, stmt: n.CreateIndex) -> StatementResult:
        with self._ddl_lock:
            plan = compile_index(stmt, self.catalog, self.target)
            for item in plan.items:
                self.conn.execute(item.sql, origin=render_source(stmt))
            return StatementResult(stmt, "create index",
                                   objects=[i.name for i in plan.items])

    # --- DML ---

    def _dml(self, stmt) -> StatementResult:
        routed = route(stmt, self.catalog)
        origin = render_source(stmt)
        if routed.kind == REJECTED:
            raise RejectedWrite(routed.reason)
        sql = render(routed.kernel_stmt, self.target)
        if (routed.kind == BASE_REWRITE and isinstance(stmt, n.Insert)
                and self.strict_integrity):
            entry = self.catalog.get(stmt.table)
            key_cols = entry.scheme.primary_key() or entry.scheme.stored_names
            returning = ", ".join(
                f'"{c}"' if self.target.quoting == "double" else c for c in key_cols)
            returning_sql = sql.rstrip(";") + f" RETURNING {returning}"

            def work(conn):
                result = conn.execute(returning_sql, origin=origin)
                keys = [tuple(row) for row in result.rows] if isinstance(result, RowSet) else []
                enforce_insert_computability(entry, keys, conn)
                return len(keys)

            count = self.conn.within_transaction(work)
            return StatementResult(stmt, "insert", rowcount=count, warnings=stmt.warnings)
        count = self.conn.execute(sql, origin=origin)
        action = type(stmt).__name__.lower()
        return StatementResult(stmt, action, rowcount=count, warnings=stmt.warnings)
