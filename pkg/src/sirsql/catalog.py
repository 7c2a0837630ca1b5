"""Relation catalog: schemes, dependency graph, and meta-table persistence.

The catalog mirrors, in memory, four dedicated meta-tables kept inside the
kernel database (reserved prefix ``sir_``):

    sir_relations(name, kind, created_at, source_text, plan)
    sir_attrs(rel, ordinal, name, sql_type, is_key, is_inherited, ie_name)
    sir_ies(rel, ordinal, name, source_text, canonical_text)
    sir_deps(src, dst)

Meta rows are written inside the same kernel transaction as the DDL they
describe; the in-memory mirror is updated only after the commit, so any
failure leaves both the kernel and the catalog unchanged.

Concurrency: one writer at a time for mutations, any number of readers.
"""

from __future__ import annotations

import datetime
import json
import re
from dataclasses import dataclass, field

from . import nodes as n
from .errors import (CircularReferenceError, CorruptCatalog, DuplicateName,
                     InvariantViolation, NameCollision, UnknownRelation)
from .parser import parse_one
from .render import render_source

_BASE_SUFFIX = re.compile(r"_B$", re.IGNORECASE)
_STAGE_PATTERN = re.compile(r"^(.+)_(\d+)$")

STORED, VIEW, SIR = "stored", "view", "sir"


@dataclass
class SirScheme:
    """A relation definition: ordered stored attributes and IEs plus keys."""

    name: str
    elements: list                      # AttributeDecl | IeDecl, declared order
    keys: list = field(default_factory=list)          # list of column-name lists, primary first
    foreign_keys: list = field(default_factory=list)  # ForeignKeyClause

    @property
    def stored_attrs(self) -> list[n.AttributeDecl]:
        return [e for e in self.elements if isinstance(e, n.AttributeDecl)]

    @property
    def ies(self) -> list[n.IeDecl]:
        return [e for e in self.elements if isinstance(e, n.IeDecl)]

    @property
    def stored_names(self) -> list[str]:
        return [a.name for a in self.stored_attrs]

    def primary_key(self) -> list[str]:
        return self.keys[0] if self.keys else []

    def find_ie(self, name: str) -> n.IeDecl | None:
        for ie in self.ies:
            if ie.name.casefold() == name.casefold():
                return ie
        return None

    def find_attr(self, name: str) -> n.AttributeDecl | None:
        for attr in self.stored_attrs:
            if attr.name.casefold() == name.casefold():
                return attr
        return None


def scheme_from_ast(stmt: n.CreateSirTable) -> SirScheme:
    elements, keys, fks = [], [], []
    inline_pk = [e.name for e in stmt.elements
                 if isinstance(e, n.AttributeDecl) and e.is_primary_key]
    for element in stmt.elements:
        if isinstance(element, n.PrimaryKeyClause):
            keys.insert(0, list(element.columns))
        elif isinstance(element, n.UniqueClause):
            keys.append(list(element.columns))
        elif isinstance(element, n.ForeignKeyClause):
            fks.append(element)
        else:
            elements.append(element)
    if inline_pk:
        keys.insert(0, inline_pk)
    return SirScheme(name=stmt.name, elements=elements, keys=keys, foreign_keys=fks)


def scheme_to_ast(scheme: SirScheme) -> n.CreateSirTable:
    elements = list(scheme.elements)
    if scheme.keys:
        elements.append(n.PrimaryKeyClause(columns=list(scheme.keys[0])))
        for extra in scheme.keys[1:]:
            elements.append(n.UniqueClause(columns=list(extra)))
    elements.extend(scheme.foreign_keys)
    return n.CreateSirTable(name=scheme.name, elements=elements)


@dataclass
class ColumnInfo:
    name: str
    sql_type: str | None
    is_key: bool
    is_inherited: bool
    ie_name: str | None


@dataclass
class PlanItem:
    name: str
    kind: str       # 'table' | 'view'
    sql: str


@dataclass
class CatalogEntry:
    name: str
    kind: str                            # stored | view | sir
    scheme: SirScheme | None
    columns: list                        # ColumnInfo, full declared order
    plan: list = field(default_factory=list)          # PlanItem; definitional DDL
    references: list = field(default_factory=list)    # relation names this entry reads
    canonical_texts: dict = field(default_factory=dict)  # ie name -> canonical SQL text
    ie_order: list = field(default_factory=list)      # IE names in evaluation order
    source_text: str = ""

    @property
    def kernel_objects(self) -> list[str]:
        return [item.name for item in self.plan]

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def inherited_names(self) -> list[str]:
        return [c.name for c in self.columns if c.is_inherited]

    def stored_names(self) -> list[str]:
        return [c.name for c in self.columns if not c.is_inherited]


def referenced_relations(node) -> list[str]:
    """Relation names read by a select or expression, in first-use order."""
    seen, out = set(), []
    for sub in n.walk(node):
        if isinstance(sub, n.TableName):
            key = sub.name.casefold()
            if key not in seen:
                seen.add(key)
                out.append(sub.name)
    return out


def ie_references(ie: n.IeDecl, enclosing: str) -> list[str]:
    """Relations an IE inherits from, excluding self-inheritance."""
    refs = []
    if isinstance(ie.form, n.SelectForm):
        refs = referenced_relations(ie.form.select)
    else:
        for _, expr in ie.form.items:
            refs.extend(referenced_relations(expr))
    out, seen = [], set()
    for ref in refs:
        key = ref.casefold()
        if key == enclosing.casefold() or key in seen:
            continue
        seen.add(key)
        out.append(ref)
    return out


class Catalog:
    """In-memory mirror of the meta-tables, plus the dependency graph."""

    def __init__(self):
        self._entries: dict[str, CatalogEntry] = {}   # casefold name -> entry
        self._order: list[str] = []                   # registration order (casefold)
        self._edges: list[tuple[str, str]] = []       # (src, dst) casefold, insert order

    # --- lookups ---

    def __contains__(self, name: str) -> bool:
        return name.casefold() in self._entries

    def get(self, name: str) -> CatalogEntry:
        entry = self._entries.get(name.casefold())
        if entry is None:
            raise UnknownRelation(f"no relation named {name!r}")
        return entry

    def entries(self) -> list[CatalogEntry]:
        return [self._entries[key] for key in self._order]

    def owner_of_object(self, name: str) -> CatalogEntry | None:
        """Entry whose kernel plan produced the named object, if any."""
        key = name.casefold()
        for entry in self._entries.values():
            for item in entry.plan:
                if item.name.casefold() == key and item.name.casefold() != entry.name.casefold():
                    return entry
        return None

    def resolve_columns(self, name: str) -> list[str] | None:
        """Columns of a registered relation or of a generated kernel object."""
        key = name.casefold()
        if key in self._entries:
            return self._entries[key].column_names
        owner = self.owner_of_object(name)
        if owner is None or owner.scheme is None:
            return None
        if _BASE_SUFFIX.search(name):
            return owner.scheme.stored_names
        stage = _STAGE_PATTERN.match(name)
        if stage:
            # stage views carry stored attrs plus the outputs of the first
            # `upto` IEs in evaluation order
            upto = int(stage.group(2))
            produced = []
            for ie_name in owner.ie_order[:upto]:
                produced.extend(c.name for c in owner.columns if c.ie_name == ie_name)
            return owner.scheme.stored_names + produced
        return None

    def dependents_of(self, name: str) -> list[str]:
        key = name.casefold()
        if key not in self._entries and self.owner_of_object(name) is None:
            raise UnknownRelation(f"no relation named {name!r}")
        out, seen = [], set()
        for src, dst in self._edges:
            if dst == key and src not in seen:
                seen.add(src)
                out.append(self._entries[src].name)
        return out

    def blocking_dependents(self, name: str) -> list[str]:
        """Dependents of the relation or of any kernel object it generates."""
        entry = self.get(name)
        targets = {entry.name.casefold()} | {o.casefold() for o in entry.kernel_objects}
        out, seen = [], set()
        for src, dst in self._edges:
            if dst in targets and src not in seen and src != entry.name.casefold():
                seen.add(src)
                out.append(self._entries[src].name)
        return out

    def transitive_dependents(self, name: str) -> list[str]:
        """Dependents closed transitively, in breadth-first registration order."""
        out, seen = [], {name.casefold()}
        frontier = [name]
        while frontier:
            nxt = []
            for item in frontier:
                try:
                    direct = self.blocking_dependents(item) if item.casefold() in self._entries \
                        else self.dependents_of(item)
                except UnknownRelation:
                    continue
                for dep in direct:
                    if dep.casefold() not in seen:
                        seen.add(dep.casefold())
                        out.append(dep)
                        nxt.append(dep)
            frontier = nxt
        return out

    # --- validation ---

    def check_name_free(self, name: str):
        key = name.casefold()
        if key in self._entries:
            raise DuplicateName(f"relation {name!r} already exists")
        if key.startswith("sir_"):
            raise NameCollision(f"{name!r}: the sir_ prefix is reserved for meta-tables")
        if _BASE_SUFFIX.search(name):
            raise NameCollision(f"{name!r}: names ending in _B are reserved for base tables")
        stage = _STAGE_PATTERN.match(name)
        if stage and stage.group(1).casefold() in self._entries \
                and self._entries[stage.group(1).casefold()].kind == SIR:
            raise NameCollision(f"{name!r} matches a view-stage name of {stage.group(1)}")

    def validate_scheme(self, scheme: SirScheme):
        if not scheme.stored_attrs:
            raise InvariantViolation(f"{scheme.name}: at least one stored attribute is required")
        names = set()
        for element in scheme.elements:
            key = element.name.casefold()
            if key in names:
                raise InvariantViolation(f"{scheme.name}: duplicate name {element.name!r}")
            names.add(key)
        stored = {a.casefold() for a in scheme.stored_names}
        for key_cols in scheme.keys:
            for col in key_cols:
                if col.casefold() not in stored:
                    raise InvariantViolation(
                        f"{scheme.name}: key column {col!r} is not a stored attribute")
        if scheme.ies and not scheme.keys:
            raise InvariantViolation(
                f"{scheme.name}: a relation with IEs needs a primary key (its base must be duplicate-free)")

    def check_acyclic(self, name: str, references: list[str]):
        """Raise CircularReferenceError if adding name->references closes a cycle."""
        adjacency: dict[str, list[str]] = {}
        for src, dst in self._edges:
            adjacency.setdefault(src, []).append(dst)
        key = name.casefold()
        adjacency[key] = [r.casefold() for r in references if r.casefold() != key]

        path: list[str] = []
        on_path: set[str] = set()
        done: set[str] = set()

        def visit(node):
            if node in done:
                return None
            if node in on_path:
                return path[path.index(node):]
            on_path.add(node)
            path.append(node)
            for succ in adjacency.get(node, ()):
                cycle = visit(succ)
                if cycle is not None:
                    return cycle
            path.pop()
            on_path.discard(node)
            done.add(node)
            return None

        cycle = visit(key)
        if cycle is not None:
            display = [self._entries[c].name if c in self._entries else c for c in cycle]
            raise CircularReferenceError(display)

    # --- persistence ---

    META_DDL = (
        """CREATE TABLE IF NOT EXISTS sir_relations (
            name TEXT PRIMARY KEY, kind TEXT NOT NULL, created_at TEXT NOT NULL,
            source_text TEXT NOT NULL, plan TEXT NOT NULL)""",
        """CREATE TABLE IF NOT EXISTS sir_attrs (
            rel TEXT NOT NULL, ordinal INTEGER NOT NULL, name TEXT NOT NULL,
            sql_type TEXT, is_key INTEGER NOT NULL, is_inherited INTEGER NOT NULL,
            ie_name TEXT, PRIMARY KEY (rel, ordinal))""",
        """CREATE TABLE IF NOT EXISTS sir_ies (
            rel TEXT NOT NULL, ordinal INTEGER NOT NULL, name TEXT NOT NULL,
            source_text TEXT NOT NULL, canonical_text TEXT NOT NULL,
            PRIMARY KEY (rel, ordinal))""",
        """CREATE TABLE IF NOT EXISTS sir_deps (
            src TEXT NOT NULL, dst TEXT NOT NULL)""",
    )

    def ensure_meta(self, conn):
        for ddl in self.META_DDL:
            conn.execute(ddl)

    def persist(self, entry: CatalogEntry, conn):
        """Write an entry's meta rows; call inside the DDL's transaction."""
        now = datetime.datetime.now(datetime.timezone.utc).isoformat()
        plan_json = json.dumps([[i.name, i.kind, i.sql] for i in entry.plan])
        conn.execute(
            "INSERT INTO sir_relations (name, kind, created_at, source_text, plan)"
            " VALUES (?, ?, ?, ?, ?)",
            (entry.name, entry.kind, now, entry.source_text, plan_json))
        self._persist_details(entry, conn)

    def _persist_details(self, entry: CatalogEntry, conn):
        for ordinal, col in enumerate(entry.columns):
            conn.execute(
                "INSERT INTO sir_attrs VALUES (?, ?, ?, ?, ?, ?, ?)",
                (entry.name, ordinal, col.name, col.sql_type,
                 int(col.is_key), int(col.is_inherited), col.ie_name))
        if entry.scheme is not None:
            # ordinal records evaluation order, which may differ from declaration
            ordered = entry.ie_order or [ie.name for ie in entry.scheme.ies]
            for ordinal, ie_name in enumerate(ordered):
                ie = entry.scheme.find_ie(ie_name)
                conn.execute(
                    "INSERT INTO sir_ies VALUES (?, ?, ?, ?, ?)",
                    (entry.name, ordinal, ie.name, render_source(ie),
                     entry.canonical_texts.get(ie.name, "")))
        for ref in entry.references:
            conn.execute("INSERT INTO sir_deps VALUES (?, ?)", (entry.name, ref))

    def persist_replace(self, entry: CatalogEntry, conn):
        """Rewrite an entry's meta rows after an alteration."""
        plan_json = json.dumps([[i.name, i.kind, i.sql] for i in entry.plan])
        conn.execute(
            "UPDATE sir_relations SET kind = ?, source_text = ?, plan = ? WHERE lower(name) = lower(?)",
            (entry.kind, entry.source_text, plan_json, entry.name))
        for table in ("sir_attrs", "sir_ies"):
            conn.execute(f"DELETE FROM {table} WHERE lower(rel) = lower(?)", (entry.name,))
        conn.execute("DELETE FROM sir_deps WHERE lower(src) = lower(?)", (entry.name,))
        self._persist_details(entry, conn)

    def persist_remove(self, name: str, conn):
        conn.execute("DELETE FROM sir_relations WHERE lower(name) = lower(?)", (name,))
        for table in ("sir_attrs", "sir_ies"):
            conn.execute(f"DELETE FROM {table} WHERE lower(rel) = lower(?)", (name,))
        conn.execute("DELETE FROM sir_deps WHERE lower(src) = lower(?)", (name,))

    def copy(self) -> "Catalog":
        """Shallow working copy for what-if compilation during alters."""
        clone = Catalog()
        clone._entries = dict(self._entries)
        clone._order = list(self._order)
        clone._edges = list(self._edges)
        return clone

    # --- in-memory mutation (after the kernel commit) ---

    def attach(self, entry: CatalogEntry):
        key = entry.name.casefold()
        if key not in self._entries:
            self._order.append(key)
        else:
            self._edges = [(s, d) for s, d in self._edges if s != key]
        self._entries[key] = entry
        for ref in entry.references:
            self._edges.append((key, ref.casefold()))

    def detach(self, name: str):
        key = name.casefold()
        self._entries.pop(key, None)
        if key in self._order:
            self._order.remove(key)
        self._edges = [(s, d) for s, d in self._edges if s != key]

    # --- loading ---

    @classmethod
    def load(cls, conn) -> "Catalog":
        """Rebuild the catalog from meta-tables; raises CorruptCatalog on bad rows."""
        catalog = cls()
        if conn.object_kind("sir_relations") is None:
            return catalog
        relations = conn.query(
            "SELECT name, kind, source_text, plan FROM sir_relations ORDER BY rowid")
        deps = conn.query("SELECT src, dst FROM sir_deps ORDER BY rowid")
        dep_map: dict[str, list[str]] = {}
        for src, dst in deps.rows:
            dep_map.setdefault(src.casefold(), []).append(dst)
        for name, kind, source_text, plan_json in relations.rows:
            try:
                plan = [PlanItem(*item) for item in json.loads(plan_json)]
            except (TypeError, ValueError) as exc:
                raise CorruptCatalog(f"{name}: unreadable plan: {exc}") from exc
            for item in plan:
                if conn.object_kind(item.name) is None:
                    raise CorruptCatalog(
                        f"{name}: kernel object {item.name!r} recorded in the catalog is missing")
            attrs = conn.execute(
                "SELECT name, sql_type, is_key, is_inherited, ie_name FROM sir_attrs"
                " WHERE rel = ? ORDER BY ordinal", (name,))
            columns = [ColumnInfo(a[0], a[1], bool(a[2]), bool(a[3]), a[4]) for a in attrs.rows]
            scheme = None
            canonical = {}
            ie_order = []
            if kind in (STORED, SIR):
                try:
                    stmt = parse_one(source_text)
                except Exception as exc:
                    raise CorruptCatalog(f"{name}: unparseable source text: {exc}") from exc
                if not isinstance(stmt, n.CreateSirTable):
                    raise CorruptCatalog(f"{name}: source text is not a table definition")
                scheme = scheme_from_ast(stmt)
                ies = conn.execute(
                    "SELECT name, canonical_text FROM sir_ies WHERE rel = ? ORDER BY ordinal",
                    (name,))
                recorded = {row[0].casefold() for row in ies.rows}
                declared = {ie.name.casefold() for ie in scheme.ies}
                if recorded != declared:
                    raise CorruptCatalog(f"{name}: sir_ies rows do not match the declared IEs")
                canonical = {row[0]: row[1] for row in ies.rows}
                ie_order = [row[0] for row in ies.rows]
                declared_cols = {a.name.casefold() for a in scheme.stored_attrs}
                stored_cols = {c.name.casefold() for c in columns if not c.is_inherited}
                if declared_cols != stored_cols:
                    raise CorruptCatalog(f"{name}: sir_attrs rows do not match the declared scheme")
            entry = CatalogEntry(
                name=name, kind=kind, scheme=scheme, columns=columns, plan=plan,
                references=dep_map.get(name.casefold(), []),
                canonical_texts=canonical, ie_order=ie_order, source_text=source_text)
            catalog.attach(entry)
        return catalog

    def snapshot(self):
        """Structure suitable for equality comparison across persist/load."""
        return {
            key: (entry.name, entry.kind, entry.source_text,
                  [(c.name, c.sql_type, c.is_key, c.is_inherited, c.ie_name)
                   for c in entry.columns],
                  [(i.name, i.kind, i.sql) for i in entry.plan],
                  [r.casefold() for r in entry.references],
                  list(entry.ie_order))
            for key, entry in self._entries.items()
        }
