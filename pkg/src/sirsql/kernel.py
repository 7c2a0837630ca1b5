"""Adapter for the embedded relational kernel engine.

The reference binding is sqlite3 (single file or in-memory).  The adapter
adds no semantics of its own: SQL handed to `execute` runs verbatim, with
engine errors wrapped in KernelError carrying the originating statement.

Capabilities are probed once at open with pure SELECT statements (no
objects are ever created), so probing is side-effect-free.  The probed set
is immutable for the connection's lifetime.

Decimal note: the engine's Round(x, d) is round-half-away-from-zero.

Concurrency: a connection is used by one thread at a time; writers
serialize through one connection.
"""

from __future__ import annotations

import sqlite3
from dataclasses import dataclass

from .errors import KernelError, UnknownObject
from .render import RenderTarget


@dataclass
class RowSet:
    columns: list[str]
    rows: list[tuple]

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> list:
        idx = [c.casefold() for c in self.columns].index(name.casefold())
        return [row[idx] for row in self.rows]


_PROBES = {
    "left_join": "SELECT b.x FROM (SELECT 1 AS x) a LEFT JOIN (SELECT 2 AS x) b ON a.x = b.x",
    "scalar_subquery": "SELECT (SELECT 1)",
    "string_aggregation": "SELECT group_concat(x, '; ') FROM (SELECT 'a' AS x)",
    "conditional": "SELECT iif(1, 1, 0)",
}


class KernelConnection:
    """One open kernel database plus its probed capability set."""

    def __init__(self, location: str = ":memory:"):
        self.location = location
        self._db = sqlite3.connect(location)
        self._db.isolation_level = None  # explicit BEGIN/COMMIT
        self._db.execute("PRAGMA legacy_alter_table=ON")  # renames must not rewrite view bodies
        self._in_transaction = False
        self.capabilities = frozenset(
            name for name, sql in _PROBES.items() if self._probe(sql))
        self.render_target = RenderTarget(
            quoting="double",
            limit_style="limit",
            string_agg_func="group_concat" if "string_aggregation" in self.capabilities else None,
            conditional_func="iif" if "conditional" in self.capabilities else None,
        )

    def _probe(self, sql: str) -> bool:
        try:
            self._db.execute(sql).fetchall()
            return True
        except sqlite3.Error:
            return False

    def close(self):
        self._db.close()

    # --- execution ---

    def execute(self, sql: str, params=(), origin: str | None = None):
        """Run kernel-dialect SQL.

        Queries return a RowSet; DDL/DML return the affected-row count.
        `origin` is the sirsql-layer statement attached to error reports.
        """
        before = self._db.total_changes
        try:
            cursor = self._db.execute(sql, params)
        except sqlite3.Error as exc:
            raise KernelError(f"{type(exc).__name__}: {exc}", origin or sql) from exc
        if cursor.description is not None:
            columns = [d[0] for d in cursor.description]
            return RowSet(columns=columns, rows=[tuple(r) for r in cursor.fetchall()])
        return self._db.total_changes - before

    def query(self, sql: str, origin: str | None = None) -> RowSet:
        result = self.execute(sql, origin=origin)
        if not isinstance(result, RowSet):
            raise KernelError("statement did not produce rows", origin or sql)
        return result

    # --- transactions ---

    def within_transaction(self, work):
        """Run `work(conn)`; commit everything or roll back everything."""
        if self._in_transaction:
            raise KernelError("transaction already open on this connection")
        self._db.execute("BEGIN")
        self._in_transaction = True
        try:
            result = work(self)
        except BaseException:
            self._db.execute("ROLLBACK")
            raise
        else:
            self._db.execute("COMMIT")
            return result
        finally:
            self._in_transaction = False

    # --- introspection ---

    def object_kind(self, name: str) -> str | None:
        rows = self._db.execute(
            "SELECT type FROM sqlite_master WHERE lower(name) = lower(?)", (name,)).fetchall()
        return rows[0][0] if rows else None

    def object_names(self) -> list[str]:
        rows = self._db.execute(
            "SELECT name FROM sqlite_master WHERE type IN ('table','view') ORDER BY name").fetchall()
        return [r[0] for r in rows]

    def introspect(self, object_name: str) -> list[str]:
        """Ordered column names of a table or view, as the engine reports them."""
        try:
            rows = self._db.execute(f'PRAGMA table_info("{object_name}")').fetchall()
        except sqlite3.Error as exc:
            raise KernelError(f"{type(exc).__name__}: {exc}") from exc
        if not rows:
            raise UnknownObject(f"no table or view named {object_name!r}")
        return [r[1] for r in rows]
