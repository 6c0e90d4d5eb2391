# database.py
"""Run-archief voor PI-RRHT* experimenten — lokale SQLite."""

import os
import sqlite3
from datetime import datetime, timezone

DEFAULT_DB = os.getenv("PIRRHT_DB", "pirrht_runs.db")


def _connect(db_path: str = DEFAULT_DB) -> sqlite3.Connection:
    conn = sqlite3.connect(db_path)
    conn.row_factory = sqlite3.Row
    conn.execute("PRAGMA journal_mode=WAL")
    return conn


_SCHEMA = [
    """CREATE TABLE IF NOT EXISTS plans (
        id INTEGER PRIMARY KEY AUTOINCREMENT,
        scenario TEXT NOT NULL, seed INTEGER NOT NULL, iters INTEGER NOT NULL,
        vertices INTEGER DEFAULT 0, edges INTEGER DEFAULT 0,
        tree_file TEXT DEFAULT '', created_at TEXT NOT NULL
    )""",
    """CREATE TABLE IF NOT EXISTS runs (
        id INTEGER PRIMARY KEY AUTOINCREMENT,
        scenario TEXT NOT NULL, seed INTEGER NOT NULL, run_index INTEGER NOT NULL,
        b REAL, n_samples INTEGER,
        reached_goal INTEGER NOT NULL, realized_cost REAL, steps INTEGER DEFAULT 0,
        realized_class INTEGER DEFAULT -1, final_class TEXT DEFAULT '',
        reason TEXT DEFAULT '', summary_file TEXT DEFAULT '',
        created_at TEXT NOT NULL,
        UNIQUE(scenario, seed, run_index, b, n_samples)
    )""",
]


def init_db(db_path: str = DEFAULT_DB):
    conn = _connect(db_path)
    for sql in _SCHEMA:
        conn.execute(sql)
    conn.commit()
    conn.close()


def log_plan(db_path: str, scenario: str, seed: int, iters: int,
             vertices: int, edges: int, tree_file: str = "") -> None:
    now = datetime.now(timezone.utc).isoformat()
    conn = _connect(db_path)
    conn.execute(
        "INSERT INTO plans (scenario, seed, iters, vertices, edges, tree_file, created_at) "
        "VALUES (?, ?, ?, ?, ?, ?, ?)",
        [scenario, seed, iters, vertices, edges, tree_file, now],
    )
    conn.commit()
    conn.close()


def get_plans(db_path: str = DEFAULT_DB, scenario: str | None = None) -> list[dict]:
    conn = _connect(db_path)
    if scenario:
        rows = conn.execute("SELECT * FROM plans WHERE scenario = ? ORDER BY id", [scenario]).fetchall()
    else:
        rows = conn.execute("SELECT * FROM plans ORDER BY id").fetchall()
    conn.close()
    return [dict(r) for r in rows]


def insert_runs(db_path: str, runs: list[dict], scenario: str) -> int:
    """Sla run-samenvattingen op; een herhaalde (scenario, seed, run, b, N) overschrijft."""
    now = datetime.now(timezone.utc).isoformat()
    sql = """INSERT INTO runs (scenario, seed, run_index, b, n_samples, reached_goal,
                 realized_cost, steps, realized_class, final_class, reason, summary_file, created_at)
             VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
             ON CONFLICT(scenario, seed, run_index, b, n_samples) DO UPDATE SET
                 reached_goal = excluded.reached_goal, realized_cost = excluded.realized_cost,
                 steps = excluded.steps, realized_class = excluded.realized_class,
                 final_class = excluded.final_class, reason = excluded.reason,
                 summary_file = excluded.summary_file, created_at = excluded.created_at"""
    conn = _connect(db_path)
    inserted = 0
    for r in runs:
        cost = r.get("realized_cost")
        conn.execute(sql, [
            scenario, int(r["seed"]), int(r["run"]), r.get("b"), r.get("n_samples"),
            int(bool(r["reached_goal"])),
            None if cost is None or cost == float("inf") else float(cost),
            int(r.get("steps", 0)), int(r.get("realized_class", -1)),
            r.get("final_class") or "", r.get("reason") or "", r.get("summary_file", ""), now,
        ])
        inserted += 1
    conn.commit()
    conn.close()
    return inserted


def get_runs(db_path: str = DEFAULT_DB, scenario: str | None = None) -> list[dict]:
    conn = _connect(db_path)
    if scenario:
        rows = conn.execute("SELECT * FROM runs WHERE scenario = ? ORDER BY id", [scenario]).fetchall()
    else:
        rows = conn.execute("SELECT * FROM runs ORDER BY id").fetchall()
    conn.close()
    return [dict(r) for r in rows]


def get_success_rates(db_path: str = DEFAULT_DB) -> list[dict]:
    """Slagingspercentage per (scenario, b, N)."""
    sql = """SELECT scenario, b, n_samples, COUNT(*) AS runs,
                    SUM(reached_goal) AS reached,
                    ROUND(100.0 * SUM(reached_goal) / COUNT(*), 1) AS success_pct
             FROM runs GROUP BY scenario, b, n_samples ORDER BY scenario, b, n_samples"""
    conn = _connect(db_path)
    rows = conn.execute(sql).fetchall()
    conn.close()
    return [dict(r) for r in rows]
