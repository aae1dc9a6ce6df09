"""
Run registry write operations.

All functions return (success, message) tuples for clear error handling.
"""

import json
import sqlite3
from datetime import datetime

from dronerf.src.database.connection import close_connection, get_connection


def upsert_run(run, output_root=None):
    """
    Insert a run row, replacing an earlier row with the same run_id.

    Re-running a run clears its old round records and metrics too.

    Args:
        run (dict): run_id, name, mode, status, run_dir, config_hash, seed,
            code_version

    Returns:
        tuple: (success: bool, message: str)
    """
    if not run or not run.get("run_id"):
        return False, "Missing required field: run_id"

    conn = get_connection(output_root)

    if not conn:
        return False, "Failed to connect to registry"

    try:
        cursor = conn.cursor()

        for table in ("metrics", "round_records", "runs"):
            cursor.execute(f"DELETE FROM {table} WHERE run_id = ?", (run["run_id"],))
        cursor.execute("""
            INSERT INTO runs (
                run_id, name, mode, status, failed_stage, run_dir,
                config_hash, seed, code_version, started_at
            ) VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
        """, (
            run["run_id"],
            run.get("name"),
            run.get("mode"),
            run.get("status", "running"),
            run.get("failed_stage"),
            str(run.get("run_dir")),
            run.get("config_hash"),
            int(run.get("seed", 0)),
            run.get("code_version"),
            datetime.now(),
        ))

        conn.commit()
        return True, f"Registered run {run['run_id']}"

    except sqlite3.Error as e:
        conn.rollback()
        return False, f"Database error registering run: {e}"

    finally:
        close_connection(conn)


def finish_run(run_id, status, failed_stage=None, output_root=None):
    """
    Mark a run as completed or failed.

    Returns:
        tuple: (success: bool, message: str)
    """
    conn = get_connection(output_root)

    if not conn:
        return False, "Failed to connect to registry"

    try:
        cursor = conn.cursor()
        cursor.execute("""
            UPDATE runs SET status = ?, failed_stage = ?, finished_at = ?
            WHERE run_id = ?
        """, (status, failed_stage, datetime.now(), run_id))

        if cursor.rowcount == 0:
            return False, f"Run not found: {run_id}"

        conn.commit()
        return True, f"Run {run_id} marked {status}"

    except sqlite3.Error as e:
        conn.rollback()
        return False, f"Database error updating run: {e}"

    finally:
        close_connection(conn)


def insert_round_records(run_id, records, output_root=None):
    """
    Store federation round records for a run.

    Args:
        run_id (str): owning run
        records (list): RoundRecord.to_dict() dicts

    Returns:
        tuple: (success: bool, message: str)
    """
    if not records:
        return True, "No round records to store"

    conn = get_connection(output_root)

    if not conn:
        return False, "Failed to connect to registry"

    try:
        cursor = conn.cursor()
        cursor.executemany("""
            INSERT OR REPLACE INTO round_records (
                run_id, round_index, selected, verdicts, rejected_count,
                aggregate_norm, carried_forward, accuracy, auroc
            ) VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)
        """, [
            (
                run_id,
                record["round"],
                json.dumps(record["selected"]),
                json.dumps(record["verdicts"]),
                sum(1 for v in record["verdicts"] if not v["accepted"]),
                record["aggregate_norm"],
                int(record["carried_forward"]),
                record["metrics"].get("accuracy"),
                record["metrics"].get("auroc"),
            )
            for record in records
        ])

        conn.commit()
        return True, f"Stored {len(records)} round records"

    except sqlite3.Error as e:
        conn.rollback()
        return False, f"Database error storing round records: {e}"

    finally:
        close_connection(conn)


def insert_metrics(run_id, rows, output_root=None):
    """
    Store long-format metric rows.

    Args:
        run_id (str): owning run
        rows (list): dicts with stage, metric, group, value

    Returns:
        tuple: (success: bool, message: str)
    """
    if not rows:
        return True, "No metrics to store"

    conn = get_connection(output_root)

    if not conn:
        return False, "Failed to connect to registry"

    try:
        cursor = conn.cursor()
        cursor.executemany("""
            INSERT INTO metrics (run_id, stage, metric, metric_group, value)
            VALUES (?, ?, ?, ?, ?)
        """, [
            (run_id, row["stage"], row["metric"], str(row["group"]),
             None if row["value"] is None else float(row["value"]))
            for row in rows
        ])

        conn.commit()
        return True, f"Stored {len(rows)} metrics"

    except sqlite3.Error as e:
        conn.rollback()
        return False, f"Database error storing metrics: {e}"

    finally:
        close_connection(conn)
