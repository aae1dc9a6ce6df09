"""
Run registry read operations.

No write operations are performed here.
"""

import json
import sqlite3

from dronerf.src.database.connection import close_connection, get_connection


def get_run(run_id, output_root=None):
    """
    Fetch one run row.

    Returns:
        dict: run fields, or None if not found or error
    """
    conn = get_connection(output_root)

    if not conn:
        return None

    try:
        conn.row_factory = sqlite3.Row
        cursor = conn.cursor()
        cursor.execute("SELECT * FROM runs WHERE run_id = ?", (run_id,))
        row = cursor.fetchone()
        return dict(row) if row else None

    except Exception as e:
        print(f"  Error fetching run {run_id}: {e}")
        return None

    finally:
        close_connection(conn)


def list_runs(status=None, output_root=None):
    """
    All registered runs, oldest first, optionally by status.

    Returns:
        list: run dicts, or [] if error
    """
    conn = get_connection(output_root)

    if not conn:
        return []

    try:
        conn.row_factory = sqlite3.Row
        cursor = conn.cursor()
        if status:
            cursor.execute("SELECT * FROM runs WHERE status = ? ORDER BY started_at, run_id", (status,))
        else:
            cursor.execute("SELECT * FROM runs ORDER BY started_at, run_id")
        return [dict(row) for row in cursor.fetchall()]

    except Exception as e:
        print(f"  Error listing runs: {e}")
        return []

    finally:
        close_connection(conn)


def get_run_count(status=None, output_root=None):
    """
    Count registered runs, optionally by status.

    Returns:
        int: number of runs, or 0 if error
    """
    conn = get_connection(output_root)

    if not conn:
        return 0

    try:
        cursor = conn.cursor()
        if status:
            cursor.execute("SELECT COUNT(*) FROM runs WHERE status = ?", (status,))
        else:
            cursor.execute("SELECT COUNT(*) FROM runs")
        return cursor.fetchone()[0]

    except Exception as e:
        print(f"  Error counting runs: {e}")
        return 0

    finally:
        close_connection(conn)


def get_round_records(run_id, output_root=None):
    """
    Round records of a run, ordered by round.

    Returns:
        list: dicts with decoded selected/verdicts lists, or [] if error
    """
    conn = get_connection(output_root)

    if not conn:
        return []

    try:
        conn.row_factory = sqlite3.Row
        cursor = conn.cursor()
        cursor.execute("""
            SELECT * FROM round_records WHERE run_id = ? ORDER BY round_index
        """, (run_id,))
        records = []
        for row in cursor.fetchall():
            record = dict(row)
            record["selected"] = json.loads(record["selected"])
            record["verdicts"] = json.loads(record["verdicts"])
            records.append(record)
        return records

    except Exception as e:
        print(f"  Error fetching round records: {e}")
        return []

    finally:
        close_connection(conn)


def get_metric(run_id, metric, group="overall", stage=None, output_root=None):
    """
    Value of one metric of a run.

    Returns:
        float: latest matching value, or None
    """
    conn = get_connection(output_root)

    if not conn:
        return None

    try:
        cursor = conn.cursor()
        query = "SELECT value FROM metrics WHERE run_id = ? AND metric = ? AND metric_group = ?"
        params = [run_id, metric, group]
        if stage:
            query += " AND stage = ?"
            params.append(stage)
        cursor.execute(query + " ORDER BY id DESC LIMIT 1", params)
        row = cursor.fetchone()
        return row[0] if row else None

    except Exception as e:
        print(f"  Error fetching metric {metric}: {e}")
        return None

    finally:
        close_connection(conn)
