"""
Run registry schema.

Defines the runs, round_records and metrics tables and creates them on demand.
"""

from dronerf.src.database.connection import close_connection, get_connection


def create_runs_table(output_root=None):
    """
    Create the runs table if it doesn't exist.

    run_id is the deterministic run identifier (name + config hash), so a
    re-run replaces its own row instead of adding a new one.

    Returns:
        bool: True if table created/exists, False if error occurred
    """
    conn = get_connection(output_root)

    if not conn:
        print("Failed to connect to registry for table creation")
        return False

    try:
        cursor = conn.cursor()

        cursor.execute("""
            CREATE TABLE IF NOT EXISTS runs (
                run_id TEXT PRIMARY KEY,
                name TEXT NOT NULL,
                mode TEXT NOT NULL,
                status TEXT NOT NULL,
                failed_stage TEXT,
                run_dir TEXT NOT NULL,
                config_hash TEXT NOT NULL,
                seed INTEGER NOT NULL,
                code_version TEXT,
                started_at TIMESTAMP NOT NULL,
                finished_at TIMESTAMP
            )
        """)

        conn.commit()
        return True

    except Exception as e:
        print(f"Error creating runs table: {e}")
        return False

    finally:
        close_connection(conn)


def create_round_records_table(output_root=None):
    """
    Create the round_records table if it doesn't exist.

    One row per (run, round); verdicts are stored as JSON text.

    Returns:
        bool: True if table created/exists, False if error occurred
    """
    conn = get_connection(output_root)

    if not conn:
        print("Failed to connect to registry for table creation")
        return False

    try:
        cursor = conn.cursor()

        cursor.execute("""
            CREATE TABLE IF NOT EXISTS round_records (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                run_id TEXT NOT NULL REFERENCES runs(run_id) ON DELETE CASCADE,
                round_index INTEGER NOT NULL,
                selected TEXT NOT NULL,
                verdicts TEXT NOT NULL,
                rejected_count INTEGER NOT NULL,
                aggregate_norm REAL,
                carried_forward INTEGER NOT NULL,
                accuracy REAL,
                auroc REAL,
                UNIQUE (run_id, round_index)
            )
        """)

        conn.commit()
        return True

    except Exception as e:
        print(f"Error creating round_records table: {e}")
        return False

    finally:
        close_connection(conn)


def create_metrics_table(output_root=None):
    """
    Create the metrics table if it doesn't exist.

    Mirrors the (run id, stage, metric, group, value) CSV schema.

    Returns:
        bool: True if table created/exists, False if error occurred
    """
    conn = get_connection(output_root)

    if not conn:
        print("Failed to connect to registry for table creation")
        return False

    try:
        cursor = conn.cursor()

        cursor.execute("""
            CREATE TABLE IF NOT EXISTS metrics (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                run_id TEXT NOT NULL REFERENCES runs(run_id) ON DELETE CASCADE,
                stage TEXT NOT NULL,
                metric TEXT NOT NULL,
                metric_group TEXT NOT NULL,
                value REAL
            )
        """)

        cursor.execute("""
            CREATE INDEX IF NOT EXISTS idx_metrics_run ON metrics (run_id, metric)
        """)

        conn.commit()
        return True

    except Exception as e:
        print(f"Error creating metrics table: {e}")
        return False

    finally:
        close_connection(conn)


def initialize_database(output_root=None):
    """
    Create every registry table.

    Returns:
        bool: True if all tables exist afterwards
    """
    return all([
        create_runs_table(output_root),
        create_round_records_table(output_root),
        create_metrics_table(output_root),
    ])
