"""
Database connection management for the dronerf run registry.

The registry is a single SQLite file under the output root. It indexes runs,
their federation round records and their metrics so sweeps can be compared
without re-reading every run directory.
"""

import os
import sqlite3
from pathlib import Path

from dotenv import load_dotenv


load_dotenv()

DEFAULT_OUTPUT_ROOT = Path(os.environ.get("DRONERF_OUTPUT_DIR", "runs"))
REGISTRY_FILENAME = "runs.db"


def get_db_path(output_root=None):
    """
    Get the path to the run registry database.

    Args:
        output_root (str/Path): directory holding run folders.
            Defaults to $DRONERF_OUTPUT_DIR or ./runs

    Returns:
        Path: path to runs.db

    Raises:
        OSError: If unable to create directory structure
    """
    root = Path(output_root) if output_root else DEFAULT_OUTPUT_ROOT
    db_path = root / REGISTRY_FILENAME

    try:
        db_path.parent.mkdir(parents=True, exist_ok=True)
        return db_path
    except OSError as e:
        print(f"Error creating registry directory: {e}")
        raise


def get_connection(output_root=None):
    """
    Create and return a registry connection.

    Args:
        output_root (str/Path): directory holding run folders

    Returns:
        sqlite3.Connection: Active connection, or None if failed
    """
    try:
        db_path = get_db_path(output_root)
        conn = sqlite3.connect(str(db_path))
        conn.execute('PRAGMA encoding="UTF-8"')
        conn.execute("PRAGMA foreign_keys = ON")
        return conn

    except sqlite3.Error as e:
        print(f"Database connection error: {e}")
        return None

    except OSError as e:
        print(f"Unexpected error connecting to database: {e}")
        return None


def close_connection(conn):
    """
    Safely close a database connection.

    Args:
        conn (sqlite3.Connection): Connection object to close
    """
    if conn:
        try:
            conn.close()
        except sqlite3.Error as e:
            print(f"Error closing database connection: {e}")
