"""Shared query layer for result tables.

The scenario runners and the output validator both call these functions.
Each function opens a fresh in-memory DuckDB connection, registers the
DataFrames it is given (or reads an emitted CSV) and returns list[dict]
(or dict for single-row answers). NaN cells are skipped by every query.
"""

from __future__ import annotations

from pathlib import Path

import duckdb
import pandas as pd

# Emitted CSVs start with the tool and config comment lines
HEADER_LINES = 2


def _finite(column: str) -> str:
    return f"{column} IS NOT NULL AND NOT isnan({column})"


def _run(sql: str, **tables: pd.DataFrame) -> list[dict]:
    """Execute SQL against the given DataFrames and return row dicts."""
    con = duckdb.connect()
    for name, df in tables.items():
        con.register(name, df)
    df = con.execute(sql).fetchdf()
    con.close()
    return df.to_dict(orient="records")


def _csv(path: Path | str) -> str:
    path = str(path).replace("'", "''")
    return f"read_csv('{path}', skip={HEADER_LINES}, header=true)"


# ── Emitted tables ──


def load_table(path: Path | str) -> pd.DataFrame:
    """Read an emitted CSV back into a DataFrame, skipping the comment header."""
    con = duckdb.connect()
    df = con.execute(f"SELECT * FROM {_csv(path)}").fetchdf()
    con.close()
    return df


def table_profile(path: Path | str, columns: list[str]) -> dict:
    """Row count plus the number of non-finite cells per column."""
    bad = ", ".join(
        f"sum(CASE WHEN {_finite(c)} THEN 0 ELSE 1 END) AS bad_{c}" for c in columns
    )
    rows = _run(f"SELECT count(*) AS n_rows, {bad} FROM {_csv(path)}")
    return {k: int(v) for k, v in rows[0].items()}


# ── Grids ──


def row_argmax(grid: pd.DataFrame, value: str = "delta_mu_norm") -> list[dict]:
    """Per axis1 row: axis2 at the maximum of ``value`` and whether it is interior.

    Ties resolve to the smallest axis2.
    """
    return _run(
        f"""
        WITH span AS (
            SELECT axis1, min(axis2) AS lo, max(axis2) AS hi FROM grid GROUP BY axis1
        ),
        ranked AS (
            SELECT axis1, axis2, {value} AS value,
                   row_number() OVER (PARTITION BY axis1 ORDER BY {value} DESC, axis2) AS rk
            FROM grid
            WHERE {_finite(value)}
        )
        SELECT r.axis1, r.axis2 AS argmax, r.value AS best,
               (r.axis2 > s.lo AND r.axis2 < s.hi) AS interior
        FROM ranked r JOIN span s USING (axis1)
        WHERE r.rk = 1
        ORDER BY r.axis1
        """,
        grid=grid,
    )


def grid_optimum(grid: pd.DataFrame, value: str = "fisher_norm") -> dict | None:
    """Grid point with the largest finite ``value``; None when every cell is NaN."""
    rows = _run(
        f"""
        SELECT axis1, axis2, {value} AS value FROM grid
        WHERE {_finite(value)}
        ORDER BY {value} DESC, axis1, axis2
        LIMIT 1
        """,
        grid=grid,
    )
    return rows[0] if rows else None


def count_failed(grid: pd.DataFrame, value: str = "fisher_norm") -> int:
    rows = _run(
        f"SELECT count(*) AS n FROM grid WHERE NOT ({_finite(value)})", grid=grid
    )
    return int(rows[0]["n"])


# ── Noise study ──


def noise_argmax(noise: pd.DataFrame, *, periodic: bool = True) -> list[dict]:
    """Per n_cl: axis value maximising D_F, axis value maximising ‖Δμ‖, and their gap.

    With ``periodic`` the gap is measured around the 2π circle.
    """
    diff = "abs(f.axis - d.axis)"
    gap = f"least({diff}, 2 * pi() - {diff})" if periodic else diff
    return _run(
        f"""
        WITH f AS (
            SELECT n_cl, axis,
                   row_number() OVER (PARTITION BY n_cl ORDER BY fisher_norm DESC, axis) AS rk
            FROM noise WHERE {_finite("fisher_norm")}
        ),
        d AS (
            SELECT n_cl, axis,
                   row_number() OVER (PARTITION BY n_cl ORDER BY delta_mu_norm DESC, axis) AS rk
            FROM noise WHERE {_finite("delta_mu_norm")}
        )
        SELECT f.n_cl, f.axis AS argmax_fisher, d.axis AS argmax_delta_mu, {gap} AS gap
        FROM f JOIN d ON f.n_cl = d.n_cl AND f.rk = 1 AND d.rk = 1
        ORDER BY f.n_cl
        """,
        noise=noise,
    )


def fisher_monotone_in_noise(noise: pd.DataFrame, tol: float = 1e-12) -> bool:
    """True when D_F never increases with n_cl at a fixed axis value."""
    rows = _run(
        f"""
        SELECT count(*) AS n FROM noise a JOIN noise b
            ON a.axis = b.axis AND a.n_cl < b.n_cl
        WHERE {_finite("a.fisher_norm")} AND {_finite("b.fisher_norm")}
          AND b.fisher_norm > a.fisher_norm * (1 + {tol}) + {tol}
        """,
        noise=noise,
    )
    return int(rows[0]["n"]) == 0
