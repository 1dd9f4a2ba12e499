"""Append-only experiment record store and delimited table output.

One record per line, JSON-encoded with sorted keys.  Python's float repr
is the shortest round-tripping decimal, so write -> read -> write is
byte-idempotent.  The store is single-writer append-only; readers may
stream it concurrently.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterator

__all__ = ["append_record", "iter_records", "read_records", "write_tables"]


def _encode(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"), allow_nan=True)


def append_record(path, record: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(_encode(record) + "\n")


def iter_records(path) -> Iterator[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def read_records(path) -> list:
    return list(iter_records(path))


def _rate_rows(rec: dict):
    res = rec["results"]
    header = ["eps", "mean_abs_delta", "se_mean_abs_delta", "sd_delta"]
    rows = [
        [res["eps"][i], res["mean_abs_delta"][i], res["se_mean_abs_delta"][i], res["sd_delta"][i]]
        for i in range(len(res["eps"]))
    ]
    return header, rows


def _clt_rows(rec: dict):
    res = rec["results"]
    header = ["eps", "var_F", "sd_delta"]
    rows = [
        [res["eps"][i], res["var_F"][i], res["sd_delta"][i]]
        for i in range(len(res["eps"]))
    ]
    return header, rows


def write_tables(records, out_dir) -> list:
    """One CSV per record, named by kind and config hash; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for rec in records:
        kind = rec.get("kind", "record")
        header, rows = (_rate_rows if kind == "rate" else _clt_rows)(rec)
        path = out_dir / f"{kind}_{rec['config_hash']}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows([[repr(v) for v in row] for row in rows])
        written.append(path)
    return written
