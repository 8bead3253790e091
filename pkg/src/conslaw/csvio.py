"""CSV output: one ``# config_sha256=...`` comment line, a header row, data rows.

Floats are written with ``repr`` so that a rerun of the same config gives
byte-identical files and values read back compare equal.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .variation import SampledFunction

HASH_PREFIX = "# config_sha256="


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (tuple, list)):
        return " ".join(_cell(x) for x in v)
    return str(v)


def write_csv(path, header, rows, config_hash: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"{HASH_PREFIX}{config_hash}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if isinstance(row, dict):
                row = [row[k] for k in header]
            w.writerow([_cell(v) for v in row])
    return path


def read_csv(path):
    """``(config_hash, header, rows)`` with every cell left as a string."""
    with Path(path).open(newline="") as fh:
        first = fh.readline()
        if not first.startswith(HASH_PREFIX):
            raise ValueError(f"{path}: missing config hash comment")
        r = csv.reader(fh)
        header = next(r)
        rows = [row for row in r]
    return first[len(HASH_PREFIX):].strip(), header, rows


def write_sampled(path, f: SampledFunction, config_hash: str, names=("x", "u")):
    return write_csv(path, list(names), zip(f.abscissae.tolist(), f.values.tolist()),
                     config_hash)


def read_sampled(path) -> SampledFunction:
    _, _, rows = read_csv(path)
    x = np.array([float(r[0]) for r in rows])
    u = np.array([float(r[1]) for r in rows])
    return SampledFunction(x, u)
