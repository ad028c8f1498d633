"""Matrix and sample persistence.

Complex matrices go to JSON as row-major [re, im] pairs under a {rows, cols}
header; real matrices use plain numbers.  Python's json emits the shortest
round-trip decimal for floats, so reload is bit-exact.  All writes are
atomic (temp file + rename).
"""

import json
import os
import tempfile

import numpy as np


def _atomic_write_text(path, text):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_complex_matrix(path, matrix):
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    data = [[float(v.real), float(v.imag)] for v in m.ravel(order="C")]
    doc = {"rows": m.shape[0], "cols": m.shape[1], "dtype": "complex", "data": data}
    _atomic_write_text(path, json.dumps(doc))


def load_complex_matrix(path):
    with open(path) as fh:
        doc = json.load(fh)
    rows, cols = int(doc["rows"]), int(doc["cols"])
    data = doc["data"]
    if len(data) != rows * cols:
        raise ValueError(f"matrix file {path}: {len(data)} entries for {rows}x{cols}")
    flat = np.array([complex(re, im) for re, im in data], dtype=complex)
    return flat.reshape(rows, cols)


def save_real_matrix(path, matrix):
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    doc = {"rows": m.shape[0], "cols": m.shape[1], "dtype": "real",
           "data": [float(v) for v in m.ravel(order="C")]}
    _atomic_write_text(path, json.dumps(doc))


def load_real_matrix(path):
    with open(path) as fh:
        doc = json.load(fh)
    rows, cols = int(doc["rows"]), int(doc["cols"])
    data = doc["data"]
    if len(data) != rows * cols:
        raise ValueError(f"matrix file {path}: {len(data)} entries for {rows}x{cols}")
    return np.array(data, dtype=float).reshape(rows, cols)


def save_json(path, obj):
    _atomic_write_text(path, json.dumps(obj, indent=2))


def save_samples_csv(path, samples):
    lines = ["index,mi_nats"]
    lines += [f"{i},{float(v)!r}" for i, v in enumerate(samples)]
    _atomic_write_text(path, "\n".join(lines) + "\n")


def load_samples_csv(path):
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "index,mi_nats":
            raise ValueError(f"unexpected sample CSV header: {header}")
        vals = [float(line.split(",")[1]) for line in fh if line.strip()]
    return np.array(vals, dtype=float)


def save_qq_csv(path, pairs):
    lines = ["theoretical,empirical"]
    lines += [f"{float(t)!r},{float(e)!r}" for t, e in pairs]
    _atomic_write_text(path, "\n".join(lines) + "\n")
