"""JSON and CSV exchange formats.

Structured results go to JSON, matrices to comma-separated CSV with one
matrix row per line and full float64 precision, so a written matrix reads
back bit-exactly.
"""

import json
import os

import numpy as np

from .errors import GraphFormatError

CSV_FORMAT = '%.17g'


def _ensure_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def write_json(data, path):
    """Write a JSON document with a stable layout (indent 2, trailing newline)."""
    _ensure_parent(path)
    with open(path, 'w') as f:
        json.dump(data, f, indent=2)
        f.write('\n')


def read_json(path):
    with open(path, 'r') as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as exc:
            raise GraphFormatError(f"'{path}' is not valid JSON: {exc}") from exc


def write_matrix_csv(matrix, path):
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    _ensure_parent(path)
    np.savetxt(path, matrix, fmt=CSV_FORMAT, delimiter=',')


def read_matrix_csv(path):
    try:
        return np.loadtxt(path, delimiter=',', ndmin=2)
    except ValueError as exc:
        raise GraphFormatError(f"'{path}' is not a numeric CSV matrix: {exc}") from exc


def write_mapping(mapping, path):
    """Ground-truth correspondence as {"mapping": [target index or null per source node]}."""
    write_json({'mapping': [None if j is None else int(j) for j in mapping]}, path)


def read_mapping(path):
    data = read_json(path)
    if not isinstance(data, dict) or not isinstance(data.get('mapping'), list):
        raise GraphFormatError(f"'{path}' must hold an object with a 'mapping' list")
    out = []
    for j in data['mapping']:
        if j is None or j == -1:
            out.append(None)
        elif isinstance(j, int) and j >= 0:
            out.append(j)
        else:
            raise GraphFormatError(f"mapping entries must be indices or null, got {j!r}")
    return out
