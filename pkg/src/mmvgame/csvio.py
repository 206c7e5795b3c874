"""Deterministic CSV output: fixed header, '.' decimals, 17 significant digits."""
from __future__ import annotations

import os

import numpy as np


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_rows(path, header, rows):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def write_matrix(path, header, arr):
    """Write a float matrix row by row; NaN is written as ``nan``."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    np.savetxt(path, np.asarray(arr, dtype=float), fmt="%.17g", delimiter=",",
               header=",".join(header), comments="")
    return path


def write_summary(path, items):
    """Two-column key,value block."""
    return write_rows(path, ["key", "value"], list(items))


def surface_table(sol, residual=None):
    """Long-format (t, z, G, G_z, F, residual) table of a solved surface."""
    zz, tt = np.meshgrid(sol.z, sol.times, indexing="ij")
    res = residual if residual is not None else np.full(sol.G.shape, np.nan)
    cols = [tt.T.ravel(), zz.T.ravel(), sol.G.T.ravel(), sol.G_z.T.ravel(), sol.F.T.ravel(), res.T.ravel()]
    return ["t", "z", "G", "G_z", "F", "residual"], np.column_stack(cols)
