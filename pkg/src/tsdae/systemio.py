"""Reading and writing system-description files and trajectory files.

A system file is a single JSON document:

    {
      "grid": {"kind": "geometric", "q": 2, "t0": 1, "count": 11},
      "n": 5, "m": 3,
      "A": [["1", "0", ...], ...],        # entries: numbers or expressions
      "B": ...,
      "C": ...,
      "f": ["0", ...],                    # optional, defaults to zero
      "projectors": {"Q0": [[...]], ...}, # optional injected projectors
      "options": {"max_index": 8, ...}    # optional tolerance block
    }

Matrix blocks may mix numeric and expression-string entries, or may be
given as per-index numeric tables (one matrix per grid point).
Trajectories are written as RFC-4180 CSV with full double round-trip
formatting, or as an equivalent JSON document.
"""

import csv
import io
import json
from fractions import Fraction

import numpy as np

from .chain import ChainOptions
from .errors import ExpressionError, SystemFileError
from .expressions import Literal, Node, parse_expression
from .grid import TimeScaleGrid, grid_from_descriptor
from .matfunc import DAESystem, MatrixFunction

TRAJECTORY_FLOAT_FORMAT = ".17g"


def _entry_node(value) -> Node:
    if isinstance(value, str):
        try:
            return parse_expression(value)
        except ExpressionError as exc:
            raise SystemFileError(f"bad entry expression {value!r}: {exc}") from exc
    if isinstance(value, bool) or value is None:
        raise SystemFileError(f"entry {value!r} is not a number or expression")
    if isinstance(value, int):
        return Literal(Fraction(value))
    if isinstance(value, float):
        # decimal reading keeps 0.1 exact in rational mode
        return Literal(Fraction(repr(value)))
    raise SystemFileError(f"entry {value!r} is not a number or expression")


def _depth(block) -> int:
    d = 0
    while isinstance(block, list):
        if not block:
            break
        d += 1
        block = block[0]
    return d


def _matrix_function(block, grid: TimeScaleGrid, shape, name: str,
                     exact: bool) -> MatrixFunction:
    if isinstance(block, dict) and "table" in block:
        block = block["table"]
        if _depth(block) != 3:
            raise SystemFileError(f"{name}: a table must be a list of matrices")
    depth = _depth(block)
    if depth == 3:
        tables = [np.asarray(mat, dtype=object) for mat in block]
        if len(tables) != len(grid):
            raise SystemFileError(
                f"{name}: table has {len(tables)} matrices for {len(grid)} grid points")
        for mat in tables:
            if mat.shape != shape:
                raise SystemFileError(f"{name}: table entry shape {mat.shape}, "
                                      f"declared {shape}")
        return MatrixFunction.from_table(grid, tables, exact=exact)
    if depth == 2:
        rows = len(block)
        cols = len(block[0])
        if (rows, cols) != shape:
            raise SystemFileError(f"{name} has shape {(rows, cols)}, declared {shape}")
        if any(len(r) != cols for r in block):
            raise SystemFileError(f"{name}: ragged rows")
        nodes = [[_entry_node(v) for v in row] for row in block]
        return MatrixFunction.from_entries(grid, nodes, exact=exact)
    raise SystemFileError(f"{name}: expected a matrix of entries or a table")


def _vector_function(block, grid: TimeScaleGrid, n: int, exact: bool) -> MatrixFunction:
    if block is None:
        return MatrixFunction.constant(grid, np.zeros((n, 1)), exact=exact)
    if isinstance(block, dict) and "table" in block:
        tables = [np.asarray(v, dtype=object).reshape(n, 1) for v in block["table"]]
        if len(tables) != len(grid):
            raise SystemFileError("f: table length does not match the grid")
        return MatrixFunction.from_table(grid, tables, exact=exact)
    if _depth(block) == 1:
        if len(block) != n:
            raise SystemFileError(f"f has {len(block)} entries, declared n = {n}")
        nodes = [[_entry_node(v)] for v in block]
        return MatrixFunction.from_entries(grid, nodes, exact=exact)
    if _depth(block) == 2:
        tables = [np.asarray(v, dtype=object).reshape(n, 1) for v in block]
        if len(tables) != len(grid):
            raise SystemFileError("f: table length does not match the grid")
        return MatrixFunction.from_table(grid, tables, exact=exact)
    raise SystemFileError("f: expected an entry list or a per-index table")


def load_system(source, exact: bool = False):
    """Parse a system file; returns (DAESystem, ChainOptions, raw dict).

    ``source`` is a path, a file object, or an already-parsed dict.
    """
    if isinstance(source, dict):
        doc = source
    elif hasattr(source, "read"):
        doc = json.load(source)
    else:
        with open(source, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    try:
        grid = grid_from_descriptor(doc["grid"], exact=exact)
        n = int(doc["n"])
        m = int(doc["m"])
    except KeyError as exc:
        raise SystemFileError(f"system file is missing {exc}") from exc
    if n < 1 or m < 1:
        raise SystemFileError("n and m must be positive")

    a = _matrix_function(doc.get("A"), grid, (n, m), "A", exact)
    b = _matrix_function(doc.get("B"), grid, (m, n), "B", exact)
    c = _matrix_function(doc.get("C"), grid, (n, n), "C", exact)
    f = _vector_function(doc.get("f"), grid, n, exact)
    system = DAESystem(grid, a, b, c, f, n, m)

    opts_block = dict(doc.get("options") or {})
    projectors = {}
    for key, value in (doc.get("projectors") or {}).items():
        if not key.startswith("Q") or not key[1:].isdigit():
            raise SystemFileError(f"projector key {key!r} is not of the form Q<level>")
        level = int(key[1:])
        arr = np.asarray(value, dtype=object)
        if arr.ndim not in (2, 3):
            raise SystemFileError(f"{key}: expected a matrix or a per-index table")
        projectors[level] = arr
    options = ChainOptions(
        max_index=int(opts_block.get("max_index", 8)),
        tol_rank=opts_block.get("tol_rank"),
        tol_proj=float(opts_block.get("tol_proj", 1e-10)),
        cond_max=float(opts_block.get("cond_max", 1e12)),
        projectors=projectors or None,
    )
    return system, options, doc


def format_float(x: float) -> str:
    return format(float(x), TRAJECTORY_FLOAT_FORMAT)


def trajectory_rows(system: DAESystem, solution) -> list:
    """Rows (t, x_1..x_n, u_1..u_m, residual-or-None) over the defined window."""
    rows = []
    for i in solution.x_indices:
        t = float(system.grid.t(i))
        x = [float(v) for v in solution.x[i]]
        u = [float(v) for v in solution.u[i]]
        res = solution.residual.get(i)
        rows.append((i, t, x, u, res))
    return rows


def write_trajectory_csv(fh, system: DAESystem, solution) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    header = ["t"] + [f"x_{j + 1}" for j in range(system.n)] \
        + [f"u_{j + 1}" for j in range(system.m)] + ["residual"]
    writer.writerow(header)
    for _, t, x, u, res in trajectory_rows(system, solution):
        row = [format_float(t)] + [format_float(v) for v in x + u]
        row.append("" if res is None else format_float(res))
        writer.writerow(row)


def write_trajectory_json(fh, system: DAESystem, solution) -> None:
    doc = {
        "columns": ["t"] + [f"x_{j + 1}" for j in range(system.n)]
        + [f"u_{j + 1}" for j in range(system.m)] + ["residual"],
        "rows": [
            {"t": t, "x": x, "u": u, "residual": res}
            for _, t, x, u, res in trajectory_rows(system, solution)
        ],
        "summary": {"max_residual": solution.max_residual(),
                    "indices": solution.x_indices},
    }
    json.dump(doc, fh, indent=2)
    fh.write("\n")


def read_trajectory(source, n: int, m: int):
    """Read a trajectory file (CSV or JSON); returns list of (t, x, u) rows."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    text = text.strip()
    if not text:
        raise SystemFileError("no rows in the solution file")
    rows = []
    if text.startswith("{"):
        doc = json.loads(text)
        for row in doc.get("rows", []):
            rows.append((float(row["t"]),
                         np.array(row["x"], dtype=float),
                         np.array(row["u"], dtype=float)))
    else:
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or header[:1] != ["t"]:
            raise SystemFileError("solution file lacks the expected header row")
        expected = 1 + n + m + 1
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != expected:
                raise SystemFileError(
                    f"line {line_no}: {len(row)} columns, expected {expected}")
            vals = [float(v) for v in row[:1 + n + m]]
            rows.append((vals[0],
                         np.array(vals[1:1 + n], dtype=float),
                         np.array(vals[1 + n:1 + n + m], dtype=float)))
    if not rows:
        raise SystemFileError("no rows in the solution file")
    return rows


def paper_example_document() -> dict:
    """The bundled five-dimensional index-2 fixture, with its projectors."""
    return {
        "grid": {"kind": "geometric", "q": 2, "t0": 1, "count": 11},
        "n": 5,
        "m": 3,
        "A": [["1", "0", "0"],
              ["0", "1/t", "0"],
              ["0", "0", "1"],
              ["0", "0", "0"],
              ["0", "0", "0"]],
        "B": [["1", "0", "0", "0", "0"],
              ["0", "2*t", "0", "0", "0"],
              ["0", "0", "1", "0", "0"]],
        "C": [["0", "0", "0", "-1", "1"],
              ["0", "0", "1", "1", "0"],
              ["0", "-1", "0", "0", "0"],
              ["-1", "1", "0", "0", "0"],
              ["1", "0", "0", "0", "t^2"]],
        "f": ["0", "0", "0", "0", "0"],
        "projectors": {
            "Q0": [[0, 0, 0, 0, 0],
                   [0, 0, 0, 0, 0],
                   [0, 0, 0, 0, 0],
                   [0, 0, 0, 1, 0],
                   [0, 0, 0, 0, 1]],
            "Q1": [[1, 0, 0, 0, 0],
                   [-1, 0, 0, 0, 0],
                   [0, 0, 0, 0, 0],
                   [1, 0, 0, 0, 0],
                   [0, 0, 0, 0, 0]],
        },
    }


FIXTURES = {"paper_example": paper_example_document}
