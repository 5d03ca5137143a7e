"""CSV output with provenance headers, and the matching reader.

Every file this package writes starts with comment lines of the form
``# key=value`` carrying at least the tool version, the config digest and
the seed, followed by one header row of column names.  Numbers are
written with :func:`repr`-fidelity so a re-run with the same config is
byte-identical.
"""

import csv
import io

import numpy as np

from .errors import ConfigError, InsufficientData


def format_value(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path, meta, columns, rows):
    """Write one provenance-stamped CSV file.

    ``meta`` is an ordered mapping of header key/values, ``columns`` the
    column names and ``rows`` an iterable of row tuples.
    """
    buf = io.StringIO()
    for key, value in meta.items():
        buf.write(f"# {key}={format_value(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def _cell(text):
    try:
        return float(text)
    except ValueError:
        return text


def read_csv(path):
    """Read a file written by :func:`write_csv`.

    Returns ``(meta, columns, rows)`` with ``meta`` the header mapping
    (values kept as strings), ``columns`` the names and ``rows`` an array
    of shape (n_rows, n_columns): float when every cell is numeric,
    object with the non-numeric cells kept as strings otherwise.  Also
    accepts plain headerless numeric CSVs with a single title row, so
    externally produced data can be fed to the fitting and calibration
    commands.
    """
    meta = {}
    columns = None
    data = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err}") from err
    with fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    meta[key.strip()] = value.strip()
                continue
            cells = [c.strip() for c in line.split(",")]
            if columns is None:
                try:
                    data.append([float(c) for c in cells])
                    columns = [f"col{k}" for k in range(len(cells))]
                except ValueError:
                    columns = cells
                continue
            data.append([_cell(c) for c in cells])
    if columns is None:
        raise InsufficientData(f"{path} holds no data rows")
    if not data:
        rows = np.empty((0, len(columns)))
    elif all(isinstance(v, float) for row in data for v in row):
        rows = np.array(data, float)
    else:
        rows = np.array(data, object)
    return meta, columns, rows


def column(name, columns, rows, path="file"):
    """One named column as a 1-D array, with a helpful failure."""
    if name not in columns:
        raise ConfigError(
            f"{path} lacks a {name!r} column (has {columns})")
    return rows[:, columns.index(name)]
