"""Readers and writers for the dataset file formats.

All numeric output is decimal text with 9 significant digits, so a
write/read round trip preserves values at that precision. Readers validate
aggressively: NaN/inf cells, ragged rows and timestamp gaps are rejected
with the offending location.
"""

import hashlib

import numpy as np

from .errors import GapError, InvalidInputError, ParseError
from .factorize import CurrentMatrix, FactorModel
from .genmodel import HALFMINUTE, HOURLY, ActivationTemplate, TimePartition, TransitionTable
from .stats import PowerSeries


def fmt(value):
    return f"{value:.9g}"


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _parse_float(token, path, line_no, row, col):
    try:
        value = float(token)
    except ValueError:
        raise ParseError(
            f"{path}:{line_no}: cannot parse {token!r} (row {row}, col {col})",
            path=path, line=line_no,
        ) from None
    if not np.isfinite(value):
        raise ParseError(
            f"{path}:{line_no}: non-finite value at row {row}, col {col}",
            path=path, line=line_no,
        )
    return value


def _matrix_lines(matrix):
    # one column of the matrix per line
    return [",".join(fmt(v) for v in col) for col in matrix.T]


def _read_matrix_block(lines, start, path, label):
    """Parse a `rows,cols` header plus cols lines of rows values each."""
    if start >= len(lines):
        raise ParseError(f"{path}: missing {label} header", path=path, line=start + 1)
    header = lines[start].strip()
    parts = header.split(",")
    if len(parts) != 2:
        raise ParseError(
            f"{path}:{start + 1}: expected 'rows,cols' header, got {header!r}",
            path=path, line=start + 1,
        )
    try:
        n_rows, n_cols = int(parts[0]), int(parts[1])
    except ValueError:
        raise ParseError(
            f"{path}:{start + 1}: expected integer sizes, got {header!r}",
            path=path, line=start + 1,
        ) from None
    if n_rows < 1 or n_cols < 1:
        raise ParseError(f"{path}:{start + 1}: sizes must be positive", path=path, line=start + 1)
    if start + 1 + n_cols > len(lines):
        raise ParseError(
            f"{path}: expected {n_cols} data lines for {label}, file ends early",
            path=path, line=len(lines),
        )
    out = np.empty((n_rows, n_cols))
    for c in range(n_cols):
        line_no = start + 2 + c
        tokens = lines[start + 1 + c].strip().split(",")
        if len(tokens) != n_rows:
            raise ParseError(
                f"{path}:{line_no}: ragged row, expected {n_rows} values, got {len(tokens)}",
                path=path, line=line_no,
            )
        for r, token in enumerate(tokens):
            out[r, c] = _parse_float(token, path, line_no, r, c)
    return out, start + 1 + n_cols


def write_current_matrix(path, cm):
    """Header `N,T`, then one period per line (N comma-separated amperes)."""
    lines = [f"{cm.samples_per_period},{cm.num_periods}"]
    lines.extend(_matrix_lines(cm.values))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_current_matrix(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    values, end = _read_matrix_block(lines, 0, str(path), "current matrix")
    if any(line.strip() for line in lines[end:]):
        raise ParseError(f"{path}:{end + 1}: trailing content", path=str(path), line=end + 1)
    try:
        return CurrentMatrix(values)
    except InvalidInputError as exc:
        raise ParseError(f"{path}: {exc}", path=str(path)) from exc


def write_factor_model(path, model):
    """Two matrix blocks split by `#signatures` / `#activations` dividers."""
    n, k = model.signatures.shape
    _, t = model.activations.shape
    lines = ["#signatures", f"{n},{k}"]
    lines.extend(_matrix_lines(model.signatures))
    lines.append("#activations")
    lines.append(f"{k},{t}")
    lines.extend(_matrix_lines(model.activations))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_factor_model(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "#signatures":
        raise ParseError(f"{path}:1: expected '#signatures' divider", path=str(path), line=1)
    signatures, pos = _read_matrix_block(lines, 1, str(path), "signatures")
    if pos >= len(lines) or lines[pos].strip() != "#activations":
        raise ParseError(
            f"{path}:{pos + 1}: expected '#activations' divider", path=str(path), line=pos + 1
        )
    activations, end = _read_matrix_block(lines, pos + 1, str(path), "activations")
    if signatures.shape[1] != activations.shape[0]:
        raise ParseError(
            f"{path}: signature count {signatures.shape[1]} != activation rows "
            f"{activations.shape[0]}",
            path=str(path),
        )
    try:
        return FactorModel(signatures=signatures, activations=activations)
    except InvalidInputError as exc:
        raise ParseError(f"{path}: {exc}", path=str(path)) from exc


def write_power_series(path, p):
    lines = ["timestamp,watts"]
    for ts, w in zip(p.timestamps, p.watts):
        lines.append(f"{fmt(ts)},{fmt(w)}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_power_series(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    rows = []
    for line_no, line in enumerate(lines, start=1):
        text = line.strip()
        if not text:
            continue
        if line_no == 1 and text.lower().startswith("timestamp"):
            continue
        tokens = text.split(",")
        if len(tokens) != 2:
            raise ParseError(
                f"{path}:{line_no}: expected 'timestamp,watts'", path=str(path), line=line_no
            )
        ts = _parse_float(tokens[0], str(path), line_no, len(rows), 0)
        watts = _parse_float(tokens[1], str(path), line_no, len(rows), 1)
        rows.append((ts, watts))
    if len(rows) < 2:
        raise ParseError(f"{path}: need at least 2 samples", path=str(path))
    timestamps = np.array([r[0] for r in rows])
    watts = np.array([r[1] for r in rows])
    steps = np.diff(timestamps)
    if (steps <= 0).any():
        bad = int(np.flatnonzero(steps <= 0)[0])
        raise GapError(
            f"{path}: timestamps not strictly increasing at {timestamps[bad + 1]:g}",
            path=str(path), timestamp=float(timestamps[bad + 1]),
        )
    interval = steps[0]
    bad = np.flatnonzero(np.abs(steps - interval) > 1e-6 * interval)
    if bad.size:
        t_bad = float(timestamps[bad[0]] + interval)
        raise GapError(
            f"{path}: missing step at timestamp {t_bad:g} (expected {interval:g}s cadence)",
            path=str(path), timestamp=t_bad,
        )
    return PowerSeries(timestamps, watts, float(interval))


def _partition_from_header(line, path):
    parts = line.strip().split()
    if len(parts) != 2 or parts[0] != "#partition" or parts[1] not in (HOURLY, HALFMINUTE):
        raise ParseError(
            f"{path}:1: expected '#partition hourly|halfminute-daytype'", path=str(path), line=1
        )
    return TimePartition(kind=parts[1])


def write_transition_table(path, table):
    """CSV keyed by tau; p_i_j is P[state=i | previous=j]."""
    s = table.n_states
    header = ["tau"] + [f"p_{i}_{j}" for j in range(s) for i in range(s)]
    lines = [f"#partition {table.partition.kind}", ",".join(header)]
    for tau in range(table.partition.n_subsets):
        cells = [str(tau)]
        for j in range(s):
            for i in range(s):
                cells.append(fmt(table.gamma[tau, i, j]))
        lines.append(",".join(cells))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_transition_table(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if len(lines) < 3:
        raise ParseError(f"{path}: truncated transition table", path=str(path))
    partition = _partition_from_header(lines[0], path)
    columns = lines[1].strip().split(",")
    n_states = int(round(np.sqrt(len(columns) - 1)))
    if len(columns) != 1 + n_states * n_states:
        raise ParseError(f"{path}:2: malformed header", path=str(path), line=2)
    gamma = np.zeros((partition.n_subsets, n_states, n_states))
    seen = np.zeros(partition.n_subsets, dtype=bool)
    for line_no, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        tokens = line.strip().split(",")
        if len(tokens) != len(columns):
            raise ParseError(
                f"{path}:{line_no}: ragged row, expected {len(columns)} cells",
                path=str(path), line=line_no,
            )
        tau = int(tokens[0])
        if not 0 <= tau < partition.n_subsets:
            raise ParseError(f"{path}:{line_no}: tau {tau} out of range", path=str(path),
                             line=line_no)
        pos = 1
        for j in range(n_states):
            for i in range(n_states):
                gamma[tau, i, j] = _parse_float(tokens[pos], str(path), line_no, i, j)
                pos += 1
        seen[tau] = True
    if not seen.all():
        missing = int(np.flatnonzero(~seen)[0])
        raise ParseError(f"{path}: missing row for tau {missing}", path=str(path))
    sums = gamma.sum(axis=1)
    if np.max(np.abs(sums - 1.0)) > 1e-6:
        raise ParseError(f"{path}: transition columns do not sum to 1", path=str(path))
    gamma = gamma / sums[:, None, :]  # undo the 9-digit rounding drift
    try:
        return TransitionTable(partition=partition, gamma=gamma)
    except InvalidInputError as exc:
        raise ParseError(f"{path}: {exc}", path=str(path)) from exc


def write_activation_template(path, template):
    lines = [f"#partition {template.partition.kind}", "tau,watts"]
    for tau, value in enumerate(template.values):
        lines.append(f"{tau},{fmt(value)}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_activation_template(path, name=""):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if len(lines) < 3:
        raise ParseError(f"{path}: truncated activation template", path=str(path))
    partition = _partition_from_header(lines[0], path)
    values = np.zeros(partition.n_subsets)
    seen = np.zeros(partition.n_subsets, dtype=bool)
    for line_no, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        tokens = line.strip().split(",")
        if len(tokens) != 2:
            raise ParseError(f"{path}:{line_no}: expected 'tau,watts'", path=str(path),
                             line=line_no)
        tau = int(tokens[0])
        if not 0 <= tau < partition.n_subsets:
            raise ParseError(f"{path}:{line_no}: tau {tau} out of range", path=str(path),
                             line=line_no)
        values[tau] = _parse_float(tokens[1], str(path), line_no, tau, 1)
        seen[tau] = True
    if not seen.all():
        missing = int(np.flatnonzero(~seen)[0])
        raise ParseError(f"{path}: missing row for tau {missing}", path=str(path))
    try:
        return ActivationTemplate(partition=partition, values=values, name=name)
    except InvalidInputError as exc:
        raise ParseError(f"{path}: {exc}", path=str(path)) from exc
