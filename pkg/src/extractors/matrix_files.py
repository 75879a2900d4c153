from pathlib import Path

import numpy as np

from src.errors import MatrixFormatError
from src.linalg.numkernel import Mat


def _strip_comment(line: str) -> str:
    return line.split("#", 1)[0].strip()


def parse_matrix(text: str, source: str | None = None) -> Mat:
    """
    Parse the plain-text matrix format.

    The first non-comment line holds "rows cols", followed by `rows` lines of
    `cols` decimal numbers. A '#' starts a comment that runs to the end of
    the line; blank lines are ignored. Either dimension may be 0, which is
    how format_matrix writes an empty block such as D when M⊥ = 0.

    Args:
        text: File contents
        source: Name used in error messages

    Returns:
        rows x cols float64 array

    Raises:
        MatrixFormatError: On a bad header, a non-numeric or non-finite
            token, or a row or row count that does not match the header
    """
    lines = [
        (number, _strip_comment(raw))
        for number, raw in enumerate(text.splitlines(), start=1)
    ]
    content = [(number, line) for number, line in lines if line]
    if not content:
        raise MatrixFormatError("missing 'rows cols' header", source, None)

    header_line, header = content[0]
    fields = header.split()
    if len(fields) != 2:
        raise MatrixFormatError(f"header must be 'rows cols', got '{header}'", source, header_line)
    try:
        rows, cols = (int(x) for x in fields)
    except ValueError:
        raise MatrixFormatError(f"header must hold two integers, got '{header}'", source, header_line) from None
    if rows < 0 or cols < 0:
        raise MatrixFormatError(f"negative dimensions {rows} x {cols}", source, header_line)

    body = content[1:]
    if len(body) != rows:
        anchor = body[rows][0] if len(body) > rows else (body[-1][0] if body else header_line)
        raise MatrixFormatError(f"expected {rows} rows, found {len(body)}", source, anchor)

    out = np.empty((rows, cols), dtype=np.float64)
    for i, (number, line) in enumerate(body):
        tokens = line.split()
        if len(tokens) != cols:
            raise MatrixFormatError(f"expected {cols} values, found {len(tokens)}", source, number)
        for j, token in enumerate(tokens):
            try:
                value = float(token)
            except ValueError:
                raise MatrixFormatError(f"non-numeric token '{token}'", source, number) from None
            if not np.isfinite(value):
                raise MatrixFormatError(f"non-finite value '{token}'", source, number)
            out[i, j] = value
    return out


def read_matrix(path: str | Path) -> Mat:
    """
    Read a matrix file.

    Raises:
        FileNotFoundError: If the file does not exist
        MatrixFormatError: If the file is not UTF-8 text or does not parse
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise MatrixFormatError(f"not UTF-8 text ({e.reason} at byte {e.start})", str(path), None) from e
    return parse_matrix(text, str(path))


def format_matrix(m: Mat, comment: str | None = None) -> str:
    """Text form of m with 17 significant digits, so reading it back is bit-exact."""
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    if not np.all(np.isfinite(m)):
        raise ValueError("Only finite matrices can be written")
    lines = []
    if comment:
        lines.extend(f"# {part}" for part in comment.splitlines())
    lines.append(f"{m.shape[0]} {m.shape[1]}")
    lines.extend(" ".join(format(float(x), ".17g") for x in row) for row in m)
    return "\n".join(lines) + "\n"


def write_matrix(path: str | Path, m: Mat, comment: str | None = None) -> Path:
    """Write m to path, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_matrix(m, comment), encoding="utf-8")
    return path
