"""Embedding matrices and vocabularies: loading, centering, name resolution."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from numpy.lib import format as npy_format

log = logging.getLogger(__name__)

DEFAULT_MARKER = "▁"
DISPLAY_PREFIX = "#"
FORMATS = ("npy", "rawbin", "csv")


class EmbeddingFormatError(ValueError):
    """Malformed embedding file. ``row``/``col`` are 1-based when known."""

    def __init__(self, message: str, row: int | None = None, col: int | None = None):
        super().__init__(message)
        self.row = row
        self.col = col


class VocabularyError(ValueError):
    pass


class ResolutionError(KeyError):
    def __init__(self, surface: str, tried: Sequence[str]):
        super().__init__(surface)
        self.surface = surface
        self.tried = tuple(tried)

    def __str__(self) -> str:
        tried = ", ".join(repr(t) for t in self.tried)
        return f"cannot resolve {self.surface!r} (tried {tried})"


@dataclass(frozen=True, eq=False)
class EmbeddingMatrix:
    """N x D embedding rows. The array is read-only once wrapped."""

    data: np.ndarray
    centered: bool = False

    def __post_init__(self):
        data = self.data
        if data.ndim != 2:
            raise EmbeddingFormatError(f"expected a 2-D matrix, got shape {data.shape}")
        if data.shape[0] < 2 or data.shape[1] < 1:
            raise EmbeddingFormatError(f"need at least 2 rows and 1 column, got shape {data.shape}")
        if data.dtype not in (np.float32, np.float64):
            raise EmbeddingFormatError(f"unsupported dtype {data.dtype}; expected float32 or float64")
        _check_finite(data)
        if data.flags.writeable:
            data = data.view()
            data.flags.writeable = False
            object.__setattr__(self, "data", data)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def row(self, i: int) -> np.ndarray:
        return self.data[i]


def _check_finite(data: np.ndarray) -> None:
    bad = ~np.isfinite(data)
    if bad.any():
        r, c = (int(x) for x in np.argwhere(bad)[0])
        raise EmbeddingFormatError(
            f"non-finite value {data[r, c]!r} at row {r + 1}, col {c + 1}", row=r + 1, col=c + 1
        )


def _load_npy(path: Path) -> np.ndarray:
    with open(path, "rb") as fh:
        try:
            version = npy_format.read_magic(fh)
        except ValueError as exc:
            raise EmbeddingFormatError(f"{path}: not an NPY file ({exc})") from None
        if version != (1, 0):
            raise EmbeddingFormatError(f"{path}: NPY version {version} unsupported; need 1.0")
        try:
            shape, fortran_order, dtype = npy_format.read_array_header_1_0(fh)
        except ValueError as exc:
            raise EmbeddingFormatError(f"{path}: malformed NPY header ({exc})") from None
        if fortran_order:
            raise EmbeddingFormatError(f"{path}: Fortran-ordered arrays are not supported")
        if len(shape) != 2:
            raise EmbeddingFormatError(f"{path}: expected 2-D array, header declares shape {shape}")
        if dtype.kind != "f" or dtype.itemsize not in (4, 8):
            raise EmbeddingFormatError(f"{path}: dtype {dtype.str} unsupported; need f4 or f8")
        count = int(np.prod(shape))
        data = np.fromfile(fh, dtype=dtype, count=count)
    if data.size != count:
        raise EmbeddingFormatError(f"{path}: truncated data ({data.size} of {count} values)")
    return data.reshape(shape).astype(dtype.newbyteorder("="), copy=False)


def _load_rawbin(path: Path) -> np.ndarray:
    header_path = Path(str(path) + ".json")
    if not header_path.exists():
        raise EmbeddingFormatError(f"{path}: missing sidecar header {header_path}")
    try:
        header = json.loads(header_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise EmbeddingFormatError(f"{header_path}: invalid JSON ({exc})") from None
    try:
        rows, cols = int(header["rows"]), int(header["cols"])
        dtype, order = header["dtype"], header["order"]
    except (KeyError, TypeError, ValueError) as exc:
        raise EmbeddingFormatError(f"{header_path}: malformed header ({exc!r})") from None
    if dtype != "f32":
        raise EmbeddingFormatError(f"{header_path}: dtype {dtype!r} unsupported; need 'f32'")
    if order != "row-major":
        raise EmbeddingFormatError(f"{header_path}: order {order!r} unsupported; need 'row-major'")
    data = np.fromfile(path, dtype="<f4")
    if data.size != rows * cols:
        raise EmbeddingFormatError(
            f"{path}: header declares {rows}x{cols} = {rows * cols} values, file holds {data.size}"
        )
    return data.reshape(rows, cols).astype(np.float32, copy=False)


def _load_csv(path: Path) -> np.ndarray:
    rows: list[list[float]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            try:
                values = [float(c) for c in cells]
            except ValueError:
                col = next(i for i, c in enumerate(cells, start=1) if not _is_float(c))
                raise EmbeddingFormatError(
                    f"{path}: unparsable value {cells[col - 1]!r} at row {len(rows) + 1}, col {col}",
                    row=len(rows) + 1, col=col,
                ) from None
            if rows and len(values) != len(rows[0]):
                raise EmbeddingFormatError(
                    f"{path}: row {len(rows) + 1} has {len(values)} columns, expected {len(rows[0])}",
                    row=len(rows) + 1,
                )
            rows.append(values)
    if not rows:
        raise EmbeddingFormatError(f"{path}: empty CSV")
    return np.asarray(rows, dtype=np.float64)


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_embeddings(path: str | Path, format: str = "npy") -> EmbeddingMatrix:
    """Read an embedding matrix from ``npy``, ``rawbin`` (f32 + JSON sidecar) or ``csv``."""
    path = Path(path)
    if format not in FORMATS:
        raise ValueError(f"unknown format {format!r}; choose from {FORMATS}")
    if not path.exists():
        raise FileNotFoundError(path)
    loader = {"npy": _load_npy, "rawbin": _load_rawbin, "csv": _load_csv}[format]
    return EmbeddingMatrix(loader(path), centered=False)


def save_embeddings(m: EmbeddingMatrix | np.ndarray, path: str | Path, format: str = "npy") -> None:
    data = m.data if isinstance(m, EmbeddingMatrix) else np.asarray(m)
    path = Path(path)
    if format == "npy":
        with open(path, "wb") as fh:
            npy_format.write_array(fh, np.ascontiguousarray(data), version=(1, 0), allow_pickle=False)
    elif format == "rawbin":
        np.ascontiguousarray(data, dtype="<f4").tofile(path)
        header = {"rows": data.shape[0], "cols": data.shape[1], "dtype": "f32", "order": "row-major"}
        Path(str(path) + ".json").write_text(json.dumps(header), encoding="utf-8")
    elif format == "csv":
        with open(path, "w", encoding="utf-8") as fh:
            for row in data:
                fh.write(",".join(repr(float(x)) for x in row) + "\n")
    else:
        raise ValueError(f"unknown format {format!r}; choose from {FORMATS}")


def center(m: EmbeddingMatrix) -> EmbeddingMatrix:
    """Subtract the mean row (computed in float64) from every row."""
    if m.centered:
        raise ValueError("matrix is already centered")
    data = m.data.astype(np.float64)
    mean = data.mean(axis=0)
    data -= mean
    return EmbeddingMatrix(data, centered=True)


# -- vocabulary ------------------------------------------------------------

_ESCAPES = {"\\": "\\\\", "\n": "\\n", "\t": "\\t"}
_UNESCAPES = {"\\": "\\", "n": "\n", "t": "\t"}


def escape_token(token: str) -> str:
    out = []
    for ch in token:
        if ch in _ESCAPES:
            out.append(_ESCAPES[ch])
        elif ch == "\r" or ch in "\x85\u2028\u2029\x0b\x0c\x1c\x1d\x1e" or ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    return "".join(out)


_U_RE = re.compile(r"[0-9a-fA-F]{4}")


def unescape_token(line: str) -> str:
    out = []
    i = 0
    n = len(line)
    while i < n:
        ch = line[i]
        if ch != "\\":
            out.append(ch)
            i += 1
            continue
        if i + 1 >= n:
            raise VocabularyError(f"dangling backslash in {line!r}")
        nxt = line[i + 1]
        if nxt in _UNESCAPES:
            out.append(_UNESCAPES[nxt])
            i += 2
        elif nxt == "u" and _U_RE.fullmatch(line, i + 2, i + 6):
            out.append(chr(int(line[i + 2:i + 6], 16)))
            i += 6
        else:
            raise VocabularyError(f"bad escape {line[i:i + 6]!r} in {line!r}")
    # \uXXXX pairs may encode astral characters as surrogates
    return "".join(out).encode("utf-16", "surrogatepass").decode("utf-16")


@dataclass(frozen=True, eq=False)
class Vocabulary:
    tokens: tuple[str, ...]
    index: Mapping[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        tokens = tuple(self.tokens)
        object.__setattr__(self, "tokens", tokens)
        index: dict[str, int] = {}
        for i, tok in enumerate(tokens):
            if tok in index:
                raise VocabularyError(f"duplicate token {tok!r} at lines {index[tok] + 1} and {i + 1}")
            index[tok] = i
        object.__setattr__(self, "index", index)

    def __len__(self) -> int:
        return len(self.tokens)

    def __getitem__(self, i: int) -> str:
        return self.tokens[i]

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def id(self, token: str) -> int:
        return self.index[token]


def load_vocab(path: str | Path, expected: int | None = None) -> Vocabulary:
    with open(path, encoding="utf-8", newline="\n") as fh:
        text = fh.read()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    tokens = [unescape_token(line.rstrip("\r")) for line in lines]
    vocab = Vocabulary(tuple(tokens))
    if expected is not None and len(vocab) != expected:
        raise VocabularyError(f"{path}: {len(vocab)} tokens, expected {expected}")
    return vocab


def save_vocab(vocab: Vocabulary | Iterable[str], path: str | Path) -> None:
    tokens = vocab.tokens if isinstance(vocab, Vocabulary) else list(vocab)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for tok in tokens:
            fh.write(escape_token(tok) + "\n")


def display_name(token: str, marker: str = DEFAULT_MARKER) -> str:
    """Human-readable form: word-initial tokens lose their marker, others get ``#``.

    Initial tokens whose remainder would itself look like a display form
    (leading ``#`` or a second marker) are shown verbatim so that
    :func:`resolve` maps every display name back to its token.
    """
    if token.startswith(marker):
        rest = token[len(marker):]
        if rest.startswith(DISPLAY_PREFIX) or rest.startswith(marker):
            return token
        return rest
    return DISPLAY_PREFIX + token


def resolve(vocab: Vocabulary, surface: str, policy: str = "prefer_initial",
            marker: str = DEFAULT_MARKER) -> int:
    """Map a surface form (``man``, ``#man``) to a vocabulary row id."""
    if policy == "exact":
        tried = [surface]
    elif policy == "prefer_initial":
        if surface.startswith(marker):
            tried = [surface]
        elif surface.startswith(DISPLAY_PREFIX):
            tried = [surface[len(DISPLAY_PREFIX):]]
        else:
            tried = [marker + surface, surface]
    else:
        raise ValueError(f"unknown resolution policy {policy!r}")
    for cand in tried:
        idx = vocab.index.get(cand)
        if idx is not None:
            return idx
    raise ResolutionError(surface, tried)


def resolve_many(vocab: Vocabulary, surfaces: Iterable[str], policy: str = "prefer_initial",
                 marker: str = DEFAULT_MARKER) -> tuple[list[int], list[str]]:
    """Resolve what can be resolved; return (ids, unresolved surface forms)."""
    ids, missing = [], []
    for s in surfaces:
        try:
            ids.append(resolve(vocab, s, policy, marker))
        except ResolutionError:
            missing.append(s)
    if missing:
        log.warning("dropped %d unresolvable surface forms: %s", len(missing), missing[:10])
    return ids, missing
