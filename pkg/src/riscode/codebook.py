"""1-bit codebook type, row/column flip factorization, and lossless encoding.

A codebook is an M x N matrix over {-1, +1}, one entry per RIS element.
The row/column traversal optimizer only ever produces codebooks reachable
from the all -1 state by inverting whole rows and columns.  Such "rank-1
sign" codebooks satisfy ``cb[i, j] = -(r[i] * c[j])`` for flip vectors
r in {-1,+1}^M and c in {-1,+1}^N, where -1 means "not flipped".  Because
(r, c) and (-r, -c) reconstruct the same matrix, a codebook is pinned down
by M+N-1 free bits; ``encode`` removes the global-sign ambiguity by XORing
every flip bit against the first one and dropping it.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, LengthMismatch, NotReachable

__all__ = [
    "Codebook",
    "FlipMask",
    "EncodedLabel",
    "from_mask",
    "factor",
    "encode",
    "decode",
    "initial_codebook",
]


def _as_sign_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int8)
    if arr.size == 0:
        raise DimensionMismatch(f"{name} must be non-empty")
    if not np.all(np.abs(arr) == 1):
        raise ValueError(f"{name} entries must be -1 or +1")
    return arr


@dataclass(eq=False)
class Codebook:
    """M x N matrix of per-element phase states, each entry in {-1, +1}."""

    entries: np.ndarray

    def __post_init__(self):
        arr = _as_sign_array(self.entries, "codebook")
        if arr.ndim != 2:
            raise DimensionMismatch(f"codebook must be 2-D, got shape {arr.shape}")
        arr.setflags(write=False)
        self.entries = arr

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    def __eq__(self, other) -> bool:
        return isinstance(other, Codebook) and np.array_equal(self.entries, other.entries)

    def __neg__(self) -> "Codebook":
        return Codebook(-self.entries)

    def to_text(self) -> str:
        """M lines of N space-separated {-1, 1} values."""
        return "\n".join(" ".join(str(int(v)) for v in row) for row in self.entries)

    @classmethod
    def from_text(cls, text: str) -> "Codebook":
        rows = [line.split() for line in text.strip().splitlines()]
        return cls(np.array([[int(v) for v in row] for row in rows], dtype=np.int8))


@dataclass(eq=False)
class FlipMask:
    """Row/column flip state relative to the all -1 initial codebook.

    +1 marks a flipped row/column, -1 an unflipped one.  Reconstruction
    rule: ``entry[i, j] = -(row_flips[i] * col_flips[j])``, so the mask and
    its global negation describe the same codebook.
    """

    row_flips: np.ndarray
    col_flips: np.ndarray

    def __post_init__(self):
        self.row_flips = _as_sign_array(self.row_flips, "row_flips").reshape(-1)
        self.col_flips = _as_sign_array(self.col_flips, "col_flips").reshape(-1)
        self.row_flips.setflags(write=False)
        self.col_flips.setflags(write=False)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FlipMask)
            and np.array_equal(self.row_flips, other.row_flips)
            and np.array_equal(self.col_flips, other.col_flips)
        )

    def __neg__(self) -> "FlipMask":
        return FlipMask(-self.row_flips, -self.col_flips)


@dataclass(eq=False)
class EncodedLabel:
    """Canonical (M+N-1)-bit lossless compression of a rank-1 sign codebook.

    Bit k is ``flip_bit[k+1] XOR flip_bit[0]`` over the concatenated
    (row, column) flip indicators mapped {+1 -> 1, -1 -> 0}; the reference
    bit is dropped.  The serialized bit string is most-significant-first:
    its first character is the second row-flip indicator after XOR.
    """

    bits: np.ndarray
    rows: int
    cols: int

    def __post_init__(self):
        arr = np.asarray(self.bits, dtype=np.uint8).reshape(-1)
        if not np.all(arr <= 1):
            raise ValueError("label bits must be 0 or 1")
        if arr.size != self.rows + self.cols - 1:
            raise LengthMismatch(
                f"label for {self.rows}x{self.cols} needs {self.rows + self.cols - 1} bits, "
                f"got {arr.size}"
            )
        arr.setflags(write=False)
        self.bits = arr

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, EncodedLabel)
            and self.rows == other.rows
            and self.cols == other.cols
            and np.array_equal(self.bits, other.bits)
        )

    def to_bitstring(self) -> str:
        return "".join(str(int(b)) for b in self.bits)

    @classmethod
    def from_bitstring(cls, s: str, rows: int, cols: int) -> "EncodedLabel":
        if not set(s) <= {"0", "1"}:
            raise ValueError(f"bit string may contain only 0/1, got {s!r}")
        return cls(np.frombuffer(s.encode("ascii"), dtype=np.uint8) - ord("0"), rows, cols)

    def as_int(self) -> int:
        """Bits packed most-significant-first into an unsigned integer."""
        return int(self.to_bitstring(), 2) if self.bits.size else 0

    @classmethod
    def from_int(cls, value: int, rows: int, cols: int) -> "EncodedLabel":
        width = rows + cols - 1
        if not 0 <= value < (1 << width):
            raise ValueError(f"label integer {value} out of range for {width} bits")
        return cls.from_bitstring(format(value, f"0{width}b"), rows, cols)


def initial_codebook(rows: int, cols: int) -> Codebook:
    """The all -1 state every traversal starts from."""
    return Codebook(np.full((rows, cols), -1, dtype=np.int8))


def from_mask(mask: FlipMask) -> Codebook:
    """Reconstruct the codebook described by a flip mask.

    ``from_mask(mask) == from_mask(-mask)``: flipping every row and every
    column twice-inverts each entry, so the double inversion cancels.
    """
    return Codebook(-np.outer(mask.row_flips, mask.col_flips).astype(np.int8))


def factor(cb: Codebook) -> FlipMask:
    """Recover the flip mask of a rank-1 sign codebook.

    Returns the representative with the first row unflipped
    (``row_flips[0] == -1``).  Raises NotReachable when ``cb`` has no
    row/column flip factorization, i.e. lies outside the traversal
    optimizer's reachable set.

    Candidate vectors are read off the first row/column and then verified
    against the full matrix, which is an exact O(MN) rank-1 sign test.
    """
    c = cb.entries[0, :].copy()  # row_flips[0] = -1 forces col_flips = first row
    r = (-cb.entries[:, 0] * c[0]).astype(np.int8)
    if not np.array_equal(cb.entries, -np.outer(r, c)):
        raise NotReachable(
            f"{cb.rows}x{cb.cols} codebook is not a row/column flip of the all -1 state"
        )
    return FlipMask(r, c)


def encode(cb: Codebook) -> EncodedLabel:
    """Compress a rank-1 sign codebook to its canonical M+N-1 bits.

    The two equivalent flip masks of ``cb`` differ by a global sign, i.e.
    every indicator bit toggles at once; XORing each bit against the first
    cancels the toggle, so the output does not depend on which mask the
    factorization step returned.
    """
    mask = factor(cb)
    b = (np.concatenate([mask.row_flips, mask.col_flips]) > 0).astype(np.uint8)
    return EncodedLabel(b[1:] ^ b[0], cb.rows, cb.cols)


def decode(label: EncodedLabel) -> Codebook:
    """Expand M+N-1 bits back to the unique codebook they represent.

    Prepends the dropped reference bit as 0 (first row unflipped) and
    applies the reconstruction rule.  Exact inverse of ``encode`` on the
    rank-1 sign set, and ``encode(decode(label)) == label`` for every
    label, making the mapping a bijection.
    """
    b = np.concatenate([[0], label.bits]).astype(np.int8)
    flips = (2 * b - 1).astype(np.int8)  # {1 -> +1, 0 -> -1}
    return from_mask(FlipMask(flips[: label.rows], flips[label.rows :]))
