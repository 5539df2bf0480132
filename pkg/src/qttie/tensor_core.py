"""Tensor-train containers, tensorization index maps, and dense utilities.

Conventions used throughout the package:

* Multi-indices are ``(i_1, ..., i_d)`` with ``i_1`` the finest level of the
  hierarchy.  A linear index flattens them with ``i_1`` varying fastest,
  ``linear = i_1 + n_1 * (i_2 + n_2 * (i_3 + ...))``.
* For grids in D dimensions the linear index is the Morton code of the grid
  coordinates: binary digit ``k`` (0-based, finest first) holds bit ``k // D``
  of the coordinate along axis ``k % D`` (axes cycle x, y, z).
* A TT core is an array of shape ``(r_{k-1}, n_k, r_k)``.  Operator cores use
  ``n_k = m_k * n_k'`` where the middle index is the flattened pair
  ``i_k * n_k' + j_k`` (row digit slowest).
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import CapacityError, FormatError, ShapeError

DENSE_GUARD = 2**24


class Ordering(enum.Enum):
    MORTON_INTERLEAVED = "morton"


@dataclass(frozen=True)
class TensorizationScheme:
    """Bijection between grid points and hierarchical multi-indices.

    ``vector_modes`` lists the mode sizes finest-first.  Each mode must be a
    power of two; a mode of size ``2**q`` absorbs ``q`` consecutive Morton bits,
    so a leaf mode larger than 2 groups several bisection steps.
    """

    spatial_dims: int
    vector_modes: tuple[int, ...]
    ordering: Ordering = Ordering.MORTON_INTERLEAVED

    def __post_init__(self):
        object.__setattr__(self, "vector_modes", tuple(int(n) for n in self.vector_modes))
        if self.spatial_dims not in (1, 2, 3):
            raise ValueError(f"spatial_dims must be 1, 2 or 3, got {self.spatial_dims}")
        if not self.vector_modes:
            raise ValueError("scheme needs at least one mode")
        for n in self.vector_modes:
            if n < 2 or n > 256 or n & (n - 1):
                raise ValueError(f"mode sizes must be powers of two in [2, 256], got {n}")
        if self.total_bits % self.spatial_dims:
            raise ValueError("total number of bits must be divisible by spatial_dims")

    @classmethod
    def binary(cls, spatial_dims: int, levels: int, leaf_mode: int = 2) -> "TensorizationScheme":
        """Uniform binary refinement with ``levels`` bisections per axis.

        ``leaf_mode`` merges the finest ``log2(leaf_mode)`` bits into the first mode.
        """
        bits = spatial_dims * levels
        q = int(leaf_mode).bit_length() - 1
        if leaf_mode != 1 << q or q < 1 or q > bits:
            raise ValueError(f"invalid leaf_mode {leaf_mode}")
        return cls(spatial_dims, (leaf_mode,) + (2,) * (bits - q))

    @property
    def depth(self) -> int:
        return len(self.vector_modes)

    @property
    def operator_modes(self) -> tuple[tuple[int, int], ...]:
        return tuple((n, n) for n in self.vector_modes)

    @property
    def size(self) -> int:
        return int(np.prod(self.vector_modes))

    @property
    def total_bits(self) -> int:
        return sum(int(n).bit_length() - 1 for n in self.vector_modes)

    @property
    def points_per_dim(self) -> int:
        return 1 << (self.total_bits // self.spatial_dims)


def index_to_multi(scheme: TensorizationScheme | Sequence[int], linear):
    """Mixed-radix digits of ``linear`` (finest first).

    Accepts a scalar or an integer array; for arrays the digits are stacked
    along a trailing axis.
    """
    modes = _modes_of(scheme)
    lin = np.asarray(linear, dtype=np.int64)
    total = int(np.prod(modes))
    if np.any(lin < 0) or np.any(lin >= total):
        raise IndexError(f"linear index out of range [0, {total})")
    digits = []
    rest = lin
    for n in modes:
        digits.append(rest % n)
        rest = rest // n
    out = np.stack(digits, axis=-1)
    if out.ndim == 1:
        return tuple(int(v) for v in out)
    return out


def multi_to_index(scheme: TensorizationScheme | Sequence[int], multi):
    """Inverse of :func:`index_to_multi`."""
    modes = _modes_of(scheme)
    m = np.asarray(multi, dtype=np.int64)
    if m.shape[-1] != len(modes):
        raise ShapeError(f"multi-index has {m.shape[-1]} digits, scheme has {len(modes)}")
    if np.any(m < 0) or np.any(m >= np.asarray(modes)):
        raise IndexError("multi-index digit out of range")
    lin = np.zeros(m.shape[:-1], dtype=np.int64)
    for k in reversed(range(len(modes))):
        lin = lin * modes[k] + m[..., k]
    return int(lin) if lin.ndim == 0 else lin


def grid_to_index(scheme: TensorizationScheme, coords):
    """Morton code of integer grid coordinates, shape ``(..., D)``."""
    c = np.asarray(coords, dtype=np.int64)
    D = scheme.spatial_dims
    if c.shape[-1] != D:
        raise ShapeError(f"expected {D} coordinates per point")
    levels = scheme.total_bits // D
    if np.any(c < 0) or np.any(c >= 1 << levels):
        raise IndexError("grid coordinate out of range")
    lin = np.zeros(c.shape[:-1], dtype=np.int64)
    for level in range(levels):
        for axis in range(D):
            lin |= ((c[..., axis] >> level) & 1) << (level * D + axis)
    return int(lin) if lin.ndim == 0 else lin


def index_to_grid(scheme: TensorizationScheme, linear):
    """Integer grid coordinates (trailing axis of length D) of Morton indices."""
    lin = np.asarray(linear, dtype=np.int64)
    if np.any(lin < 0) or np.any(lin >= scheme.size):
        raise IndexError(f"linear index out of range [0, {scheme.size})")
    D = scheme.spatial_dims
    levels = scheme.total_bits // D
    coords = np.zeros(lin.shape + (D,), dtype=np.int64)
    for level in range(levels):
        for axis in range(D):
            coords[..., axis] |= ((lin >> (level * D + axis)) & 1) << level
    return coords


def _modes_of(scheme) -> tuple[int, ...]:
    if isinstance(scheme, TensorizationScheme):
        return scheme.vector_modes
    return tuple(int(n) for n in scheme)


# --------------------------------------------------------------------------
# TT containers


def _freeze(core) -> np.ndarray:
    a = np.array(core, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class _TTBase:
    cores: tuple[np.ndarray, ...]

    def _validate(self, modes):
        if not self.cores:
            raise ShapeError("a tensor train needs at least one core")
        prev = 1
        for k, (c, n) in enumerate(zip(self.cores, modes)):
            if c.ndim != 3:
                raise ShapeError(f"core {k} must be 3-way, got shape {c.shape}")
            if c.shape[0] != prev or c.shape[1] != n:
                raise ShapeError(f"core {k} has shape {c.shape}, expected ({prev}, {n}, *)")
            prev = c.shape[2]
        if prev != 1:
            raise ShapeError("last rank must be 1")

    @property
    def d(self) -> int:
        return len(self.cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        return (1,) + tuple(c.shape[2] for c in self.cores)

    @property
    def max_rank(self) -> int:
        return max(self.ranks)

    @property
    def nbytes(self) -> int:
        """Payload size of the cores in bytes."""
        return sum(c.nbytes for c in self.cores)

    @property
    def flat_modes(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)


@dataclass(frozen=True, eq=False)
class TTVector(_TTBase):
    """Tensorized vector stored as a chain of cores ``(r_{k-1}, n_k, r_k)``."""

    def __post_init__(self):
        object.__setattr__(self, "cores", tuple(_freeze(c) for c in self.cores))
        self._validate([c.shape[1] for c in self.cores])

    @property
    def modes(self) -> tuple[int, ...]:
        return self.flat_modes

    @property
    def size(self) -> int:
        return int(np.prod(self.modes))

    def __repr__(self):
        return f"TTVector(modes={self.modes}, ranks={self.ranks})"


@dataclass(frozen=True, eq=False)
class TTOperator(_TTBase):
    """Tensorized matrix; core ``k`` has middle size ``row_modes[k] * col_modes[k]``."""

    row_modes: tuple[int, ...] = ()
    col_modes: tuple[int, ...] = ()
    scheme: TensorizationScheme | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "cores", tuple(_freeze(c) for c in self.cores))
        if not self.row_modes and not self.col_modes:
            # square binary-style operator: infer m_k = n_k = sqrt(mid)
            sq = []
            for c in self.cores:
                m = int(round(np.sqrt(c.shape[1])))
                if m * m != c.shape[1]:
                    raise ShapeError("cannot infer row/col modes; pass them explicitly")
                sq.append(m)
            object.__setattr__(self, "row_modes", tuple(sq))
            object.__setattr__(self, "col_modes", tuple(sq))
        object.__setattr__(self, "row_modes", tuple(int(m) for m in self.row_modes))
        object.__setattr__(self, "col_modes", tuple(int(n) for n in self.col_modes))
        if len(self.row_modes) != len(self.cores) or len(self.col_modes) != len(self.cores):
            raise ShapeError("row/col modes must have one entry per core")
        self._validate([m * n for m, n in zip(self.row_modes, self.col_modes)])

    @property
    def shape(self) -> tuple[int, int]:
        return int(np.prod(self.row_modes)), int(np.prod(self.col_modes))

    def block(self, k: int) -> np.ndarray:
        """Core ``k`` reshaped to ``(r_{k-1}, m_k, n_k, r_k)``."""
        c = self.cores[k]
        return c.reshape(c.shape[0], self.row_modes[k], self.col_modes[k], c.shape[2])

    def __repr__(self):
        return (
            f"TTOperator(row_modes={self.row_modes}, col_modes={self.col_modes}, "
            f"ranks={self.ranks})"
        )


def with_cores(x, cores):
    """New TT of the same kind and mode structure as ``x`` with other cores."""
    if isinstance(x, TTOperator):
        return TTOperator(cores, x.row_modes, x.col_modes, x.scheme)
    return TTVector(cores)


@dataclass(frozen=True, eq=False)
class DenseTensor:
    """Flat dense tensor; ``data[linear]`` with the first mode varying fastest.

    When ``row_modes``/``col_modes`` are set, mode ``k`` is the flattened
    pair ``(i_k, j_k)`` and :meth:`matrix` returns the ``M x N`` matrix.
    """

    data: np.ndarray
    modes: tuple[int, ...]
    row_modes: tuple[int, ...] | None = None
    col_modes: tuple[int, ...] | None = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "modes", tuple(int(n) for n in self.modes))
        if data.size != int(np.prod(self.modes)):
            raise ShapeError(f"data length {data.size} != product of modes {self.modes}")
        if self.row_modes is not None:
            rm, cm = tuple(self.row_modes), tuple(self.col_modes)
            object.__setattr__(self, "row_modes", rm)
            object.__setattr__(self, "col_modes", cm)
            if tuple(m * n for m, n in zip(rm, cm)) != self.modes:
                raise ShapeError("row_modes * col_modes must equal modes")

    def array(self) -> np.ndarray:
        """View as an ndarray indexed ``[i_1, ..., i_d]``."""
        return self.data.reshape(self.modes, order="F")

    def matrix(self) -> np.ndarray:
        if self.row_modes is None:
            raise ShapeError("tensor has no operator structure")
        return _pairs_to_matrix(self.array(), self.row_modes, self.col_modes)

    @classmethod
    def from_matrix(cls, M, row_modes, col_modes) -> "DenseTensor":
        """Tensorize a matrix whose rows/cols are already in hierarchical order."""
        M = np.asarray(M, dtype=np.float64)
        rm, cm = tuple(row_modes), tuple(col_modes)
        if M.shape != (int(np.prod(rm)), int(np.prod(cm))):
            raise ShapeError(f"matrix shape {M.shape} does not match modes")
        d = len(rm)
        # rows: Fortran split into (i_1..i_d); C-order view has axes reversed
        T = M.reshape(rm[::-1] + cm[::-1])
        perm = []
        for k in range(d):
            perm += [d - 1 - k, 2 * d - 1 - k]
        T = T.transpose(perm)
        modes = tuple(m * n for m, n in zip(rm, cm))
        T = T.reshape(modes)
        return cls(T.ravel(order="F"), modes, rm, cm)


def _pairs_to_matrix(arr, row_modes, col_modes):
    d = len(row_modes)
    split = []
    for m, n in zip(row_modes, col_modes):
        split += [m, n]
    T = arr.reshape(split)  # axes (i_1, j_1, i_2, j_2, ...)
    perm = [2 * k for k in reversed(range(d))] + [2 * k + 1 for k in reversed(range(d))]
    T = T.transpose(perm)  # (i_d..i_1, j_d..j_1): C-order flattening puts i_1 fastest
    return T.reshape(int(np.prod(row_modes)), int(np.prod(col_modes)))


def unfold(t: DenseTensor, k: int) -> np.ndarray:
    """k-th unfolding: rows flatten ``(i_1..i_k)``, columns ``(i_{k+1}..i_d)``."""
    d = len(t.modes)
    if not 1 <= k <= d - 1:
        raise ValueError(f"unfolding level must be in [1, {d - 1}], got {k}")
    p = int(np.prod(t.modes[:k]))
    return t.data.reshape(p, -1, order="F")


def tt_entry(x: _TTBase, idx) -> float:
    """Entry of a TT at multi-index ``idx`` (flat per-core indices)."""
    idx = tuple(int(i) for i in idx)
    if len(idx) != x.d:
        raise ShapeError(f"expected {x.d} indices, got {len(idx)}")
    v = np.ones((1,))
    for c, i in zip(x.cores, idx):
        if not 0 <= i < c.shape[1]:
            raise IndexError(f"index {i} out of range for mode of size {c.shape[1]}")
        v = v @ c[:, i, :]
    return float(v[0])


def tt_entries(x: _TTBase, idx: np.ndarray) -> np.ndarray:
    """Vectorized entries for an integer array of multi-indices ``(s, d)``."""
    idx = np.asarray(idx, dtype=np.int64)
    v = np.ones((idx.shape[0], 1, 1))
    for k, c in enumerate(x.cores):
        v = v @ c.transpose(1, 0, 2)[idx[:, k]]
    return v[:, 0, 0]


def _full_array(cores) -> np.ndarray:
    """Contract cores into an ndarray indexed ``[i_1, ..., i_d]``."""
    out = cores[0].reshape(cores[0].shape[1], -1)
    for c in cores[1:]:
        out = out @ c.reshape(c.shape[0], -1)
        out = out.reshape(-1, c.shape[2])
    # C-order flattening put i_1 slowest
    return out.reshape([c.shape[1] for c in cores])


def tt_to_dense(x: _TTBase, guard: int = DENSE_GUARD) -> DenseTensor:
    modes = x.flat_modes
    total = int(np.prod(modes, dtype=np.float64))
    if total > guard:
        raise CapacityError(f"dense size {total} exceeds guard {guard}")
    arr = _full_array(x.cores)
    if isinstance(x, TTOperator):
        return DenseTensor(arr.ravel(order="F"), modes, x.row_modes, x.col_modes)
    return DenseTensor(arr.ravel(order="F"), modes)


def tt_to_matrix(A: TTOperator, guard: int = DENSE_GUARD) -> np.ndarray:
    return tt_to_dense(A, guard).matrix()


def tt_to_vector(x: TTVector, guard: int = DENSE_GUARD) -> np.ndarray:
    return tt_to_dense(x, guard).data


def tt_frobenius_norm(x: _TTBase) -> float:
    """Frobenius norm via left-to-right Gram contractions (no densification)."""
    G = np.ones((1, 1))
    scale = 0.0  # log-scale bookkeeping keeps long chains from over/underflowing
    for c in x.cores:
        t = np.tensordot(G, c, axes=(0, 0))  # (a', n, b)
        G = np.tensordot(c, t, axes=([0, 1], [0, 1]))  # (b, b)
        s = np.abs(G).max()
        if s == 0.0:
            return 0.0
        G /= s
        scale += np.log(s)
    return float(np.sqrt(max(G[0, 0], 0.0)) * np.exp(scale / 2))


# --------------------------------------------------------------------------
# TTB1 serialization

_MAGIC = b"TTB1"


def save_ttb1(path, x: _TTBase) -> None:
    """Write a TT in the TTB1 binary format (little-endian)."""
    is_op = isinstance(x, TTOperator)
    rows = x.row_modes if is_op else x.flat_modes
    cols = x.col_modes if is_op else (1,) * x.d
    parts = [_MAGIC, struct.pack("<II", x.d, 1 if is_op else 0)]
    parts.append(struct.pack(f"<{x.d}I", *rows))
    parts.append(struct.pack(f"<{x.d}I", *cols))
    parts.append(struct.pack(f"<{x.d + 1}I", *x.ranks))
    for c in x.cores:
        parts.append(np.ascontiguousarray(c, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_ttb1(path, scheme: TensorizationScheme | None = None):
    buf = Path(path).read_bytes()
    if buf[:4] != _MAGIC:
        raise FormatError("bad magic; not a TTB1 file")
    off = 4
    try:
        d, flag = struct.unpack_from("<II", buf, off)
        off += 8
        rows = struct.unpack_from(f"<{d}I", buf, off)
        off += 4 * d
        cols = struct.unpack_from(f"<{d}I", buf, off)
        off += 4 * d
        ranks = struct.unpack_from(f"<{d + 1}I", buf, off)
        off += 4 * (d + 1)
    except struct.error as exc:
        raise FormatError(f"truncated header: {exc}") from exc
    if flag not in (0, 1):
        raise FormatError(f"bad kind flag {flag}")
    if ranks[0] != 1 or ranks[-1] != 1:
        raise FormatError("boundary ranks must be 1")
    if flag == 0 and any(c != 1 for c in cols):
        raise FormatError("vector file must have unit column modes")
    cores = []
    for k in range(d):
        shape = (ranks[k], rows[k] * cols[k], ranks[k + 1])
        count = int(np.prod(shape))
        if off + 8 * count > len(buf):
            raise FormatError("payload shorter than header implies")
        cores.append(np.frombuffer(buf, dtype="<f8", count=count, offset=off).reshape(shape))
        off += 8 * count
    if off != len(buf):
        raise FormatError(f"{len(buf) - off} trailing bytes after payload")
    if flag == 1:
        return TTOperator(cores, rows, cols, scheme)
    return TTVector(cores)
