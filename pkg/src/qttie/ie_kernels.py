"""Nystrom discretization of volume integral operators on regular grids.

The system matrix is ``A = a I + B K W C`` with ``K_ij = K(|x_i - x_j|)`` for
``i != j``, zero on the diagonal (punctured trapezoidal rule), ``W = h^D I``
and diagonal coefficient matrices ``B``, ``C``.  Rows and columns are in the
Morton order of the grid's tensorization scheme.
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .errors import CapacityError
from .tensor_core import DenseTensor, TensorizationScheme, index_to_grid

ASSEMBLY_GUARD = 4096


class Kernel(str, enum.Enum):
    LAPLACE_SINGLE_LAYER_3D = "LaplaceSingleLayer3D"
    LOG_2D = "Log2D"
    POWER = "Power"


@dataclass(frozen=True)
class Coefficient:
    """``kind`` is "One" or "Gaussian"; Gaussians are 1 + exp(-|x - center|^2)."""

    kind: str = "One"
    center: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("One", "Gaussian"):
            raise ValueError(f"unknown coefficient kind {self.kind!r}")
        if self.kind == "Gaussian":
            if self.center is None:
                raise ValueError("Gaussian coefficient needs a center")
            c = tuple(float(v) for v in self.center)
            if any(abs(v) > 1 for v in c):
                raise ValueError("Gaussian center must lie in [-1, 1]^D")
            object.__setattr__(self, "center", c)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "One":
            return np.ones(x.shape[:-1])
        return gaussian_coeff(x, np.asarray(self.center))


DEFAULT_CENTER = (0.1, 0.2, 0.3)


def gaussian(center=DEFAULT_CENTER) -> Coefficient:
    return Coefficient("Gaussian", tuple(center))


@dataclass(frozen=True)
class GridSpec:
    """Cell-centred grid on ``[-1, 1]^D`` with ``points_per_dim`` points per axis."""

    D: int
    points_per_dim: int
    leaf_mode: int = 2

    def __post_init__(self):
        n = self.points_per_dim
        if n < 2 or n & (n - 1):
            raise ValueError("points_per_dim must be a power of two >= 2")

    @property
    def levels(self) -> int:
        return self.points_per_dim.bit_length() - 1

    @property
    def N(self) -> int:
        return self.points_per_dim**self.D

    @property
    def h(self) -> float:
        return 2.0 / self.points_per_dim

    @property
    def scheme(self) -> TensorizationScheme:
        return TensorizationScheme.binary(self.D, self.levels, self.leaf_mode)

    def points(self, linear=None) -> np.ndarray:
        """Coordinates of grid points given by Morton index (all points by default)."""
        if linear is None:
            linear = np.arange(self.N)
        coords = index_to_grid(self.scheme, linear)
        return -1.0 + (coords + 0.5) * self.h


@dataclass(frozen=True)
class ProblemSpec:
    grid: GridSpec
    a: float = 1.0
    kernel: Kernel = Kernel.LAPLACE_SINGLE_LAYER_3D
    b_coeff: Coefficient = field(default_factory=Coefficient)
    c_coeff: Coefficient = field(default_factory=Coefficient)
    quadrature: str = "PuncturedTrapezoidal"
    power: float = -1.0
    kernel_weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kernel", Kernel(self.kernel))
        if self.a == 0:
            raise ValueError("identity coefficient a must be nonzero (second-kind equation)")
        if self.quadrature != "PuncturedTrapezoidal":
            raise ValueError(f"unsupported quadrature {self.quadrature!r}")
        for c in (self.b_coeff, self.c_coeff):
            if c.kind == "Gaussian" and len(c.center) != self.grid.D:
                raise ValueError("Gaussian center dimension must match the grid")

    @property
    def translation_invariant(self) -> bool:
        return self.b_coeff.kind == "One" and self.c_coeff.kind == "One"

    def kernel_fn(self) -> Callable[[np.ndarray], np.ndarray]:
        if self.kernel is Kernel.LAPLACE_SINGLE_LAYER_3D:
            return lambda r: 1.0 / (4.0 * np.pi * r)
        if self.kernel is Kernel.LOG_2D:
            return lambda r: -np.log(r) / (2.0 * np.pi)
        p = self.power
        return lambda r: r**p

    # JSON document with the field names of the dataclass
    def to_json(self) -> str:
        doc = asdict(self)
        doc["kernel"] = self.kernel.value
        return json.dumps(doc, indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "ProblemSpec":
        doc = dict(doc)
        grid = GridSpec(**doc.pop("grid"))
        coeffs = {}
        for key in ("b_coeff", "c_coeff"):
            if key in doc:
                v = doc.pop(key)
                coeffs[key] = Coefficient(**v) if isinstance(v, dict) else Coefficient(v)
        return cls(grid=grid, **coeffs, **doc)

    @classmethod
    def from_json(cls, text: str) -> "ProblemSpec":
        return cls.from_dict(json.loads(text))


def gaussian_coeff(x, x0) -> np.ndarray:
    """``1 + exp(-|x - x0|^2)`` along the last axis."""
    x = np.asarray(x, dtype=np.float64)
    diff = x - np.asarray(x0, dtype=np.float64)
    return 1.0 + np.exp(-np.sum(diff * diff, axis=-1))


def matrix_entries(p: ProblemSpec, rows, cols) -> np.ndarray:
    """Vectorized entries ``A[rows, cols]`` for Morton row/column indices."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    g = p.grid
    xi = g.points(rows)
    xj = g.points(cols)
    diff = xi - xj
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    same = rows == cols
    r = np.where(same, 1.0, r)
    vals = p.kernel_weight * p.kernel_fn()(r) * g.h**g.D
    if p.b_coeff.kind != "One":
        vals = vals * p.b_coeff(xi)
    if p.c_coeff.kind != "One":
        vals = vals * p.c_coeff(xj)
    return np.where(same, p.a, vals)


def matrix_entry(p: ProblemSpec, i: int, j: int) -> float:
    N = p.grid.N
    if not (0 <= i < N and 0 <= j < N):
        raise IndexError("grid index out of range")
    return float(matrix_entries(p, np.array([i]), np.array([j]))[0])


def dense_assemble(p: ProblemSpec, guard: int = ASSEMBLY_GUARD) -> np.ndarray:
    N = p.grid.N
    if N > guard:
        raise CapacityError(f"N={N} exceeds the dense assembly guard {guard}")
    idx = np.arange(N)
    x = p.grid.points(idx)
    diff = x[:, None, :] - x[None, :, :]
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    del diff
    np.fill_diagonal(r, 1.0)
    A = p.kernel_weight * p.kernel_fn()(r) * p.grid.h**p.grid.D
    del r
    if p.b_coeff.kind != "One":
        A *= p.b_coeff(x)[:, None]
    if p.c_coeff.kind != "One":
        A *= p.c_coeff(x)[None, :]
    np.fill_diagonal(A, p.a)
    return A


def dense_operator_tensor(p: ProblemSpec) -> DenseTensor:
    modes = p.grid.scheme.vector_modes
    return DenseTensor.from_matrix(dense_assemble(p), modes, modes)


def operator_oracle(p: ProblemSpec) -> Callable[[np.ndarray], np.ndarray]:
    """Entry function over operator multi-indices ``(b_1..b_d)``, ``b_k = i_k n_k + j_k``."""
    modes = p.grid.scheme.vector_modes

    def oracle(idx: np.ndarray) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        rows = np.zeros(idx.shape[0], dtype=np.int64)
        cols = np.zeros(idx.shape[0], dtype=np.int64)
        for k in reversed(range(len(modes))):
            n = modes[k]
            rows = rows * n + idx[:, k] // n
            cols = cols * n + idx[:, k] % n
        return matrix_entries(p, rows, cols)

    return oracle


def coefficient_vector(p: ProblemSpec, which: str = "b") -> np.ndarray:
    coeff = p.b_coeff if which == "b" else p.c_coeff
    return coeff(p.grid.points())


def diric(t, nu: int) -> np.ndarray:
    """Periodic sinc ``sin(nu t / 2) / (nu sin(t / 2))`` with its limits at ``t = 2 pi k``."""
    t = np.asarray(t, dtype=np.float64)
    k = np.round(t / (2 * np.pi))
    at_pole = np.isclose(t, 2 * np.pi * k, rtol=0.0, atol=1e-13)
    s = np.sin(t / 2)
    safe = np.where(at_pole, 1.0, s)
    out = np.sin(nu * t / 2) / (nu * safe)
    limit = np.where((k * (nu - 1)) % 2 == 0, 1.0, -1.0)
    return np.where(at_pole, limit, out)


def diric_rhs(grid: GridSpec, nu: int = 10) -> np.ndarray:
    """Samples of ``prod_axis diric(2 pi x_axis, nu)`` in Morton order."""
    if nu < 1:
        raise ValueError("nu must be >= 1")
    x = grid.points()
    return np.prod(diric(2 * np.pi * x, nu), axis=-1)
