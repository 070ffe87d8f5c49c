"""Truncated bosonic operators and tensor-product bookkeeping.

Flat index convention: ``flat = internal_index * prod(mode_dims) + r``, where
``r`` is the row-major index over the motional modes in declared order. This is
exactly the ordering produced by ``np.kron(internal, np.kron(mode0, mode1, ...))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence, Union

import numpy as np

HERMITIAN_ATOL = 1e-12


class DimensionError(ValueError):
    """Raised for invalid truncations or mismatched operator shapes."""


@dataclass(frozen=True)
class HilbertSpace:
    """Internal level space times a list of truncated Fock modes.

    Parameters
    ----------
    internal_dim : int
        Number of internal basis states (1 for a bare oscillator).
    mode_dims : tuple of int
        Fock truncation per mode (``n_max + 1``).
    mode_names : tuple of str, optional
        Labels used to address modes by name, e.g. ``("x", "z")``.
    """

    internal_dim: int
    mode_dims: tuple = ()
    mode_names: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "mode_dims", tuple(int(d) for d in self.mode_dims))
        if self.internal_dim < 1 or any(d < 1 for d in self.mode_dims):
            raise DimensionError("all dimensions must be positive")
        names = self.mode_names
        if names is None:
            names = tuple(str(i) for i in range(len(self.mode_dims)))
        names = tuple(names)
        if len(names) != len(self.mode_dims):
            raise DimensionError("mode_names and mode_dims differ in length")
        object.__setattr__(self, "mode_names", names)

    @property
    def motional_dim(self) -> int:
        return int(np.prod(self.mode_dims, dtype=np.int64)) if self.mode_dims else 1

    @property
    def total_dim(self) -> int:
        return self.internal_dim * self.motional_dim

    @property
    def dims(self) -> tuple:
        return (self.internal_dim,) + self.mode_dims

    def encode(self, internal: int, quanta: Sequence[int] = ()) -> int:
        """Flat index of ``|internal> (x) |n_0, n_1, ...>``."""
        quanta = tuple(quanta)
        if len(quanta) != len(self.mode_dims):
            raise DimensionError("need one occupation number per mode")
        return int(np.ravel_multi_index((internal,) + quanta, self.dims))

    def decode(self, flat: int) -> tuple:
        """Inverse of :meth:`encode`; returns ``(internal, quanta)``."""
        idx = np.unravel_index(int(flat), self.dims)
        return int(idx[0]), tuple(int(i) for i in idx[1:])

    def slot_index(self, slot: Union[int, str]) -> int:
        """Resolve a slot identifier to a position in :attr:`dims`.

        ``"internal"`` is slot 0; modes are addressed by name or by their
        integer position in ``mode_dims`` (so mode 0 is dims position 1).
        """
        if slot == "internal":
            return 0
        if isinstance(slot, str):
            if slot not in self.mode_names:
                raise DimensionError(f"unknown mode {slot!r}")
            return 1 + self.mode_names.index(slot)
        if not 0 <= slot < len(self.mode_dims):
            raise DimensionError(f"mode position {slot} out of range")
        return 1 + int(slot)

    def basis_vector(self, internal: int, quanta: Sequence[int] = ()) -> np.ndarray:
        v = np.zeros(self.total_dim, dtype=complex)
        v[self.encode(internal, quanta)] = 1.0
        return v


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense square matrix on a :class:`HilbertSpace`."""

    space: HilbertSpace
    elements: np.ndarray = field(repr=False)
    hermitian: bool = False

    def __post_init__(self):
        m = np.asarray(self.elements)
        n = self.space.total_dim
        if m.shape != (n, n):
            raise DimensionError(f"expected shape {(n, n)}, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "elements", m)
        if self.hermitian and n and hermiticity_error(m) > HERMITIAN_ATOL * max(1.0, np.abs(m).max()):
            raise ValueError("matrix flagged Hermitian but is not")

    @property
    def dim(self) -> int:
        return self.space.total_dim

    def dag(self) -> "OperatorMatrix":
        return OperatorMatrix(self.space, self.elements.conj().T, self.hermitian)

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            _check_same_space(self, other)
            return OperatorMatrix(self.space, self.elements @ other.elements)
        return self.elements @ other

    def __add__(self, other):
        _check_same_space(self, other)
        return OperatorMatrix(self.space, self.elements + other.elements,
                              self.hermitian and other.hermitian)

    def __sub__(self, other):
        _check_same_space(self, other)
        return OperatorMatrix(self.space, self.elements - other.elements,
                              self.hermitian and other.hermitian)

    def scale(self, c) -> "OperatorMatrix":
        return OperatorMatrix(self.space, c * self.elements,
                              self.hermitian and np.isreal(c))


def _check_same_space(a, b):
    if a.space != b.space:
        raise DimensionError("operators live on different spaces")


def hermiticity_error(m: np.ndarray) -> float:
    return float(np.abs(m - m.conj().T).max()) if m.size else 0.0


def _mode(dim: int) -> HilbertSpace:
    if dim < 2:
        raise DimensionError("Fock truncation must be at least 2")
    return HilbertSpace(1, (dim,))


def annihilation(dim: int) -> OperatorMatrix:
    """Lowering operator with ``A[n-1, n] = sqrt(n)``."""
    space = _mode(dim)
    return OperatorMatrix(space, np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1))


def creation(dim: int) -> OperatorMatrix:
    return annihilation(dim).dag()


def number_operator(dim: int) -> OperatorMatrix:
    space = _mode(dim)
    return OperatorMatrix(space, np.diag(np.arange(dim, dtype=float)), hermitian=True)


def position_quadrature(dim: int) -> OperatorMatrix:
    """``X = a + a^dagger`` (no 1/sqrt(2))."""
    a = annihilation(dim).elements
    return OperatorMatrix(_mode(dim), a + a.T, hermitian=True)


def embed(op, target_slot, space: HilbertSpace) -> OperatorMatrix:
    """Place a single-slot operator into ``space``, identity elsewhere.

    Parameters
    ----------
    op : OperatorMatrix or ndarray
        Operator acting on one factor only.
    target_slot : {"internal"} or int or str
        Mode position or name, or ``"internal"``.
    space : HilbertSpace
        Destination space.
    """
    m = op.elements if isinstance(op, OperatorMatrix) else np.asarray(op)
    herm = op.hermitian if isinstance(op, OperatorMatrix) else False
    k = space.slot_index(target_slot)
    dims = space.dims
    if m.shape != (dims[k], dims[k]):
        raise DimensionError(f"operator of shape {m.shape} does not fit slot of dim {dims[k]}")
    left = int(np.prod(dims[:k], dtype=np.int64))
    right = int(np.prod(dims[k + 1:], dtype=np.int64))
    full = np.kron(np.kron(np.eye(left), m), np.eye(right))
    return OperatorMatrix(space, full, herm)


def tensor(*factors) -> np.ndarray:
    """Kronecker product of the given arrays, left to right."""
    return reduce(np.kron, [np.asarray(f) for f in factors])
