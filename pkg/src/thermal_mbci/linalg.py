"""Dense complex matrix helpers: permanents, random unitaries, PSD checks."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numba
import numpy as np

from .errors import DimensionError, SizeLimitError

NAIVE_MAX_N = 10
RYSER_MAX_N = 30

CONSTRUCTIONS = ("haar-random", "explicit-entries", "named-preset")
PRESETS = ("identity", "balanced-beamsplitter", "discrete-fourier")

# rows of the permutation table processed per chunk in the brute-force permanent
_NAIVE_CHUNK = 1 << 16


def as_complex_matrix(m, name="matrix") -> np.ndarray:
    """Coerce ``m`` to a finite 2-D complex128 array."""
    arr = np.asarray(m, dtype=np.complex128)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def _square(m, name="matrix") -> np.ndarray:
    arr = as_complex_matrix(m, name)
    if arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {arr.shape}")
    return arr


@lru_cache(maxsize=None)
def permutation_table(n: int) -> np.ndarray:
    """All permutations of ``range(n)`` in lexicographic order, one per row."""
    dtype = np.int8 if n < 127 else np.int64
    if n == 0:
        return np.zeros((1, 0), dtype=dtype)
    table = np.array(list(itertools.permutations(range(n))), dtype=dtype)
    table.setflags(write=False)
    return table


def permanent_naive(m) -> complex:
    """Permanent as the explicit sum over all ``n!`` permutations.

    Intended as a reference for small matrices; refuses ``n > 10``.
    """
    a = _square(m)
    n = a.shape[0]
    if n > NAIVE_MAX_N:
        raise SizeLimitError(f"permanent_naive supports n <= {NAIVE_MAX_N}, got {n}")
    if n == 0:
        return 1 + 0j
    perms = permutation_table(n)
    rows = np.arange(n)
    total = 0j
    for start in range(0, len(perms), _NAIVE_CHUNK):
        block = perms[start:start + _NAIVE_CHUNK]
        total += a[rows, block].prod(axis=1).sum()
    return complex(total)


@numba.njit(cache=True)
def _ryser_gray(a):
    # Ryser inclusion-exclusion in the Nijenhuis-Wilf shifted form: row sums
    # start at x_i = a[i, n-1] - sum_j a[i, j] / 2 and the Gray code walks the
    # subsets of the first n-1 columns, so the terms stay O(per) in size.
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    x = np.empty(n, dtype=np.complex128)
    for i in range(n):
        s = 0.0j
        for j in range(n):
            s += a[i, j]
        x[i] = a[i, n - 1] - 0.5 * s
    prod = 1.0 + 0.0j
    for i in range(n):
        prod *= x[i]
    total = prod
    sign = -1.0
    for k in range(1, 1 << (n - 1)):
        j = 0
        while not (k >> j) & 1:
            j += 1
        if ((k ^ (k >> 1)) >> j) & 1:
            for i in range(n):
                x[i] += a[i, j]
        else:
            for i in range(n):
                x[i] -= a[i, j]
        prod = 1.0 + 0.0j
        for i in range(n):
            prod *= x[i]
        total += sign * prod
        sign = -sign
    if n % 2 == 1:
        return 2.0 * total
    return -2.0 * total


@numba.njit(cache=True)
def _ryser_batch(stack):
    out = np.empty(stack.shape[0], dtype=np.complex128)
    for b in range(stack.shape[0]):
        out[b] = _ryser_gray(stack[b])
    return out


def permanent_ryser(m) -> complex:
    """Permanent by Ryser's formula with Gray-code subset order, O(2^n n).

    The summation order is fixed, so the result is bit-reproducible.
    """
    a = _square(m)
    n = a.shape[0]
    if n > RYSER_MAX_N:
        raise SizeLimitError(f"permanent_ryser supports n <= {RYSER_MAX_N}, got {n}")
    return complex(_ryser_gray(np.ascontiguousarray(a)))


def permanent_ryser_batch(stack) -> np.ndarray:
    """Permanents of a stack of square matrices with shape ``(k, n, n)``."""
    arr = np.ascontiguousarray(np.asarray(stack, dtype=np.complex128))
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise DimensionError(f"expected a (k, n, n) stack, got shape {arr.shape}")
    if arr.shape[1] > RYSER_MAX_N:
        raise SizeLimitError(f"permanent_ryser supports n <= {RYSER_MAX_N}, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("stack has non-finite entries")
    return _ryser_batch(arr)


def hadamard_product(a, b) -> np.ndarray:
    a = as_complex_matrix(a, "a")
    b = as_complex_matrix(b, "b")
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a * b


def is_hermitian(m, tol: float = 1e-9) -> bool:
    a = _square(m)
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= tol)


def is_positive_semidefinite(m, tol: float = 1e-9) -> bool:
    """Hermitian within ``tol`` and no eigenvalue below ``-tol``."""
    a = _square(m)
    if not is_hermitian(a, tol):
        return False
    if a.shape[0] == 0:
        return True
    herm = 0.5 * (a + a.conj().T)
    return bool(np.linalg.eigvalsh(herm).min() >= -tol)


def unitarity_residual(u) -> float:
    """Largest entry of ``|U U^dagger - I|``."""
    a = _square(u, "unitary")
    return float(np.max(np.abs(a @ a.conj().T - np.eye(a.shape[0])), initial=0.0))


def is_unitary(u, tol: float = 1e-10) -> bool:
    return unitarity_residual(u) <= tol


@dataclass(frozen=True)
class UnitarySpec:
    """How to build an ``M x M`` interferometer unitary."""

    dim: int
    seed: int = 0
    construction: str = "haar-random"
    preset: str | None = None
    entries: np.ndarray | None = None

    def __post_init__(self):
        if self.construction not in CONSTRUCTIONS:
            raise ValueError(f"unknown construction {self.construction!r}")
        if int(self.dim) < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dim}")
        if self.construction == "named-preset" and self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; expected one of {PRESETS}")
        if self.construction == "explicit-entries":
            if self.entries is None:
                raise ValueError("explicit-entries construction needs entries")
            u = _square(self.entries, "entries")
            if u.shape[0] != self.dim:
                raise DimensionError(f"entries are {u.shape[0]}x{u.shape[0]}, dim is {self.dim}")
            if not is_unitary(u):
                raise ValueError(f"entries are not unitary (residual {unitarity_residual(u):.3e})")
        if self.construction == "named-preset" and self.preset == "balanced-beamsplitter" and self.dim != 2:
            raise ValueError("balanced-beamsplitter preset requires dim 2")


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary from a complex Ginibre matrix via QR."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    # without this phase fix the QR output is not Haar distributed
    return q * (d / np.abs(d))


def random_unitary(spec: UnitarySpec) -> np.ndarray:
    m = int(spec.dim)
    if spec.construction == "haar-random":
        return haar_unitary(m, np.random.default_rng(spec.seed))
    if spec.construction == "explicit-entries":
        return np.array(spec.entries, dtype=np.complex128)
    if spec.preset == "identity":
        return np.eye(m, dtype=np.complex128)
    if spec.preset == "balanced-beamsplitter":
        return np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2.0)
    k = np.arange(m)
    return np.exp(2j * np.pi * np.outer(k, k) / m) / math.sqrt(m)
