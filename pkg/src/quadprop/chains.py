"""Coupling matrices and normal modes of uniform oscillator chains."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import DimensionError
from .quadform import QuadraticHamiltonian

BOUNDARIES = ("periodic", "dirichlet")


@dataclass(frozen=True)
class ChainSpec:
    """``n`` equal masses ``m`` joined by springs of frequency ``omega0``.

    ``force`` is an optional per-site force, anything accepted by
    :func:`~quadprop.quadform.as_time_dependence`.
    """

    n: int
    m: float = 1.0
    omega0: float = 1.0
    boundary: str = "dirichlet"
    force: Any = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"chain needs n >= 1 sites, got {self.n}")
        if not self.m > 0:
            raise ValueError(f"mass must be positive, got {self.m}")
        if not self.omega0 >= 0:
            raise ValueError(f"omega0 must be nonnegative, got {self.omega0}")
        boundary = str(self.boundary).lower()
        if boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "boundary", boundary)


def build_Z(spec: ChainSpec) -> np.ndarray:
    """Potential matrix: ``2 m omega0^2`` on the diagonal, ``-m omega0^2`` per nearest-neighbour bond.

    Periodic chains wrap indices modulo ``n``; for ``n = 2`` both bonds join
    the same pair and add up, for ``n = 1`` the self-bond cancels to ``Z = [0]``.
    """
    n = spec.n
    k = spec.m * spec.omega0**2
    Z = 2.0 * k * np.eye(n)
    if spec.boundary == "dirichlet":
        idx = np.arange(n - 1)
        Z[idx, idx + 1] -= k
        Z[idx + 1, idx] -= k
    else:
        if n == 1:
            warnings.warn("a periodic chain of one site has no springs; Z = [0]", stacklevel=2)
        for i in range(n):
            Z[i, (i + 1) % n] -= k
            Z[i, (i - 1) % n] -= k
    return Z


def chain_hamiltonian(spec: ChainSpec, hbar: float = 1.0) -> QuadraticHamiltonian:
    return QuadraticHamiltonian(
        n=spec.n, Z=build_Z(spec), K=np.eye(spec.n) / spec.m, mu=spec.force, hbar=hbar
    )


@dataclass(frozen=True)
class ModeDecomposition:
    """Eigenvalues ``z`` (ascending) and eigenvector columns ``V`` of a coupling matrix."""

    z: np.ndarray
    V: np.ndarray
    m: float = 1.0

    @property
    def n(self) -> int:
        return len(self.z)

    @property
    def omegas(self) -> np.ndarray:
        return np.sqrt(np.clip(self.z, 0.0, None) / self.m)


def _canonical_basis(block: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Deterministic orthonormal basis of the column span of ``block``.

    Standard basis vectors are projected onto the subspace and Gram-Schmidt
    orthonormalised in index order, so the result does not depend on which
    basis LAPACK happened to return.
    """
    n, d = block.shape
    P = block @ block.T
    basis = []
    for i in range(n):
        v = P[:, i].copy()
        for b in basis:
            v -= (b @ v) * b
        for b in basis:  # second pass for stability
            v -= (b @ v) * b
        norm = np.linalg.norm(v)
        if norm > tol:
            basis.append(v / norm)
        if len(basis) == d:
            break
    return np.column_stack(basis)


def _fix_sign(v: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > tol)
    if nz.size and v[nz[0]] < 0:
        return -v
    return v


def decompose(Z, m: float = 1.0, rtol: float = 1e-9) -> ModeDecomposition:
    """Symmetric eigendecomposition with a deterministic basis.

    Eigenvalues ascend; inside each degenerate cluster (gaps below
    ``rtol * max|z|``) the basis is rebuilt by :func:`_canonical_basis`; every
    eigenvector has its first nonzero component positive.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.shape[0] != Z.shape[1]:
        raise DimensionError(f"Z must be square, got {Z.shape}")
    scale = max(np.max(np.abs(Z)), 1e-300)
    if np.max(np.abs(Z - Z.T)) > 1e-12 * scale:
        raise ValueError("decompose needs a symmetric matrix")
    z, V = np.linalg.eigh(0.5 * (Z + Z.T))
    zscale = max(np.max(np.abs(z)), 1e-300)
    start = 0
    n = len(z)
    while start < n:
        stop = start + 1
        while stop < n and z[stop] - z[stop - 1] <= rtol * zscale:
            stop += 1
        if stop - start > 1:
            V[:, start:stop] = _canonical_basis(V[:, start:stop])
        start = stop
    for k in range(n):
        V[:, k] = _fix_sign(V[:, k])
    return ModeDecomposition(z=z, V=V, m=float(m))


def transform_coords(decomp: ModeDecomposition, q) -> np.ndarray:
    """Normal coordinates ``q~_i = v_i . q``; works on stacks of points ``(..., n)``."""
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != decomp.n:
        raise DimensionError(f"expected {decomp.n} components, got {q.shape[-1]}")
    return q @ decomp.V


def inverse_transform(decomp: ModeDecomposition, qt) -> np.ndarray:
    qt = np.asarray(qt, dtype=float)
    if qt.shape[-1] != decomp.n:
        raise DimensionError(f"expected {decomp.n} components, got {qt.shape[-1]}")
    return qt @ decomp.V.T


def chain_modes(spec: ChainSpec) -> ModeDecomposition:
    return decompose(build_Z(spec), spec.m)
