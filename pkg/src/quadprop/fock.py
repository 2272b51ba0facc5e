"""Brute-force reference: the oscillator chain in a truncated product Fock basis.

Used to check the closed-form transport results; it knows nothing about
normal modes or coherent-state algebra.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import expm_multiply

from .errors import TruncationError
from .ladder import LadderChain

MAX_DIM = 1 << 16


@dataclass(frozen=True)
class InitialState:
    """State of one site (others in vacuum): ``vacuum``, ``coherent`` or ``fock``."""

    kind: str = "vacuum"
    value: complex = 0
    site: int = 1

    @classmethod
    def vacuum(cls):
        return cls("vacuum")

    @classmethod
    def coherent(cls, alpha, site=1):
        return cls("coherent", complex(alpha), site)

    @classmethod
    def fock(cls, k, site=1):
        return cls("fock", int(k), site)

    def site_vector(self, cutoff: int) -> np.ndarray:
        v = np.zeros(cutoff, dtype=complex)
        if self.kind == "vacuum":
            v[0] = 1.0
        elif self.kind == "fock":
            v[int(self.value)] = 1.0
        elif self.kind == "coherent":
            a = complex(self.value)
            for k in range(cutoff):
                v[k] = a**k / math.sqrt(math.factorial(k))
            v /= np.linalg.norm(v)
        else:
            raise ValueError(f"unknown initial state kind {self.kind!r}")
        return v

    @property
    def max_occupation(self) -> int:
        return int(self.value) if self.kind == "fock" else 0


def _annihilation(cutoff: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, cutoff)), 1, format="csr", dtype=complex)


def _site_operator(op, site: int, n: int, cutoff: int):
    eye = sp.identity(cutoff, format="csr", dtype=complex)
    out = None
    for k in range(n):
        factor = op if k == site else eye
        out = factor if out is None else sp.kron(out, factor, format="csr")
    return out


def chain_operators(n: int, cutoff: int):
    """Annihilation operators of every site in the product basis (site 1 most significant)."""
    a = _annihilation(cutoff)
    return [_site_operator(a, k, n, cutoff) for k in range(n)]


def fock_hamiltonian(chain: LadderChain, cutoff: int, drive_value: float = 0.0):
    """``H / hbar`` with hopping between neighbours and ``R (a_1 + a_1^dag)`` on site 1."""
    ops = chain_operators(chain.n, cutoff)
    H = sum(chain.omega0 * (a.conj().T @ a) for a in ops)
    for k in range(chain.n - 1):
        hop = ops[k] @ ops[k + 1].conj().T
        H = H + chain.g * (hop + hop.conj().T)
    if drive_value:
        H = H + drive_value * (ops[0] + ops[0].conj().T)
    return sp.csr_matrix(H), ops


def _top_level_population(psi: np.ndarray, n: int, cutoff: int) -> float:
    digits = np.indices((cutoff,) * n).reshape(n, -1)
    top = np.any(digits == cutoff - 1, axis=0)
    return float(np.sum(np.abs(psi[top]) ** 2))


def fock_oracle(chain: LadderChain, t: float, cutoff: int, initial: InitialState | None = None,
                leak_tol: float = 1e-6, return_initial: bool = False):
    """Mean site occupations after evolving ``initial`` for time ``t``.

    ``cutoff`` is the number of levels kept per site.  Raises
    :class:`TruncationError` if more than ``leak_tol`` of the population sits
    in a top level at the start or the end.  With ``return_initial`` the
    occupations at ``t = 0`` are returned as well.
    """
    if initial is None:
        initial = InitialState.vacuum()
    n = chain.n
    if cutoff < initial.max_occupation + 2:
        raise ValueError(f"cutoff {cutoff} too small for {initial}")
    if cutoff**n > MAX_DIM:
        raise ValueError(f"basis dimension {cutoff}**{n} exceeds {MAX_DIM}")
    vecs = [np.zeros(cutoff, dtype=complex) for _ in range(n)]
    for k in range(n):
        vecs[k][0] = 1.0
    vecs[initial.site - 1] = initial.site_vector(cutoff)
    psi0 = vecs[0]
    for v in vecs[1:]:
        psi0 = np.kron(psi0, v)

    drive = chain.drive
    if drive is None or drive.is_constant:
        R0 = 0.0 if drive is None else float(np.asarray(drive(0.0)).reshape(()))
        H, ops = fock_hamiltonian(chain, cutoff, R0)
        psi = expm_multiply(-1j * t * H, psi0) if t else psi0
    else:
        H0, ops = fock_hamiltonian(chain, cutoff)
        X = ops[0] + ops[0].conj().T

        def rhs(s, y):
            R = float(np.asarray(drive(s)).reshape(()))
            return -1j * (H0 @ y + R * (X @ y))

        sol = solve_ivp(rhs, (0.0, t), psi0, method="DOP853", rtol=1e-11, atol=1e-13)
        psi = sol.y[:, -1]

    leak = max(_top_level_population(psi0, n, cutoff), _top_level_population(psi, n, cutoff))
    if leak > leak_tol:
        raise TruncationError(f"top-level population {leak:.3g} exceeds {leak_tol:g}; raise the cutoff")

    def occupations(state):
        return np.array([np.real(np.vdot(state, a.conj().T @ (a @ state))) for a in ops])

    if return_initial:
        return occupations(psi), occupations(psi0)
    return occupations(psi)
