"""Fundamental matrix, Green function and classical source responses.

The Heisenberg equations of a quadratic Hamiltonian are linear,

    d/dt [q; p] = G(t) [q; p] + [-nu(t); mu(t)],    G = s @ w(t),

so everything follows from the fundamental matrix ``theta(t) = [[A, B], [C, D]]``
solving ``d theta/dt = G(t) theta`` with ``theta(0) = 1``.  Three routes are
used to obtain it:

``closed-form``
    time-independent, ``L = 0`` and ``K`` positive definite: cos/sin of the
    normal-mode frequencies via a symmetric eigendecomposition.
``expm``
    any other time-independent generator: dense matrix exponential.
``rk4``
    time-dependent generators: fixed-step classical Runge-Kutta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.integrate import cumulative_simpson

from . import _backend
from .errors import CausticError, TimeRangeError
from .quadform import QuadraticHamiltonian, symplectic_form, symplectic_generator

TOL_SYMP = 1e-9
CAUSTIC_RTOL = 1e-12
DEFAULT_STEP = 1e-3


def symplectic_defect(blocks: "SymplecticBlocks") -> float:
    """``max |A D^T - B C^T - 1|``; zero for an exactly symplectic matrix."""
    A, B, C, D = blocks.A, blocks.B, blocks.C, blocks.D
    return float(np.max(np.abs(A @ D.T - B @ C.T - np.eye(A.shape[0]))))


def caustic_ratio(B: np.ndarray, kscale: float | None = None) -> float:
    """How far ``B`` is from singular; 0 means singular.

    The smallest singular value is compared with the largest one, which
    catches a caustic in some directions only, and with ``kscale``, the norm
    of the free-flight value ``int_0^t K dt'``, which also catches caustics
    where all of ``B`` collapses at once (``sigma_min / sigma_max`` stays 1
    there).
    """
    sv = np.linalg.svd(np.atleast_2d(B), compute_uv=False)
    if sv[0] == 0.0:
        return 0.0
    ratio = sv[-1] / sv[0]
    if kscale:
        ratio = min(ratio, sv[-1] / kscale)
    return float(ratio)


def is_caustic(B: np.ndarray, kscale: float | None = None, rtol: float = CAUSTIC_RTOL) -> bool:
    return caustic_ratio(B, kscale) < rtol


def crossed_caustic(B_prev: np.ndarray, B: np.ndarray) -> bool:
    """True if ``B`` passed through a singular matrix between two nearby nodes.

    Along a fine grid ``B_prev^{-1} B`` stays close to the identity; a caustic
    in between flips the sign of at least one of its eigenvalues.  Unlike the
    sign of ``det B`` this also sees crossings of even multiplicity.
    """
    M = np.linalg.solve(B_prev, B)
    return bool(np.any(np.linalg.eigvals(M).real < 0))


def kinetic_scale(H: QuadraticHamiltonian, times: np.ndarray) -> np.ndarray:
    """``int_0^t ||K(t')||_2 dt'`` at every node, the size of B for free flight."""
    times = np.asarray(times, dtype=float)
    if H.K.is_constant or len(times) < 2:
        return times * np.linalg.norm(H.K_at(0.0), 2)
    norms = np.array([np.linalg.norm(H.K_at(float(t)), 2) for t in times])
    return np.concatenate([[0.0], np.cumsum(0.5 * (norms[1:] + norms[:-1]) * np.diff(times))])


@dataclass(frozen=True)
class SymplecticBlocks:
    """The four ``n x n`` blocks of the fundamental matrix at time ``t``."""

    t: float
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    method: str = ""
    #: free-flight size of B (see :func:`kinetic_scale`), None if unknown
    kscale: float | None = None

    @classmethod
    def from_matrix(cls, t, M, method="", kscale=None):
        M = np.asarray(M, dtype=float)
        n = M.shape[0] // 2
        return cls(float(t), M[:n, :n], M[:n, n:], M[n:, :n], M[n:, n:], method, kscale)

    @classmethod
    def identity(cls, n, t=0.0, method=""):
        eye, zero = np.eye(n), np.zeros((n, n))
        return cls(float(t), eye, zero, zero.copy(), eye.copy(), method)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return np.block([[self.A, self.B], [self.C, self.D]])

    @property
    def defect(self) -> float:
        return symplectic_defect(self)

    def symplectic_inverse(self) -> np.ndarray:
        """``-s theta^T s = [[D^T, -B^T], [-C^T, A^T]]``."""
        return np.block([[self.D.T, -self.B.T], [-self.C.T, self.A.T]])

    def symplectic_residual(self) -> float:
        """``max |theta s theta^T - s|``, the full symplectic condition."""
        s = symplectic_form(self.n)
        M = self.matrix
        return float(np.max(np.abs(M @ s @ M.T - s)))

    @property
    def caustic(self) -> bool:
        return is_caustic(self.B, self.kscale)

    def B_inverse(self) -> np.ndarray:
        if self.caustic:
            raise CausticError(f"B is singular at t={self.t} (caustic)", t=self.t)
        return np.linalg.inv(self.B)


@dataclass(frozen=True)
class SourceResponse:
    """Driven displacements ``eta`` (positions) and ``xi`` (momenta) at time ``t``.

    ``zeta = xi - D B^{-1} eta`` is ``None`` when ``B`` is singular at ``t``.
    """

    t: float
    eta: np.ndarray
    xi: np.ndarray
    zeta: np.ndarray | None

    @property
    def zeta_available(self) -> bool:
        return self.zeta is not None

    def require_zeta(self) -> np.ndarray:
        if self.zeta is None:
            raise CausticError(f"zeta unavailable at t={self.t}: B is singular", t=self.t)
        return self.zeta

    @classmethod
    def zero(cls, n, t=0.0):
        return cls(float(t), np.zeros(n), np.zeros(n), np.zeros(n))


def _uniform_grid(t: float, step: float) -> np.ndarray:
    """Nodes ``0 = t_0 < ... < t_N = t`` with N even and spacing <= step."""
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if t == 0:
        return np.zeros(1)
    nsteps = 2 * max(1, math.ceil(t / (2.0 * step) - 1e-12))
    return np.linspace(0.0, t, nsteps + 1)


def _pick_method(H: QuadraticHamiltonian) -> str:
    if not H.is_time_independent:
        return "rk4"
    if H.has_coupling_L:
        return "expm"
    K = H.K_at(0.0)
    kappa = np.linalg.eigvalsh(0.5 * (K + K.T))
    if kappa[0] > 1e-14 * max(abs(kappa[-1]), 1e-300):
        return "closed-form"
    return "expm"


def _mode_trig(sigma: np.ndarray, times: np.ndarray):
    """cos(w t), sin(w t)/w and w sin(w t) for ``w = sqrt(sigma)``, any real sigma.

    Returns three arrays of shape ``(len(times), len(sigma))``; negative sigma
    give the hyperbolic continuation, sigma = 0 the free-particle limit.
    """
    sig = sigma[None, :]
    tt = times[:, None]
    w = np.sqrt(np.abs(sig))
    wt = w * tt
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = sig > 0
        cos_ = np.where(pos, np.cos(wt), np.cosh(wt))
        sinc = np.where(pos, np.sin(wt), np.sinh(wt)) / w
        wsin = np.where(pos, w * np.sin(wt), -w * np.sinh(wt))
    small = np.abs(sig * tt * tt) < 1e-12
    x = sig * tt * tt
    cos_ = np.where(small, 1.0 - 0.5 * x, cos_)
    sinc = np.where(small, tt * (1.0 - x / 6.0), sinc)
    wsin = np.where(small, sig * tt * (1.0 - x / 6.0), wsin)
    return cos_, sinc, wsin


def _closed_form_path(H: QuadraticHamiltonian, times: np.ndarray) -> np.ndarray:
    n = H.n
    K = H.K_at(0.0)
    Z = H.Z_at(0.0)
    kappa, U = np.linalg.eigh(0.5 * (K + K.T))
    Kh = (U * np.sqrt(kappa)) @ U.T
    Khi = (U / np.sqrt(kappa)) @ U.T
    S = Kh @ Z @ Kh
    sigma, W = np.linalg.eigh(0.5 * (S + S.T))
    cos_, sinc, wsin = _mode_trig(sigma, times)

    def fn(vals):
        return np.einsum("ik,tk,jk->tij", W, vals, W)

    c, s1, s2 = fn(cos_), fn(sinc), fn(wsin)
    out = np.empty((len(times), 2 * n, 2 * n))
    out[:, :n, :n] = Kh @ c @ Khi
    out[:, :n, n:] = Kh @ s1 @ Kh
    out[:, n:, :n] = -(Khi @ s2 @ Khi)
    out[:, n:, n:] = Khi @ c @ Kh
    return out


def _expm_path(H: QuadraticHamiltonian, times: np.ndarray) -> np.ndarray:
    G = symplectic_generator(H, 0.0)
    out = np.empty((len(times),) + G.shape)
    if len(times) > 2:
        h = times[1] - times[0]
        step = scipy.linalg.expm(h * G)
        out[0] = np.eye(G.shape[0])
        for k in range(1, len(times)):
            out[k] = step @ out[k - 1]
        return out
    for k, t in enumerate(times):
        out[k] = scipy.linalg.expm(t * G)
    return out


def _rk4_path(H: QuadraticHamiltonian, times: np.ndarray) -> np.ndarray:
    d = 2 * H.n
    if len(times) == 1:
        return np.eye(d)[None]
    half_nodes = np.linspace(times[0], times[-1], 2 * (len(times) - 1) + 1)
    gens = np.stack([symplectic_generator(H, float(t)) for t in half_nodes])
    h = times[1] - times[0]
    return _backend.rk4_path(gens, h, np.eye(d))


_PATHS = {"closed-form": _closed_form_path, "expm": _expm_path, "rk4": _rk4_path}


def fundamental_path(H: QuadraticHamiltonian, t: float, step: float = DEFAULT_STEP,
                     method: str = "auto"):
    """Fundamental matrix on the uniform grid used for source quadrature.

    Returns ``(times, thetas, method)`` with ``thetas`` of shape ``(N+1, 2n, 2n)``.
    """
    times = _uniform_grid(t, step)
    if not H.covers(0.0, float(t)):
        raise TimeRangeError(f"time dependence does not cover [0, {t}]")
    if method == "auto":
        method = _pick_method(H)
    if method not in _PATHS:
        raise ValueError(f"unknown method {method!r}")
    return times, _PATHS[method](H, times), method


def fundamental_matrix(H: QuadraticHamiltonian, t: float, step: float = DEFAULT_STEP,
                       method: str = "auto") -> SymplecticBlocks:
    """Blocks ``A, B, C, D`` of the fundamental matrix at time ``t``.

    ``step`` is only used by the RK4 route; the closed-form and ``expm``
    routes evaluate at ``t`` directly.
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if method == "auto":
        method = _pick_method(H)
    if method in ("closed-form", "expm"):
        if not H.covers(0.0, float(t)):
            raise TimeRangeError(f"time dependence does not cover [0, {t}]")
        theta = _PATHS[method](H, np.array([0.0, float(t)]))[-1]
        kscale = float(kinetic_scale(H, np.array([float(t)]))[0])
        return SymplecticBlocks.from_matrix(t, theta, method, kscale)
    times, thetas, method = fundamental_path(H, t, step, method)
    return SymplecticBlocks.from_matrix(t, thetas[-1], method, float(kinetic_scale(H, times)[-1]))


def green_function(theta_t: SymplecticBlocks, theta_tp: SymplecticBlocks,
                   tol: float = TOL_SYMP) -> np.ndarray:
    """``G(t, t') = theta(t) theta(t')^{-1}`` for ``t >= t'``."""
    if theta_t.t < theta_tp.t:
        raise ValueError(f"green_function needs t >= t' (got {theta_t.t} < {theta_tp.t})")
    if theta_tp.symplectic_residual() <= tol:
        inv = theta_tp.symplectic_inverse()
    else:
        M = theta_tp.matrix
        if np.linalg.cond(M) > 1e12:
            raise np.linalg.LinAlgError(
                f"fundamental matrix at t={theta_tp.t} is numerically singular; "
                "the integration has failed"
            )
        inv = np.linalg.inv(M)
    return theta_t.matrix @ inv


@dataclass(frozen=True)
class ClassicalPath:
    """Fundamental matrix and source responses on a uniform grid over ``[0, t]``."""

    times: np.ndarray
    thetas: np.ndarray
    eta: np.ndarray
    xi: np.ndarray
    method: str
    hbar: float = 1.0
    kscale: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.eta.shape[1]

    @property
    def t(self) -> float:
        return float(self.times[-1])

    def __len__(self):
        return len(self.times)

    def blocks(self, k: int) -> SymplecticBlocks:
        ks = None if self.kscale is None else float(self.kscale[k])
        return SymplecticBlocks.from_matrix(self.times[k], self.thetas[k], self.method, ks)

    def response(self, k: int, zeta0=None) -> SourceResponse:
        b = self.blocks(k)
        eta, xi = self.eta[k], self.xi[k]
        if k == 0 or self.times[k] == 0.0:
            zeta = np.zeros(self.n) if zeta0 is None else zeta0
        elif b.caustic:
            zeta = None
        else:
            zeta = xi - b.D @ np.linalg.solve(b.B, eta)
        return SourceResponse(float(self.times[k]), eta.copy(), xi.copy(), zeta)

    def all_blocks(self) -> list[SymplecticBlocks]:
        return [self.blocks(k) for k in range(len(self))]


def _zeta_at_zero(H: QuadraticHamiltonian, path_eta, path_xi, thetas) -> np.ndarray:
    """Limit of ``xi - D B^{-1} eta`` as ``t -> 0``, which is ``K(0)^{-1} nu(0)``."""
    nu0 = H.nu_at(0.0)
    if not np.any(nu0):
        return np.zeros(H.n)
    K0 = H.K_at(0.0)
    try:
        return np.linalg.solve(K0, nu0)
    except np.linalg.LinAlgError:
        pass
    # K singular: cubic extrapolation from the first interior nodes
    n = H.n
    z = []
    for k in (1, 2, 3, 4):
        th = thetas[k]
        z.append(path_xi[k] - th[n:, n:] @ np.linalg.solve(th[:n, n:], path_eta[k]))
    z1, z2, z3, z4 = z
    return 4 * z1 - 6 * z2 + 4 * z3 - z4


def classical_path(H: QuadraticHamiltonian, t: float, step: float = DEFAULT_STEP,
                   method: str = "auto") -> ClassicalPath:
    """Fundamental matrix and driven displacements at every grid node.

    ``[eta; xi](t_k) = theta(t_k) * integral_0^{t_k} theta(t')^{-1} [-nu; mu](t') dt'``
    with composite Simpson at even nodes (and the matching half-interval rule
    at odd nodes).
    """
    times, thetas, method = fundamental_path(H, t, step, method)
    n = H.n
    npts = len(times)
    kscale = kinetic_scale(H, times)
    if npts == 1 or not H.has_sources:
        zeros = np.zeros((npts, n))
        return ClassicalPath(times, thetas, zeros, zeros.copy(), method, H.hbar, kscale)
    u = np.stack([H.source_at(float(tk)) for tk in times])
    # symplectic inverse applied to the source: [[D^T, -B^T], [-C^T, A^T]] u
    A, B = thetas[:, :n, :n], thetas[:, :n, n:]
    C, D = thetas[:, n:, :n], thetas[:, n:, n:]
    uq, up = u[:, :n], u[:, n:]
    mT = lambda M, v: np.einsum("kji,kj->ki", M, v)  # noqa: E731  (M^T v per node)
    y = np.concatenate([mT(D, uq) - mT(B, up), -mT(C, uq) + mT(A, up)], axis=1)
    h = times[1] - times[0]
    integral = cumulative_simpson(y, dx=h, axis=0, initial=0.0)
    resp = np.einsum("kij,kj->ki", thetas, integral)
    return ClassicalPath(times, thetas, resp[:, :n], resp[:, n:], method, H.hbar, kscale)


def zeta_path(H: QuadraticHamiltonian, path: ClassicalPath) -> np.ndarray:
    """``zeta`` at every node; raises :class:`CausticError` if B is singular at a node."""
    n = path.n
    out = np.zeros((len(path), n))
    if len(path) == 1:
        return out
    out[0] = _zeta_at_zero(H, path.eta, path.xi, path.thetas)
    for k in range(1, len(path)):
        B = path.thetas[k, :n, n:]
        if path.blocks(k).caustic:
            raise CausticError(f"caustic at t={path.times[k]:.6g}", t=float(path.times[k]))
        D = path.thetas[k, n:, n:]
        out[k] = path.xi[k] - D @ np.linalg.solve(B, path.eta[k])
    return out


def source_response(H: QuadraticHamiltonian, t: float, step: float = DEFAULT_STEP,
                    method: str = "auto") -> SourceResponse:
    """Driven displacements at time ``t``; ``zeta`` is ``None`` at a caustic."""
    path = classical_path(H, t, step, method)
    return path.response(len(path) - 1)
