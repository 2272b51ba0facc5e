"""Closed-form Gaussian propagator and grid-based state evolution.

For a quadratic Hamiltonian the position-space kernel is

    K(q, t | q', 0) = exp(log_amp + i theta) * exp{(i/hbar) [ q.DB^{-1}.q / 2
                      + q'.B^{-1}A.q' / 2 - q'.B^{-1}.q + q.zeta + q'.B^{-1}.eta ]}

with ``log_amp = -(n/2) log(2 pi hbar) - log|det B| / 2`` and
``theta(t) = -n pi / 4 - (1/2hbar) int_0^t zeta.K.zeta dt'``.

Evaluation is refused (:class:`~quadprop.errors.CausticError`) at or past
the first caustic, where ``det B`` vanishes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import simpson

from . import _backend
from .errors import CausticError, DimensionError, QuadratureError
from .evolution import (
    DEFAULT_STEP,
    ClassicalPath,
    SourceResponse,
    SymplecticBlocks,
    classical_path,
    crossed_caustic,
    zeta_path,
)
from .io import read_csv, write_csv
from .quadform import QuadraticHamiltonian

SIN_TOL = 1e-10
Z_TOL = 1e-10
NORM_TOL = 1e-3


@dataclass(frozen=True)
class KernelParams:
    """Coefficients of the Gaussian kernel at one time ``t``."""

    t: float
    n: int
    DBinv: np.ndarray
    BinvA: np.ndarray
    Binv: np.ndarray
    zeta: np.ndarray
    eta: np.ndarray
    theta_phase: float
    log_amp: float
    hbar: float = 1.0

    @property
    def symmetry_defect(self) -> float:
        """Largest relative asymmetry of ``D B^{-1}`` and ``B^{-1} A``."""
        out = 0.0
        for M in (self.DBinv, self.BinvA):
            scale = max(np.max(np.abs(M)), 1e-300)
            out = max(out, float(np.max(np.abs(M - M.T)) / scale))
        return out

    @property
    def amplitude(self) -> float:
        return math.exp(self.log_amp)


def _check_caustics(blocks: Sequence[SymplecticBlocks]):
    """Refuse a path on which B becomes singular at a node or passes through a singular value between nodes."""
    prev = None
    for b in blocks:
        if b.caustic:
            raise CausticError(f"caustic at t={b.t:.6g}", t=b.t)
        if prev is not None and crossed_caustic(prev.B, b.B):
            raise CausticError(f"a caustic was crossed before t={b.t:.6g}", t=b.t)
        prev = b


def _uniform_spacing(times: np.ndarray) -> float:
    if len(times) < 3 or (len(times) - 1) % 2:
        raise QuadratureError(
            f"Simpson quadrature needs an even number (>= 2) of intervals, got {len(times) - 1}"
        )
    h = np.diff(times)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0.0):
        raise QuadratureError("phase quadrature needs a uniform time grid")
    return float(h[0])


def phase_theta(H: QuadraticHamiltonian, blocks_path, responses: Sequence[SourceResponse] | None = None) -> float:
    """Kernel phase ``theta(t)`` including the ``-n pi / 4`` initial value.

    ``blocks_path`` is either a :class:`ClassicalPath` (responses are then
    taken from it) or a sequence of :class:`SymplecticBlocks` on a uniform
    grid over ``[0, t]`` with matching ``responses``.
    """
    n = H.n
    if isinstance(blocks_path, ClassicalPath):
        path = blocks_path
        if len(path) == 1:
            return -n * math.pi / 4
        _check_caustics(path.all_blocks()[1:])
        times = path.times
        zetas = zeta_path(H, path)
    else:
        blocks_path = list(blocks_path)
        if responses is None or len(responses) != len(blocks_path):
            raise ValueError("need one SourceResponse per SymplecticBlocks")
        times = np.array([b.t for b in blocks_path])
        if len(times) == 1 and times[0] == 0:
            return -n * math.pi / 4
        _check_caustics(blocks_path[1:])
        zetas = np.stack([r.require_zeta() if k else (r.zeta if r.zeta is not None else np.zeros(n))
                          for k, r in enumerate(responses)])
    if not np.any(zetas):
        return -n * math.pi / 4
    h = _uniform_spacing(times)
    integrand = np.array([z @ H.K_at(float(tk)) @ z for tk, z in zip(times, zetas)])
    return -n * math.pi / 4 - simpson(integrand, dx=h) / (2.0 * H.hbar)


def kernel_params(blocks: SymplecticBlocks, resp: SourceResponse | None, theta: float,
                  hbar: float = 1.0) -> KernelParams:
    """Assemble the kernel coefficients; raises :class:`CausticError` if B is singular."""
    n = blocks.n
    if blocks.caustic:
        raise CausticError(f"B is singular at t={blocks.t} (caustic)", t=blocks.t)
    Binv = np.linalg.inv(blocks.B)
    if resp is None:
        zeta, eta = np.zeros(n), np.zeros(n)
    else:
        zeta, eta = resp.require_zeta(), resp.eta
    _, logdet = np.linalg.slogdet(blocks.B)
    log_amp = -0.5 * n * math.log(2.0 * math.pi * hbar) - 0.5 * logdet
    return KernelParams(
        t=blocks.t, n=n,
        DBinv=blocks.D @ Binv, BinvA=Binv @ blocks.A, Binv=Binv,
        zeta=np.asarray(zeta, dtype=float), eta=np.asarray(eta, dtype=float),
        theta_phase=float(theta), log_amp=float(log_amp), hbar=float(hbar),
    )


def propagator(H: QuadraticHamiltonian, t: float, step: float = DEFAULT_STEP,
               method: str = "auto") -> KernelParams:
    """Full pipeline: fundamental matrix, sources, phase and kernel coefficients at ``t``."""
    if t <= 0:
        raise ValueError("the kernel is a delta function at t = 0; need t > 0")
    path = classical_path(H, t, step, method)
    theta = phase_theta(H, path)
    k = len(path) - 1
    return kernel_params(path.blocks(k), path.response(k), theta, H.hbar)


def kernel_eval(params: KernelParams, q, q_prime) -> np.ndarray:
    """Evaluate ``K(q, t | q', 0)``; ``q`` and ``q_prime`` broadcast over leading axes."""
    q = np.asarray(q, dtype=float)
    qp = np.asarray(q_prime, dtype=float)
    if params.n == 1:
        q = q[..., None] if q.shape[-1:] != (1,) else q
        qp = qp[..., None] if qp.shape[-1:] != (1,) else qp
    if q.shape[-1] != params.n or qp.shape[-1] != params.n:
        raise DimensionError(f"points must have {params.n} components")
    binv_eta = params.Binv @ params.eta
    S = (
        0.5 * np.einsum("...i,ij,...j->...", q, params.DBinv, q)
        + 0.5 * np.einsum("...i,ij,...j->...", qp, params.BinvA, qp)
        - np.einsum("...i,ij,...j->...", qp, params.Binv, q)
        + q @ params.zeta
        + qp @ binv_eta
    )
    return np.exp(params.log_amp + 1j * (params.theta_phase + S / params.hbar))


def kernel_dump(params: KernelParams, qs, qps, path, direction=None):
    """Write ``q, q_prime, re, im`` rows for every pair on a 1-D cut along ``direction``."""
    if direction is None:
        direction = np.eye(params.n)[0]
    direction = np.asarray(direction, dtype=float)
    qs = np.asarray(qs, dtype=float)
    qps = np.asarray(qps, dtype=float)
    S, SP = np.meshgrid(qs, qps, indexing="ij")
    vals = kernel_eval(params, S[..., None] * direction, SP[..., None] * direction)
    rows = ((a, b, v.real, v.imag) for a, b, v in zip(S.ravel(), SP.ravel(), vals.ravel()))
    return write_csv(path, ["q", "q_prime", "re", "im"], rows)


def mode_kernel(z: float, t: float, m: float, z_tol: float = Z_TOL,
                sin_tol: float = SIN_TOL) -> tuple[float, float]:
    """Diagonal and cross coefficients ``(f, g)`` of one normal-mode kernel.

    ``f = sqrt(m z) cot(t sqrt(z/m))`` and ``g = sqrt(m z) / sin(t sqrt(z/m))``;
    below ``z_tol`` the free-particle limit ``f = g = m/t`` is used.
    """
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    if z < -z_tol:
        raise ValueError(f"mode eigenvalue must be nonnegative, got {z}")
    if z < z_tol:
        return m / t, m / t
    w = math.sqrt(z / m)
    s = math.sin(w * t)
    if abs(s) < sin_tol:
        raise CausticError(f"mode with omega={w:.6g} is at a caustic at t={t:.6g}", t=t)
    root = math.sqrt(m * z)
    return root * math.cos(w * t) / s, root / s


# ---------------------------------------------------------------- grid states


@dataclass(frozen=True)
class GridState:
    """Complex samples on a uniform tensor grid; ``axes[k] = (min, max, count)``."""

    axes: tuple
    values: np.ndarray

    def __post_init__(self):
        axes = tuple((float(a), float(b), int(c)) for a, b, c in self.axes)
        object.__setattr__(self, "axes", axes)
        values = np.asarray(self.values, dtype=complex)
        object.__setattr__(self, "values", values)
        if any(c < 2 for _, _, c in axes):
            raise ValueError("each axis needs at least two points")
        if values.shape != tuple(c for _, _, c in axes):
            raise DimensionError(f"values shape {values.shape} does not match axes {axes}")

    @property
    def ndim(self) -> int:
        return len(self.axes)

    def points(self, k: int) -> np.ndarray:
        a, b, c = self.axes[k]
        return np.linspace(a, b, c)

    def spacing(self, k: int) -> float:
        a, b, c = self.axes[k]
        return (b - a) / (c - 1)

    @property
    def cell(self) -> float:
        return float(np.prod([self.spacing(k) for k in range(self.ndim)]))

    def mesh(self):
        return np.meshgrid(*[self.points(k) for k in range(self.ndim)], indexing="ij")

    def norm(self) -> float:
        """``sum |psi|^2 * cell``."""
        return float(np.sum(np.abs(self.values) ** 2) * self.cell)

    def moment(self, k: int) -> float:
        """First moment of ``|psi|^2`` along axis ``k`` (normalised)."""
        dens = np.abs(self.values) ** 2
        x = self.mesh()[k]
        return float(np.sum(x * dens) / np.sum(dens))

    @classmethod
    def from_function(cls, axes, func):
        tmp = cls(axes, np.zeros(tuple(int(c) for _, _, c in axes)))
        return cls(tmp.axes, func(*tmp.mesh()))

    def to_csv(self, path):
        comments = [f"axis {k}: {a!r} {b!r} {c}" for k, (a, b, c) in enumerate(self.axes)]
        header = [f"i{k}" for k in range(self.ndim)] + ["re", "im"]
        idx = np.indices(self.values.shape).reshape(self.ndim, -1).T
        flat = self.values.ravel()
        rows = (tuple(int(i) for i in ix) + (v.real, v.imag) for ix, v in zip(idx, flat))
        return write_csv(path, header, rows, comments)

    @classmethod
    def from_csv(cls, path):
        comments, header, rows = read_csv(path)
        axes = []
        for line in comments:
            if line.startswith("axis"):
                _, rest = line.split(":", 1)
                a, b, c = rest.split()
                axes.append((float(a), float(b), int(c)))
        ndim = len(header) - 2
        values = np.zeros(tuple(c for _, _, c in axes), dtype=complex)
        for row in rows:
            ix = tuple(int(v) for v in row[:ndim])
            values[ix] = float(row[ndim]) + 1j * float(row[ndim + 1])
        return cls(tuple(axes), values)


def gaussian_state(axes, center, width, momentum=None, hbar: float = 1.0) -> GridState:
    """Normalised product Gaussian; ``width`` is the standard deviation of ``|psi|^2``."""
    ndim = len(axes)
    center = np.broadcast_to(np.asarray(center, dtype=float), (ndim,))
    width = np.broadcast_to(np.asarray(width, dtype=float), (ndim,))
    momentum = np.zeros(ndim) if momentum is None else np.broadcast_to(np.asarray(momentum, dtype=float), (ndim,))

    def psi(*xs):
        out = np.ones(np.shape(xs[0]), dtype=complex)
        for x, c, s, p in zip(xs, center, width, momentum):
            out = out * (2 * np.pi * s**2) ** -0.25 * np.exp(-((x - c) ** 2) / (4 * s**2) + 1j * p * x / hbar)
        return out

    return GridState.from_function(axes, psi)


def _trapezoid_weights(state: GridState, k: int) -> np.ndarray:
    w = np.full(state.axes[k][2], state.spacing(k))
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def _apply_along(values: np.ndarray, axis: int, x_out, x_in, c: float, pre, post) -> np.ndarray:
    """``out[..., a, ...] = pre[a] sum_b exp(i c x_out[a] x_in[b]) post[b] values[..., b, ...]``."""
    moved = np.moveaxis(values, axis, -1)
    lead = moved.shape[:-1]
    rows = moved.reshape(-1, moved.shape[-1]) * post
    out = _backend.chirp_apply(x_out, x_in, rows, c) * pre
    return np.moveaxis(out.reshape(lead + (len(x_out),)), -1, axis)


def _mode_operators(modes, resp: SourceResponse | None, t: float, hbar: float, z_tol: float):
    """Per-mode ``(f, g, zeta~, eta~)`` after refusing caustic or post-caustic times."""
    n = len(modes.z)
    if t <= 0:
        raise ValueError("evolution time must be positive")
    if resp is None:
        zt = et = np.zeros(n)
    else:
        zt = modes.V.T @ resp.require_zeta()
        et = modes.V.T @ resp.eta
    out = []
    for k in range(n):
        z = float(modes.z[k])
        if z >= z_tol and math.sqrt(z / modes.m) * t >= math.pi - 1e-12:
            raise CausticError(
                f"mode {k} has passed its first caustic (omega t = {math.sqrt(z / modes.m) * t:.6g} >= pi)",
                t=t,
            )
        f, g = mode_kernel(max(z, 0.0), t, modes.m, z_tol=z_tol)
        out.append((f, g, zt[k], et[k]))
    return out


def _check_norm(before: float, after: float, norm_tol: float, what: str):
    if before == 0:
        return
    drift = abs(after - before) / before
    if drift > norm_tol:
        raise QuadratureError(
            f"{what} drifted by {drift:.3g} (bound {norm_tol:g}); refine or widen the grid"
        )


def evolve_wavefunction(modes, resp: SourceResponse | None, psi0: GridState, t: float, *,
                        hbar: float = 1.0, theta: float | None = None,
                        norm_tol: float = NORM_TOL, z_tol: float = Z_TOL) -> GridState:
    """Propagate a wavefunction sampled on a normal-coordinate grid.

    The kernel factorises over normal modes, so the n-dimensional integral is
    done as one trapezoid quadrature per axis.  ``resp`` holds the source
    response in the original coordinates (or ``None`` for no sources) and
    ``theta`` the full kernel phase from :func:`phase_theta`; without it the
    source-free value ``-n pi / 4`` is used.
    """
    n = len(modes.z)
    if psi0.ndim != n:
        raise DimensionError(f"state has {psi0.ndim} axes but there are {n} modes")
    ops = _mode_operators(modes, resp, t, hbar, z_tol)
    values = psi0.values
    for k, (f, g, zt, et) in enumerate(ops):
        x = psi0.points(k)
        post = _trapezoid_weights(psi0, k) * np.exp(1j * (0.5 * f * x**2 + g * et * x) / hbar)
        pre = math.sqrt(g / (2 * math.pi * hbar)) * np.exp(1j * (0.5 * f * x**2 + zt * x) / hbar)
        values = _apply_along(values, k, x, x, -g / hbar, pre, post)
    if theta is None:
        theta = -n * math.pi / 4
    out = GridState(psi0.axes, values * np.exp(1j * theta))
    _check_norm(psi0.norm(), out.norm(), norm_tol, "norm")
    return out


def _trace(rho: GridState) -> complex:
    n = rho.ndim // 2
    shape = rho.values.shape[:n]
    M = int(np.prod(shape))
    diag = np.einsum("ii->i", rho.values.reshape(M, M))
    return complex(np.sum(diag) * np.prod([rho.spacing(k) for k in range(n)]))


def evolve_density(modes, resp: SourceResponse | None, rho0: GridState, t: float, *,
                   hbar: float = 1.0, norm_tol: float = NORM_TOL,
                   z_tol: float = Z_TOL) -> GridState:
    """``rho(q, q', t) = int K(q,t|x,0) rho(x,y,0) conj K(q',t|y,0) dx dy``.

    ``rho0`` has ``2n`` axes: the ``n`` row coordinates followed by the ``n``
    column coordinates, on identical grids.
    """
    n = len(modes.z)
    if rho0.ndim != 2 * n:
        raise DimensionError(f"density needs {2 * n} axes, got {rho0.ndim}")
    if rho0.axes[:n] != rho0.axes[n:]:
        raise ValueError("row and column grids of the density must coincide")
    ops = _mode_operators(modes, resp, t, hbar, z_tol)
    values = rho0.values
    for k, (f, g, zt, et) in enumerate(ops):
        x = rho0.points(k)
        w = _trapezoid_weights(rho0, k)
        post = w * np.exp(1j * (0.5 * f * x**2 + g * et * x) / hbar)
        pre = math.sqrt(g / (2 * math.pi * hbar)) * np.exp(1j * (0.5 * f * x**2 + zt * x) / hbar)
        values = _apply_along(values, k, x, x, -g / hbar, pre, post)
        values = _apply_along(values, n + k, x, x, g / hbar, pre.conj(), post.conj())
    out = GridState(rho0.axes, values)
    _check_norm(abs(_trace(rho0)), abs(_trace(out)), norm_tol, "trace")
    return out


def density_trace(rho: GridState) -> complex:
    return _trace(rho)
