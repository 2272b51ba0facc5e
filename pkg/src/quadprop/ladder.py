"""Excitation transport along a chain of identical oscillators.

With nearest-neighbour hopping the chain Hamiltonian is ``a^dag Lambda a``
where ``Lambda = hbar (omega0 1 + g T)`` is tridiagonal.  Single-excitation
dynamics, coherent-state transport and the vacuum response to a drive on
site 1 all reduce to ``exp(-i t Lambda / hbar)``, whose eigenvectors are
discrete sine vectors.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
from scipy import stats
from scipy.integrate import simpson

from .io import write_csv
from .quadform import as_time_dependence


@dataclass(frozen=True)
class LadderChain:
    """``n`` sites with on-site frequency ``omega0`` and hopping ``g``.

    ``alpha`` is the coherent amplitude initially on site 1; ``drive`` is the
    scaled force ``R(t)`` acting on site 1 (scalar time dependence).
    """

    n: int
    omega0: float = 1.0
    g: float = 0.1
    alpha: complex | None = None
    drive: Any = None
    hbar: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"chain needs n >= 1 sites, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        if self.drive is not None:
            object.__setattr__(self, "drive", as_time_dependence(self.drive))


def build_lambda(chain: LadderChain) -> np.ndarray:
    n = chain.n
    lam = chain.omega0 * np.eye(n)
    idx = np.arange(n - 1)
    lam[idx, idx + 1] = chain.g
    lam[idx + 1, idx] = chain.g
    return chain.hbar * lam


def ladder_modes(chain: LadderChain) -> tuple[np.ndarray, np.ndarray]:
    """Frequencies ``omega0 + 2 g cos(k pi/(n+1))`` and sine eigenvectors (columns), k = 1..n."""
    n = chain.n
    k = np.arange(1, n + 1)
    angles = k * np.pi / (n + 1)
    lam = chain.omega0 + 2.0 * chain.g * np.cos(angles)
    V = math.sqrt(2.0 / (n + 1)) * np.sin(np.outer(k, k) * np.pi / (n + 1))
    return lam, V


def evolution_matrix(chain: LadderChain, t: float) -> np.ndarray:
    """``exp(-i t Lambda / hbar)`` from the spectral sum."""
    lam, V = ladder_modes(chain)
    return (V * np.exp(-1j * lam * t)) @ V.T


def _site(chain: LadderChain, i: int) -> int:
    if not 1 <= i <= chain.n:
        raise IndexError(f"site {i} outside 1..{chain.n}")
    return i - 1


def transition_probability(chain: LadderChain, t: float, i: int, j: int) -> float:
    """``|<i| exp(-i t Lambda/hbar) |j>|^2`` with 1-based sites."""
    a, b = _site(chain, i), _site(chain, j)
    lam, V = ladder_modes(chain)
    amp = np.sum(np.exp(-1j * lam * t) * V[a] * V[b])
    return float(abs(amp) ** 2)


def transition_matrix(chain: LadderChain, t: float) -> np.ndarray:
    return np.abs(evolution_matrix(chain, t)) ** 2


def end_to_end(chain: LadderChain, t: float, atol: float = 1e-10) -> float:
    """Probability that an excitation on site 1 is on site ``n`` at time ``t``.

    Uses the alternating-sign closed form; it is checked against the spectral
    sum and, should they ever disagree beyond ``atol``, the spectral sum wins.
    """
    n = chain.n
    theta = np.arange(1, n + 1) * np.pi / (n + 1)
    signs = (-1.0) ** (np.arange(1, n + 1) + 1)
    amp = np.sum(signs * np.exp(-2j * chain.g * t * np.cos(theta)) * np.sin(theta) ** 2)
    closed = float((2.0 / (n + 1)) ** 2 * abs(amp) ** 2)
    direct = transition_probability(chain, t, n, 1)
    if abs(closed - direct) > atol:
        warnings.warn(
            f"closed-form end-to-end probability {closed} disagrees with the "
            f"spectral value {direct}; using the spectral value",
            stacklevel=2,
        )
        return direct
    return closed


def coherent_excitations(chain: LadderChain, t: float) -> np.ndarray:
    """Mean occupations ``|alpha|^2 |U_1j(t)|^2`` for a coherent state started on site 1."""
    if chain.alpha is None:
        raise ValueError("chain has no coherent amplitude alpha")
    U = evolution_matrix(chain, t)
    return abs(chain.alpha) ** 2 * np.abs(U[0]) ** 2


def excitation_ratio(chain: LadderChain, t: float, j: int) -> float:
    """``<n_j>(t) / <n_1>(0)`` for any initial state of site 1 (others in vacuum)."""
    return transition_probability(chain, t, 1, j)


# ------------------------------------------------------------ transition maps


@dataclass(frozen=True)
class TransitionMap:
    """``P[s, k]`` is the probability for site ``sites[s]`` at scaled time ``taus[k]``.

    ``kind`` is ``"fixed"`` for one chain (rows are its sites) or
    ``"end-to-end"`` when each row is a chain of that length and the entry is
    the probability of going from site 1 to its last site.
    """

    taus: np.ndarray
    sites: np.ndarray
    P: np.ndarray
    kind: str = "fixed"

    def closure_defect(self) -> float:
        """``max_tau |sum_sites P - 1|`` (only meaningful for fixed-chain maps)."""
        return float(np.max(np.abs(self.P.sum(axis=0) - 1.0)))

    def column(self, site: int) -> np.ndarray:
        (idx,) = np.flatnonzero(self.sites == site)
        return self.P[idx]

    def to_csv(self, path):
        rows = ((tau, int(s), self.P[a, k]) for k, tau in enumerate(self.taus)
                for a, s in enumerate(self.sites))
        return write_csv(path, ["tau", "site", "P"], rows)


def tau_grid(tau_min: float, tau_max: float, dtau: float) -> np.ndarray:
    """``tau_min + k * dtau`` for every ``k`` that stays within ``tau_max``."""
    if dtau <= 0:
        raise ValueError("dtau must be positive")
    if tau_max < tau_min:
        raise ValueError("tau_max must be >= tau_min")
    count = int(math.floor((tau_max - tau_min) / dtau + 1e-9)) + 1
    return tau_min + dtau * np.arange(count)


def transition_map(chain: LadderChain, taus, source: int = 1) -> TransitionMap:
    """Probabilities on every site of one chain for an excitation started at ``source``."""
    if chain.g == 0:
        raise ValueError("scaled time tau = g t is undefined for g = 0")
    taus = np.asarray(taus, dtype=float)
    s = _site(chain, source)
    n = chain.n
    theta = np.arange(1, n + 1) * np.pi / (n + 1)
    _, V = ladder_modes(chain)
    # the common omega0 phase drops out of |.|^2
    phases = np.exp(-2j * np.outer(taus, np.cos(theta)))
    amps = (phases * V[s]) @ V.T
    return TransitionMap(taus, np.arange(1, n + 1), (np.abs(amps) ** 2).T, "fixed")


def end_to_end_map(lengths: Sequence[int], taus) -> TransitionMap:
    """``P(n, tau) = |<1| exp(-i t Lambda/hbar) |n>|^2`` for chains of each length ``n``."""
    taus = np.asarray(taus, dtype=float)
    lengths = np.asarray(lengths, dtype=int)
    P = np.empty((len(lengths), len(taus)))
    for a, n in enumerate(lengths):
        if n < 1:
            raise ValueError("chain lengths must be >= 1")
        k = np.arange(1, n + 1)
        theta = k * np.pi / (n + 1)
        signs = (-1.0) ** (k + 1)
        amp = np.exp(-2j * np.outer(taus, np.cos(theta))) @ (signs * np.sin(theta) ** 2)
        P[a] = (2.0 / (n + 1)) ** 2 * np.abs(amp) ** 2
    return TransitionMap(taus, lengths, P, "end-to-end")


@dataclass(frozen=True)
class FirstMaxima:
    sites: np.ndarray
    tau_star: np.ndarray
    slope: float
    intercept: float
    r2: float

    def to_csv(self, path):
        return write_csv(path, ["site", "tau_star"],
                         ((int(s), t) for s, t in zip(self.sites, self.tau_star)))

    def fit_csv(self, path):
        return write_csv(path, ["slope", "intercept", "r2"], [(self.slope, self.intercept, self.r2)])

    @property
    def summary(self) -> str:
        return f"{self.slope!r}, {self.intercept!r}, {self.r2!r}"


def first_maximum(taus: np.ndarray, P: np.ndarray, floor: float = 1e-3) -> float | None:
    """Smallest grid ``tau`` with ``P[k-1] < P[k] >= P[k+1]`` and ``P[k] > floor``."""
    inner = (P[1:-1] > P[:-2]) & (P[1:-1] >= P[2:]) & (P[1:-1] > floor)
    idx = np.flatnonzero(inner)
    if idx.size == 0:
        return None
    return float(taus[idx[0] + 1])


def first_maxima(tmap: TransitionMap, floor: float = 1e-3, sites=None) -> FirstMaxima:
    """Location of the first local maximum per site, with a least-squares line through them."""
    if len(tmap.taus) > 1 and np.max(np.diff(tmap.taus)) > 0.05 + 1e-12:
        warnings.warn("tau spacing above 0.05 may not resolve the first maxima", stacklevel=2)
    chosen = tmap.sites if sites is None else np.asarray(sites, dtype=int)
    taus_star = []
    for s in chosen:
        tau = first_maximum(tmap.taus, tmap.column(int(s)), floor)
        if tau is None:
            raise ValueError(f"no maximum above {floor} found for site {s} in the tau range")
        taus_star.append(tau)
    taus_star = np.array(taus_star)
    if len(chosen) >= 2:
        fit = stats.linregress(chosen.astype(float), taus_star)
        slope, intercept, r2 = float(fit.slope), float(fit.intercept), float(fit.rvalue**2)
    else:
        slope = intercept = r2 = float("nan")
    return FirstMaxima(np.asarray(chosen), taus_star, slope, intercept, r2)


# --------------------------------------------------------------- forced chain


@dataclass(frozen=True)
class ForcedResponse:
    """Vacuum response of a chain driven on site 1.

    ``mode_amplitudes[j]`` is the coherent amplitude of normal mode ``j``,
    ``site_amplitudes`` the coherent amplitudes of the sites and
    ``occupations`` their mean excitation numbers.  ``closed_form`` is the
    mode-independent product ``|R~|^2 |U_1j|^2`` with ``R~`` taken at the
    on-site frequency ``omega0``; it is exact only when all mode frequencies
    coincide (``g = 0``), and ``closed_form_deviation`` says how far it is
    from the per-mode result.
    """

    t: float
    R_tilde: np.ndarray
    mode_amplitudes: np.ndarray
    site_amplitudes: np.ndarray
    occupations: np.ndarray
    closed_form: np.ndarray

    @property
    def closed_form_deviation(self) -> float:
        return float(np.max(np.abs(self.closed_form - self.occupations)))


def _simpson_intervals(t: float, omega_max: float) -> int:
    # (h omega)^4 t / 180 well below 1e-12
    per_unit = max(omega_max, 1.0) / 2e-3
    return max(200, 2 * math.ceil(t * per_unit / 2))


def drive_transform(drive, lam: np.ndarray, t: float, intervals: int | None = None) -> np.ndarray:
    """``R~_j(t) = int_0^t R(t') exp(i lam_j t') dt'`` by composite Simpson."""
    lam = np.asarray(lam, dtype=float)
    if t == 0:
        return np.zeros(len(lam), dtype=complex)
    if intervals is None:
        intervals = _simpson_intervals(t, float(np.max(np.abs(lam))))
    if intervals % 2:
        intervals += 1
    times = np.linspace(0.0, t, intervals + 1)
    R = np.asarray(drive.sample(times), dtype=float).reshape(len(times))
    integrand = R[:, None] * np.exp(1j * np.outer(times, lam))
    return simpson(integrand, x=times, axis=0)


def forced_response(chain: LadderChain, t: float, intervals: int | None = None) -> ForcedResponse:
    if chain.drive is None:
        raise ValueError("chain has no drive R(t)")
    lam, M = ladder_modes(chain)
    R_tilde = drive_transform(chain.drive, lam, t, intervals)
    beta = -1j * np.exp(-1j * lam * t) * M[0] * R_tilde
    site = M @ beta
    occ = np.abs(site) ** 2
    R_common = drive_transform(chain.drive, np.array([chain.omega0]), t, intervals)[0]
    closed = abs(R_common) ** 2 * np.abs(evolution_matrix(chain, t)[0]) ** 2
    return ForcedResponse(float(t), R_tilde, beta, site, occ, closed)
