"""Time-dependent quadratic Hamiltonians.

A Hamiltonian of the form

.. math::

    H = \\tfrac12 q^T Z_t q + \\tfrac12 q^T L_t^T p + \\tfrac12 p^T L_t q
        + \\tfrac12 p^T K_t p - \\mu(t)^T q - \\nu(t)^T p

is described by five time-dependent arrays.  Each one is a
:class:`TimeDependence`: a constant, a linearly interpolated table, or a
named preset (a constant array scaled by a scalar profile of time).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from .errors import ConfigError, DimensionError, TimeRangeError

SYMMETRY_RTOL = 1e-12


class TimeDependence:
    """An array-valued function of time."""

    is_constant = False
    #: closed interval on which the function may be evaluated
    domain: tuple[float, float] = (-np.inf, np.inf)

    def __call__(self, t: float) -> np.ndarray:
        raise NotImplementedError

    @property
    def shape(self) -> tuple[int, ...]:
        return np.shape(self(self._probe_time()))

    def _probe_time(self) -> float:
        lo, hi = self.domain
        if np.isfinite(lo):
            return lo
        return 0.0 if hi >= 0 else hi

    def covers(self, t0: float, t1: float) -> bool:
        lo, hi = self.domain
        return lo <= t0 and t1 <= hi

    def to_config(self) -> dict:
        raise TypeError(f"{type(self).__name__} cannot be serialised")

    def sample(self, times) -> np.ndarray:
        """Evaluate at many times; returns an array of shape ``(len(times),) + shape``."""
        return np.stack([self(float(t)) for t in np.asarray(times, dtype=float)])


class Constant(TimeDependence):
    is_constant = True

    def __init__(self, value):
        self.value = np.array(value, dtype=float)
        self.value.setflags(write=False)

    def __call__(self, t):
        return self.value

    @property
    def shape(self):
        return self.value.shape

    def sample(self, times):
        times = np.asarray(times, dtype=float)
        return np.broadcast_to(self.value, times.shape + self.value.shape).copy()

    def to_config(self):
        return {"kind": "constant", "value": self.value.tolist()}

    def __repr__(self):
        return f"Constant({self.value.tolist()!r})"


class SampledTable(TimeDependence):
    """Piecewise-linear interpolation of samples ``values[k]`` taken at ``times[k]``."""

    def __init__(self, times, values):
        times = np.array(times, dtype=float)
        values = np.array(values, dtype=float)
        if times.ndim != 1 or len(times) < 2:
            raise ValueError("a table needs at least two sample times")
        if not np.all(np.diff(times) > 0):
            raise ValueError("table times must be strictly increasing")
        if values.shape[0] != len(times):
            raise DimensionError(
                f"table has {len(times)} times but {values.shape[0]} values"
            )
        self.times = times
        self.values = values
        self.domain = (float(times[0]), float(times[-1]))

    def __call__(self, t):
        lo, hi = self.domain
        if not lo <= t <= hi:
            raise TimeRangeError(f"t={t} outside table range [{lo}, {hi}]")
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        k = min(max(k, 0), len(self.times) - 2)
        t0, t1 = self.times[k], self.times[k + 1]
        w = (t - t0) / (t1 - t0)
        return (1.0 - w) * self.values[k] + w * self.values[k + 1]

    @property
    def shape(self):
        return self.values.shape[1:]

    def to_config(self):
        return {"kind": "table", "times": self.times.tolist(), "values": self.values.tolist()}


PRESETS: dict[str, tuple[Callable[..., float], tuple[str, ...]]] = {
    "constant": (lambda t: 1.0, ()),
    "linear": (lambda t, rate: 1.0 + rate * t, ("rate",)),
    "quadratic_ramp": (lambda t, rate: (1.0 + rate * t) ** 2, ("rate",)),
    "cos": (lambda t, freq, phase=0.0: np.cos(freq * t + phase), ("freq",)),
    "sin": (lambda t, freq, phase=0.0: np.sin(freq * t + phase), ("freq",)),
    "exp_decay": (lambda t, rate: np.exp(-rate * t), ("rate",)),
    "gaussian_pulse": (
        lambda t, center, width: np.exp(-((t - center) ** 2) / (2.0 * width**2)),
        ("center", "width"),
    ),
}


class NamedPreset(TimeDependence):
    """``value * profile(t, **params)`` for a profile registered in :data:`PRESETS`.

    >>> NamedPreset("quadratic_ramp", value=2.0, rate=0.1)(10.0)
    array(8.)
    """

    def __init__(self, name: str, value=1.0, **params):
        if name not in PRESETS:
            raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        profile, required = PRESETS[name]
        missing = [p for p in required if p not in params]
        if missing:
            raise ValueError(f"preset {name!r} needs parameters {missing}")
        self.name = name
        self.value = np.array(value, dtype=float)
        self.params = {k: float(v) for k, v in params.items()}
        self._profile = profile
        self.is_constant = name == "constant"

    def __call__(self, t):
        return self.value * float(self._profile(t, **self.params))

    @property
    def shape(self):
        return self.value.shape

    def to_config(self):
        return {"kind": "preset", "name": self.name, "value": self.value.tolist(), **self.params}


class Function(TimeDependence):
    """Wrap an arbitrary callable ``t -> array``.  Not serialisable."""

    def __init__(self, func: Callable[[float], Any], domain=(-np.inf, np.inf)):
        self.func = func
        self.domain = tuple(domain)

    def __call__(self, t):
        lo, hi = self.domain
        if not lo <= t <= hi:
            raise TimeRangeError(f"t={t} outside function domain [{lo}, {hi}]")
        return np.asarray(self.func(t), dtype=float)


def as_time_dependence(obj) -> TimeDependence:
    """Coerce arrays, callables and config mappings to a :class:`TimeDependence`."""
    if isinstance(obj, TimeDependence):
        return obj
    if isinstance(obj, Mapping):
        return time_dependence_from_config(obj)
    if callable(obj):
        return Function(obj)
    return Constant(obj)


def time_dependence_from_config(cfg: Mapping) -> TimeDependence:
    cfg = dict(cfg)
    kind = cfg.pop("kind", None)
    try:
        if kind == "constant":
            return Constant(cfg["value"])
        if kind == "table":
            return SampledTable(cfg["times"], cfg["values"])
        if kind == "preset":
            name = cfg.pop("name")
            return NamedPreset(name, **cfg)
    except KeyError as exc:
        raise ConfigError(f"time dependence of kind {kind!r} is missing {exc}") from None
    raise ConfigError(f"unknown time-dependence kind {kind!r}; use constant, table or preset")


def symplectic_form(n: int) -> np.ndarray:
    """The canonical matrix ``[[0, 1], [-1, 0]]`` in ``2n x 2n`` blocks."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


@dataclass(frozen=True)
class QuadraticHamiltonian:
    """Coefficient functions of a quadratic Hamiltonian with linear sources.

    Any field may be given as an array (taken as constant), a callable of
    ``t``, a config mapping, or a :class:`TimeDependence`.  ``L``, ``mu`` and
    ``nu`` default to zero.
    """

    n: int
    Z: Any
    K: Any
    L: Any = None
    mu: Any = None
    nu: Any = None
    hbar: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DimensionError(f"n must be a positive integer, got {self.n}")
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")
        n = int(self.n)
        object.__setattr__(self, "n", n)
        defaults = {"L": np.zeros((n, n)), "mu": np.zeros(n), "nu": np.zeros(n)}
        for name in ("Z", "K", "L", "mu", "nu"):
            value = getattr(self, name)
            if value is None:
                value = defaults[name]
            object.__setattr__(self, name, as_time_dependence(value))

    def _eval(self, name: str, t: float) -> np.ndarray:
        value = np.asarray(getattr(self, name)(t), dtype=float)
        expected = (self.n,) if name in ("mu", "nu") else (self.n, self.n)
        if value.shape != expected:
            if value.size == 1 and self.n == 1:
                return value.reshape(expected)
            raise DimensionError(f"{name}(t={t}) has shape {value.shape}, expected {expected}")
        return value

    def Z_at(self, t):
        return self._eval("Z", t)

    def L_at(self, t):
        return self._eval("L", t)

    def K_at(self, t):
        return self._eval("K", t)

    def mu_at(self, t):
        return self._eval("mu", t)

    def nu_at(self, t):
        return self._eval("nu", t)

    def source_at(self, t) -> np.ndarray:
        """The inhomogeneous term ``[-nu(t); mu(t)]`` of the Heisenberg equations."""
        return np.concatenate([-self.nu_at(t), self.mu_at(t)])

    @property
    def is_time_independent(self) -> bool:
        """True when Z, L and K are constant (the sources may still depend on time)."""
        return self.Z.is_constant and self.L.is_constant and self.K.is_constant

    @property
    def has_sources(self) -> bool:
        for name in ("mu", "nu"):
            td = getattr(self, name)
            if not (td.is_constant and not np.any(td(0.0))):
                return True
        return False

    @property
    def has_coupling_L(self) -> bool:
        return not (self.L.is_constant and not np.any(self.L(0.0)))

    def covers(self, t0: float, t1: float) -> bool:
        return all(getattr(self, f).covers(t0, t1) for f in ("Z", "K", "L", "mu", "nu"))

    def to_config(self) -> dict:
        cfg = {"n": self.n, "hbar": self.hbar}
        for name in ("Z", "L", "K", "mu", "nu"):
            cfg[name] = getattr(self, name).to_config()
        return cfg

    @classmethod
    def from_config(cls, cfg: Mapping) -> "QuadraticHamiltonian":
        try:
            n = cfg["n"]
            fields = {k: cfg[k] for k in ("Z", "K")}
        except KeyError as exc:
            raise ConfigError(f"hamiltonian config is missing {exc}") from None
        for k in ("L", "mu", "nu"):
            if k in cfg:
                fields[k] = cfg[k]
        for k, v in fields.items():
            if not isinstance(v, Mapping):
                fields[k] = {"kind": "constant", "value": v}
        return cls(n=n, hbar=float(cfg.get("hbar", 1.0)), **fields)


def oscillator(n: int, m: float, omega: float, force=None, hbar: float = 1.0) -> QuadraticHamiltonian:
    """Isotropic n-dimensional oscillator ``p^2/2m + m omega^2 q^2/2 - f(t).q``."""
    return QuadraticHamiltonian(
        n=n,
        Z=m * omega**2 * np.eye(n),
        K=np.eye(n) / m,
        mu=force,
        hbar=hbar,
    )


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    z_symmetry_defect: float
    k_symmetry_defect: float
    tolerance: float
    times: tuple = field(default=(), repr=False)

    @property
    def max_defect(self) -> float:
        return max(self.z_symmetry_defect, self.k_symmetry_defect)


def _relative_asymmetry(M: np.ndarray) -> float:
    scale = np.max(np.abs(M))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(M - M.T)) / scale)


def validate(H: QuadraticHamiltonian, times, rtol: float = SYMMETRY_RTOL) -> ValidationReport:
    """Check symmetry of Z and K at the sampled times.

    Raises :class:`DimensionError` when any field has the wrong shape; an
    asymmetric Z or K yields a report with ``passed=False``.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if times.size == 0 or not np.all(np.isfinite(times)):
        raise ValueError("validate needs a nonempty list of finite times")
    zdef = kdef = 0.0
    for t in times:
        t = float(t)
        Z, K = H.Z_at(t), H.K_at(t)
        H.L_at(t), H.mu_at(t), H.nu_at(t)
        zdef = max(zdef, _relative_asymmetry(Z))
        kdef = max(kdef, _relative_asymmetry(K))
    return ValidationReport(
        passed=bool(zdef <= rtol and kdef <= rtol),
        z_symmetry_defect=zdef,
        k_symmetry_defect=kdef,
        tolerance=rtol,
        times=tuple(times.tolist()),
    )


def w_matrix(H: QuadraticHamiltonian, t: float) -> np.ndarray:
    """The ``2n x 2n`` coefficient matrix ``[[Z, L^T], [L, K]]``."""
    Z, L, K = H.Z_at(t), H.L_at(t), H.K_at(t)
    return np.block([[Z, L.T], [L, K]])


def symplectic_generator(H: QuadraticHamiltonian, t: float) -> np.ndarray:
    """Generator ``[[L, K], [-Z, -L^T]]`` of the homogeneous Heisenberg flow, equal to ``s @ w``."""
    Z, L, K = H.Z_at(t), H.L_at(t), H.K_at(t)
    return np.block([[L, K], [-Z, -L.T]])
