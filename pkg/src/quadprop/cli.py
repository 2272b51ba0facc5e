"""Config-driven command line front end.

Every subcommand reads one YAML file (``--config``) and writes CSV files plus
a ``manifest.json`` sidecar into ``--out``.  Nothing is random, so a given
config always produces the same bytes on the same platform and backend.

Exit status: 0 success, 3 config could not be parsed, 4 config values are
invalid, 5 a caustic was hit, 6 a grid or quadrature was too coarse.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np
import yaml

from . import __version__
from ._backend import BACKEND
from .chains import ChainSpec, build_Z, chain_hamiltonian, decompose
from .errors import (
    CausticError,
    ConfigError,
    DimensionError,
    QuadratureError,
    TimeRangeError,
    TruncationError,
    ValidationError,
)
from .evolution import DEFAULT_STEP, classical_path
from .io import write_csv
from .ladder import LadderChain, end_to_end_map, first_maxima, forced_response, tau_grid, transition_map
from .propagator import (
    evolve_wavefunction,
    gaussian_state,
    kernel_dump,
    kernel_params,
    phase_theta,
)
from .quadform import QuadraticHamiltonian, as_time_dependence, validate

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_VALIDATION = 4
EXIT_CAUSTIC = 5
EXIT_QUADRATURE = 6

SCENARIOS = ("propagate", "chain-eigs", "excitation-map", "first-maxima", "evolve-state", "forced-chain")


# ------------------------------------------------------------------ config


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
    if not isinstance(cfg, Mapping) or not cfg:
        raise ConfigError(f"config {path} is empty or not a mapping")
    return dict(cfg)


def _section(cfg: Mapping, name: str, required: bool = True) -> dict:
    sec = cfg.get(name)
    if sec is None:
        if required:
            raise ConfigError(f"config needs a '{name}' section")
        return {}
    if not isinstance(sec, Mapping):
        raise ConfigError(f"'{name}' must be a mapping")
    return dict(sec)


def _number(sec: Mapping, key: str, default=None, *, positive=False, nonneg=False) -> float:
    if key not in sec:
        if default is None:
            raise ConfigError(f"missing numeric parameter '{key}'")
        return default
    try:
        value = float(sec[key])
    except (TypeError, ValueError):
        raise ConfigError(f"'{key}' must be a number, got {sec[key]!r}") from None
    if not math.isfinite(value):
        raise ValidationError(f"'{key}' must be finite")
    if positive and not value > 0:
        raise ValidationError(f"'{key}' must be positive")
    if nonneg and value < 0:
        raise ValidationError(f"'{key}' must be >= 0")
    return value


def _integer(sec: Mapping, key: str, default=None, minimum=1) -> int:
    value = _number(sec, key, default)
    if value != int(value) or value < minimum:
        raise ValidationError(f"'{key}' must be an integer >= {minimum}")
    return int(value)


def _chain_spec(sec: Mapping) -> ChainSpec:
    force = sec.get("force")
    if force is not None and not isinstance(force, Mapping):
        force = {"kind": "constant", "value": force}
    return ChainSpec(
        n=_integer(sec, "n"),
        m=_number(sec, "m", 1.0, positive=True),
        omega0=_number(sec, "omega0", 1.0, nonneg=True),
        boundary=sec.get("boundary", "dirichlet"),
        force=as_time_dependence(force) if force is not None else None,
    )


def _ladder_chain(sec: Mapping) -> LadderChain:
    drive = sec.get("drive")
    if drive is not None and not isinstance(drive, Mapping):
        drive = {"kind": "constant", "value": drive}
    alpha = sec.get("alpha")
    return LadderChain(
        n=_integer(sec, "n"),
        omega0=_number(sec, "omega0", 1.0),
        g=_number(sec, "g", 0.1),
        alpha=complex(alpha) if alpha is not None else None,
        drive=drive,
        hbar=_number(sec, "hbar", 1.0, positive=True),
    )


def _hamiltonian(cfg: Mapping) -> QuadraticHamiltonian:
    if "hamiltonian" in cfg:
        H = QuadraticHamiltonian.from_config(_section(cfg, "hamiltonian"))
    elif "chain" in cfg:
        H = chain_hamiltonian(_chain_spec(_section(cfg, "chain")),
                              hbar=_number(_section(cfg, "chain"), "hbar", 1.0, positive=True))
    else:
        raise ConfigError("config needs a 'hamiltonian' or 'chain' section")
    return H


def _time(cfg: Mapping) -> tuple[float, float, str]:
    sec = _section(cfg, "time")
    t = _number(sec, "t", nonneg=True)
    step = _number(sec, "step", DEFAULT_STEP, positive=True)
    return t, step, str(sec.get("method", "auto"))


def _axis(spec) -> tuple[float, float, int]:
    if not isinstance(spec, Mapping):
        raise ConfigError("grid axes must be mappings with min, max, count")
    lo, hi = _number(spec, "min"), _number(spec, "max")
    count = _integer(spec, "count", minimum=2)
    if hi <= lo:
        raise ValidationError("grid axis needs max > min")
    return lo, hi, count


def _taus(sec: Mapping) -> np.ndarray:
    return tau_grid(
        _number(sec, "tau_min", 0.0, nonneg=True),
        _number(sec, "tau_max", nonneg=True),
        _number(sec, "dtau", 0.01, positive=True),
    )


def _lengths(spec) -> list[int]:
    if isinstance(spec, Mapping):
        return list(range(_integer(spec, "min"), _integer(spec, "max") + 1))
    if isinstance(spec, (list, tuple)):
        return [int(v) for v in spec]
    raise ConfigError("'lengths' must be a list or a {min, max} mapping")


# --------------------------------------------------------------- scenarios


def run_propagate(cfg, out: Path) -> list[Path]:
    H = _hamiltonian(cfg)
    t, step, method = _time(cfg)
    if t <= 0:
        raise ValidationError("propagate needs t > 0")
    report = validate(H, np.linspace(0.0, t, 5))
    if not report.passed:
        raise ValidationError(f"Z or K is not symmetric (defect {report.max_defect:.3g})")
    path = classical_path(H, t, step, method)
    theta = phase_theta(H, path)
    k = len(path) - 1
    blocks, resp = path.blocks(k), path.response(k)
    params = kernel_params(blocks, resp, theta, H.hbar)
    summary = {
        "t": t, "n": H.n, "hbar": H.hbar, "method": path.method,
        "symplectic_defect": blocks.defect,
        "A": blocks.A.tolist(), "B": blocks.B.tolist(), "C": blocks.C.tolist(), "D": blocks.D.tolist(),
        "eta": resp.eta.tolist(), "xi": resp.xi.tolist(), "zeta": params.zeta.tolist(),
        "theta": params.theta_phase, "log_amp": params.log_amp,
        "DBinv": params.DBinv.tolist(), "BinvA": params.BinvA.tolist(), "Binv": params.Binv.tolist(),
    }
    written = [_write_json(out / "propagator.json", summary)]
    kern = _section(cfg, "kernel", required=False)
    if kern:
        qs = np.linspace(*_axis(kern.get("q")))
        qps = np.linspace(*_axis(kern.get("q_prime", kern.get("q"))))
        direction = kern.get("direction")
        written.append(kernel_dump(params, qs, qps, out / "kernel.csv", direction))
    return written


def run_chain_eigs(cfg, out: Path) -> list[Path]:
    spec = _chain_spec(_section(cfg, "chain"))
    modes = decompose(build_Z(spec), spec.m)
    header = ["k", "z_k", "omega_k"] + [f"v_k{j}" for j in range(1, spec.n + 1)]
    rows = [(k + 1, modes.z[k], modes.omegas[k], *modes.V[:, k]) for k in range(spec.n)]
    return [write_csv(out / "chain_eigs.csv", header, rows)]


def _map(cfg):
    chain = _ladder_chain(_section(cfg, "ladder"))
    sec = _section(cfg, "map")
    taus = _taus(sec)
    kind = sec.get("kind", "fixed")
    if kind == "fixed":
        return transition_map(chain, taus, source=_integer(sec, "source", 1)), sec
    if kind == "end-to-end":
        return end_to_end_map(_lengths(sec.get("lengths", {"min": 1, "max": chain.n})), taus), sec
    raise ConfigError(f"map kind must be 'fixed' or 'end-to-end', got {kind!r}")


def run_excitation_map(cfg, out: Path) -> list[Path]:
    tmap, _ = _map(cfg)
    return [tmap.to_csv(out / "excitation_map.csv")]


def run_first_maxima(cfg, out: Path) -> list[Path]:
    tmap, sec = _map(cfg)
    sites = sec.get("sites")
    if isinstance(sites, Mapping):
        sites = _lengths(sites)
    res = first_maxima(tmap, floor=_number(sec, "floor", 1e-3, positive=True), sites=sites)
    print(f"slope, intercept, r2 = {res.summary}")
    return [res.to_csv(out / "first_maxima.csv"), res.fit_csv(out / "first_maxima_fit.csv")]


def run_evolve_state(cfg, out: Path) -> list[Path]:
    t, step, method = _time(cfg)
    if "oscillator" in cfg:
        sec = _section(cfg, "oscillator")
        m, omega = _number(sec, "m", 1.0, positive=True), _number(sec, "omega", nonneg=True)
        hbar = _number(sec, "hbar", 1.0, positive=True)
        modes = decompose([[m * omega**2]], m)
        resp, theta = None, None
    else:
        sec = _section(cfg, "chain")
        spec = _chain_spec(sec)
        hbar = _number(sec, "hbar", 1.0, positive=True)
        H = chain_hamiltonian(spec, hbar)
        modes = decompose(build_Z(spec), spec.m)
        path = classical_path(H, t, step, method)
        theta = phase_theta(H, path)
        resp = path.response(len(path) - 1)
    grid = cfg.get("grid")
    if grid is None:
        raise ConfigError("evolve-state needs a 'grid' section")
    axes = [_axis(a) for a in grid] if isinstance(grid, list) else [_axis(grid)] * modes.n
    if len(axes) != modes.n:
        raise ValidationError(f"grid has {len(axes)} axes for {modes.n} modes")
    st = _section(cfg, "state")
    if st.get("kind", "gaussian") != "gaussian":
        raise ConfigError("only gaussian initial states are supported")
    width = st.get("width")
    if width is None:
        # ground state width of each mode
        width = [math.sqrt(hbar / (2 * modes.m * max(w, 1e-300))) if w > 0 else 1.0 for w in modes.omegas]
    psi0 = gaussian_state(axes, st.get("center", 0.0), width, st.get("momentum"), hbar)
    norm_tol = _number(_section(cfg, "evolution", required=False), "norm_tol", 1e-3, positive=True)
    psi = evolve_wavefunction(modes, resp, psi0, t, hbar=hbar, theta=theta, norm_tol=norm_tol)
    return [psi0.to_csv(out / "state_initial.csv"), psi.to_csv(out / "state.csv")]


def run_forced_chain(cfg, out: Path) -> list[Path]:
    chain = _ladder_chain(_section(cfg, "ladder"))
    if chain.drive is None:
        raise ValidationError("forced-chain needs ladder.drive")
    sec = _section(cfg, "time")
    if "times" in sec:
        times = [float(v) for v in sec["times"]]
        if any(v < 0 or not math.isfinite(v) for v in times):
            raise ValidationError("times must be finite and >= 0")
    else:
        times = list(tau_grid(0.0, _number(sec, "t_max", nonneg=True), _number(sec, "dt", positive=True)))
    occ_rows, mode_rows = [], []
    for t in times:
        res = forced_response(chain, t)
        occ_rows += [(t, j + 1, res.occupations[j], res.closed_form[j]) for j in range(chain.n)]
        mode_rows += [(t, j + 1, res.R_tilde[j].real, res.R_tilde[j].imag) for j in range(chain.n)]
    return [
        write_csv(out / "forced_chain.csv", ["t", "site", "occupation", "closed_form"], occ_rows),
        write_csv(out / "forced_modes.csv", ["t", "mode", "R_re", "R_im"], mode_rows),
    ]


RUNNERS: dict[str, Callable[[Mapping, Path], list[Path]]] = {
    "propagate": run_propagate,
    "chain-eigs": run_chain_eigs,
    "excitation-map": run_excitation_map,
    "first-maxima": run_first_maxima,
    "evolve-state": run_evolve_state,
    "forced-chain": run_forced_chain,
}


# ---------------------------------------------------------------- plumbing


def _write_json(path: Path, obj: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def config_hash(cfg: Mapping) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode()).hexdigest()


def run(scenario: str, cfg: Mapping, out) -> list[Path]:
    """Run one scenario and write its outputs plus ``manifest.json`` into ``out``."""
    declared = cfg.get("scenario")
    if declared is not None and declared != scenario:
        raise ConfigError(f"config is for scenario {declared!r}, not {scenario!r}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    written = RUNNERS[scenario](cfg, out)
    manifest = {
        "tool": "quadprop",
        "version": __version__,
        "backend": BACKEND,
        "scenario": scenario,
        "config_sha256": config_hash(cfg),
        "outputs": sorted(p.name for p in written),
    }
    _write_json(out / "manifest.json", manifest)
    return written


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quadprop", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name in SCENARIOS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML scenario file")
        p.add_argument("--out", default="out", help="output directory (default: ./out)")
        p.add_argument("--threads", type=int, default=None, help="cap BLAS/OpenMP threads")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.threads is not None:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=max(1, args.threads)):
                written = run(args.scenario, cfg, args.out)
        else:
            written = run(args.scenario, cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CausticError as exc:
        print(f"caustic: {exc}", file=sys.stderr)
        return EXIT_CAUSTIC
    except (QuadratureError, TruncationError) as exc:
        print(f"resolution: {exc}", file=sys.stderr)
        return EXIT_QUADRATURE
    except (ValidationError, DimensionError, TimeRangeError, ValueError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    for p in written:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
