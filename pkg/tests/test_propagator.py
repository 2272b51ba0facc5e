import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import solve_banded

import oracles
from quadprop.chains import ChainSpec, build_Z, chain_hamiltonian, decompose, transform_coords
from quadprop.errors import CausticError, DimensionError, QuadratureError
from quadprop.evolution import SourceResponse, classical_path, fundamental_matrix
from quadprop.propagator import (
    GridState,
    density_trace,
    evolve_density,
    evolve_wavefunction,
    gaussian_state,
    kernel_dump,
    kernel_eval,
    kernel_params,
    mode_kernel,
    phase_theta,
    propagator,
)
from quadprop.quadform import NamedPreset, QuadraticHamiltonian, oscillator


def crank_nicolson(x, psi, t, m, omega, force, dt=1e-3, hbar=1.0):
    """Reference solver for ``-hbar^2/2m d^2/dx^2 + m omega^2 x^2 / 2 - f(t) x``."""
    dx = x[1] - x[0]
    nsteps = int(round(t / dt))
    kin = hbar**2 / (2 * m * dx**2)
    off = np.full(len(x), -kin, dtype=complex)
    for k in range(nsteps):
        V = 0.5 * m * omega**2 * x**2 - force((k + 0.5) * dt) * x
        diag = 2 * kin + V
        a = 0.5j * dt / hbar
        ab = np.vstack([a * off, 1 + a * diag, a * off])
        rhs = (1 - a * diag) * psi
        rhs[1:] -= a * off[1:] * psi[:-1]
        rhs[:-1] -= a * off[:-1] * psi[1:]
        psi = solve_banded((1, 1), ab, rhs)
    return psi


@pytest.mark.parametrize("wt", [0.3, 1.4, 2.8])
def test_kernel_matches_forced_oscillator(wt):
    m, omega, f0, hbar = 1.2, 0.9, 0.35, 0.7
    t = wt / omega
    params = propagator(oscillator(1, m, omega, force=[f0], hbar=hbar), t)
    q = np.linspace(-3, 3, 13)
    Q, QP = np.meshgrid(q, q + 0.4, indexing="ij")
    got = kernel_eval(params, Q, QP)
    want = oracles.forced_oscillator_kernel(Q, QP, t, f0, m, omega, hbar)
    np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("wt", [0.1, 1.0, 3.0])
def test_kernel_modulus(wt):
    m, omega = 0.8, 1.1
    t = wt / omega
    params = propagator(oscillator(1, m, omega), t)
    mod = math.sqrt(m * omega / (2 * math.pi * abs(math.sin(omega * t))))
    assert abs(params.amplitude - mod) <= 1e-12 * mod


def test_free_particle_kernel():
    m, t = 2.0, 0.6
    params = propagator(QuadraticHamiltonian(n=1, Z=0.0, K=1.0 / m), t)
    q = np.linspace(-2, 2, 9)
    np.testing.assert_allclose(kernel_eval(params, q, q[::-1]), oracles.free_kernel(q, q[::-1], t, m),
                               rtol=1e-12)


@pytest.mark.parametrize("wt", [0.5, 2.0, 2.8])
def test_phase_matches_closed_form(wt):
    m, omega, f0 = 1.0, 1.3, 0.5
    t = wt / omega
    H = oscillator(1, m, omega, force=[f0])
    theta = phase_theta(H, classical_path(H, t, step=1e-3))
    assert theta == pytest.approx(oracles.forced_oscillator_theta(t, f0, m, omega), abs=1e-10)


def test_phase_without_sources_is_maslov_constant():
    H = oscillator(3, 1.0, 1.0)
    assert phase_theta(H, classical_path(H, 1.0)) == pytest.approx(-3 * math.pi / 4)


def test_phase_from_block_sequence_matches_path():
    H = oscillator(1, 1.0, 1.0, force=[0.2])
    path = classical_path(H, 1.0, step=0.01)
    blocks = path.all_blocks()
    resps = [path.response(k) for k in range(len(path))]
    assert phase_theta(H, blocks, resps) == pytest.approx(phase_theta(H, path), abs=1e-12)
    with pytest.raises(QuadratureError):
        phase_theta(H, blocks[:-1], resps[:-1])


def test_chain_kernel_factorises_over_modes():
    """Full kernel equals the product of normal-mode kernels (no sources)."""
    spec = ChainSpec(3, m=1.0, omega0=0.8)
    t = 0.9
    params = propagator(chain_hamiltonian(spec), t)
    modes = decompose(build_Z(spec), spec.m)
    rng = np.random.default_rng(5)
    q, qp = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
    qt, qpt = transform_coords(modes, q), transform_coords(modes, qp)
    want = np.exp(-3j * math.pi / 4) * np.ones(4, dtype=complex)
    for k in range(3):
        f, g = mode_kernel(modes.z[k], t, modes.m)
        want *= math.sqrt(g / (2 * math.pi)) * np.exp(1j * (0.5 * f * (qt[:, k] ** 2 + qpt[:, k] ** 2)
                                                          - g * qt[:, k] * qpt[:, k]))
    np.testing.assert_allclose(kernel_eval(params, q, qp), want, rtol=1e-11)


def test_kernel_rejects_wrong_dimension():
    params = propagator(oscillator(2, 1.0, 1.0), 0.5)
    with pytest.raises(DimensionError):
        kernel_eval(params, np.zeros(3), np.zeros(3))


def test_kernel_params_symmetric_blocks():
    rng = np.random.default_rng(2)
    M = rng.normal(size=(4, 4))
    w = M @ M.T / 4 + 0.2 * np.eye(4)
    H = QuadraticHamiltonian(n=2, Z=w[:2, :2], L=w[2:, :2], K=w[2:, 2:])
    params = kernel_params(fundamental_matrix(H, 0.4), None, -math.pi / 2)
    assert params.symmetry_defect < 1e-12


def test_caustic_refusals():
    H = oscillator(1, 1.0, 1.0, force=[0.2])
    with pytest.raises(CausticError):
        propagator(H, math.pi)
    with pytest.raises(CausticError):
        propagator(H, 4.0)  # past the first caustic
    with pytest.raises(CausticError):
        mode_kernel(1.0, math.pi, 1.0)
    # two degenerate modes collapse together: det B does not change sign
    H2 = oscillator(2, 1.0, 1.0)
    with pytest.raises(CausticError):
        propagator(H2, 3.5, step=0.01)


def test_kernel_dump(tmp_path):
    params = propagator(oscillator(2, 1.0, 1.0), 0.5)
    out = kernel_dump(params, [0.0, 1.0], [0.5], tmp_path / "k.csv", direction=[0.0, 1.0])
    lines = out.read_text().splitlines()
    assert lines[0] == "q,q_prime,re,im"
    assert len(lines) == 3
    q, qp, re, im = map(float, lines[2].split(","))
    want = kernel_eval(params, [0.0, 1.0], [0.0, 0.5])
    assert (q, qp) == (1.0, 0.5) and complex(re, im) == want


def test_grid_state_csv_round_trip(tmp_path):
    psi = gaussian_state([(-3, 3, 7), (-1, 2, 5)], [0.2, 0.1], [0.8, 0.5], [0.3, 0.0])
    back = GridState.from_csv(psi.to_csv(tmp_path / "s.csv"))
    assert back.axes == psi.axes
    np.testing.assert_array_equal(back.values, psi.values)


def test_gaussian_state_normalised():
    psi = gaussian_state([(-10, 10, 801)], 1.0, 0.7, 0.5)
    assert psi.norm() == pytest.approx(1.0, abs=1e-12)
    assert psi.moment(0) == pytest.approx(1.0, abs=1e-12)


def test_coherent_state_follows_classical_orbit():
    modes = decompose([[1.0]], 1.0)
    psi0 = gaussian_state([(-12, 12, 1024)], 1.5, math.sqrt(0.5), 0.4)
    for t in (0.4, 1.3, 2.9):
        psi = evolve_wavefunction(modes, None, psi0, t)
        assert psi.moment(0) == pytest.approx(1.5 * math.cos(t) + 0.4 * math.sin(t), abs=1e-10)


def test_time_dependent_drive_against_crank_nicolson():
    m, omega, hbar, t = 1.0, 1.0, 1.0, 1.2
    drive = NamedPreset("cos", value=[0.6], freq=1.7)
    H = QuadraticHamiltonian(n=1, Z=m * omega**2, K=1 / m, mu=drive, hbar=hbar)
    path = classical_path(H, t, step=1e-3)
    theta = phase_theta(H, path)
    psi0 = gaussian_state([(-10, 10, 1001)], -0.5, 0.6, 0.8)
    psi = evolve_wavefunction(decompose([[m * omega**2]], m), path.response(len(path) - 1), psi0, t,
                              hbar=hbar, theta=theta)
    ref = crank_nicolson(psi0.points(0), psi0.values, t, m, omega,
                         lambda s: 0.6 * math.cos(1.7 * s), dt=5e-4, hbar=hbar)
    assert np.max(np.abs(psi.values - ref)) < 2e-3


def test_mode_evolution_matches_direct_kernel_quadrature():
    m, omega, f0, t = 1.0, 1.0, 0.3, 0.8
    H = oscillator(1, m, omega, force=[f0])
    path = classical_path(H, t)
    theta = phase_theta(H, path)
    psi0 = gaussian_state([(-8, 8, 801)], 0.3, 0.6)
    psi = evolve_wavefunction(decompose([[1.0]], 1.0), path.response(len(path) - 1), psi0, t, theta=theta)
    params = propagator(H, t)
    x = psi0.points(0)
    X, XP = np.meshgrid(x, x, indexing="ij")
    w = np.full(len(x), x[1] - x[0])
    w[[0, -1]] *= 0.5
    direct = kernel_eval(params, X, XP) @ (w * psi0.values)
    np.testing.assert_allclose(psi.values, direct, atol=1e-12)


def test_two_mode_driven_chain_norm_and_semigroup():
    spec = ChainSpec(2, m=1.0, omega0=1.0, force=[0.2, 0.0])
    H = chain_hamiltonian(spec)
    modes = decompose(build_Z(spec), spec.m)
    psi0 = gaussian_state([(-7, 7, 140)] * 2, [0.5, -0.3], 0.6)

    def step(psi, t):
        path = classical_path(H, t)
        return evolve_wavefunction(modes, path.response(len(path) - 1), psi, t, theta=phase_theta(H, path))

    two = step(step(psi0, 0.5), 0.6)
    one = step(psi0, 1.1)
    assert abs(one.norm() - psi0.norm()) < 1e-6
    assert np.max(np.abs(two.values - one.values)) < 1e-5


def test_semigroup_without_sources():
    modes = decompose(build_Z(ChainSpec(3, omega0=0.7, boundary="periodic")), 1.0)
    psi0 = gaussian_state([(-8, 8, 96)] * 3, [0.4, 0.0, -0.2], 0.9)
    two = evolve_wavefunction(modes, None, evolve_wavefunction(modes, None, psi0, 0.6), 0.9)
    one = evolve_wavefunction(modes, None, psi0, 1.5)
    assert np.max(np.abs(two.values - one.values)) < 1e-5


def test_evolution_refuses_past_caustic_and_coarse_grid():
    modes = decompose([[1.0]], 1.0)
    psi0 = gaussian_state([(-6, 6, 64)], 0.0, 0.7)
    with pytest.raises(CausticError):
        evolve_wavefunction(modes, None, psi0, 3.3)
    coarse = gaussian_state([(-6, 6, 12)], 0.0, 0.3)
    with pytest.raises(QuadratureError):
        evolve_wavefunction(modes, None, coarse, 0.05)
    with pytest.raises(DimensionError):
        evolve_wavefunction(decompose(np.eye(2)), None, psi0, 0.5)


def test_density_of_pure_state():
    modes = decompose([[1.0]], 1.0)
    axes = [(-8, 8, 256)]
    psi0 = gaussian_state(axes, 0.7, 0.6, -0.2)
    rho0 = GridState(axes * 2, np.outer(psi0.values, psi0.values.conj()))
    t = 1.1
    rho = evolve_density(modes, None, rho0, t)
    psi = evolve_wavefunction(modes, None, psi0, t)
    np.testing.assert_allclose(rho.values, np.outer(psi.values, psi.values.conj()), atol=1e-12)
    assert density_trace(rho).real == pytest.approx(psi0.norm(), abs=1e-9)


def test_kernel_params_requires_zeta():
    b = fundamental_matrix(oscillator(1, 1.0, 1.0), 1.0)
    resp = SourceResponse(1.0, np.zeros(1), np.zeros(1), None)
    with pytest.raises(CausticError):
        kernel_params(b, resp, 0.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 2.8), st.floats(0.3, 3.0), st.floats(-1.0, 1.0))
def test_kernel_oracle_property(wt, m, f0):
    omega = 1.0
    t = wt / omega
    params = propagator(oscillator(1, m, omega, force=[f0]), t, step=2e-3)
    q = np.array([-1.0, 0.0, 0.7])
    got = kernel_eval(params, q, q[::-1])
    want = oracles.forced_oscillator_kernel(q, q[::-1], t, f0, m, omega)
    np.testing.assert_allclose(got, want, rtol=1e-8, atol=1e-10)


def test_free_limit_value():
    # f = g = m/t with m = t = hbar = 1, q = 1, q' = 0
    params = propagator(QuadraticHamiltonian(n=1, Z=0.0, K=1.0), 1.0)
    k = complex(kernel_eval(params, [1.0], [0.0]))
    assert abs(k) == pytest.approx((2 * math.pi) ** -0.5, abs=1e-12)
    assert np.angle(k) == pytest.approx(-math.pi / 4 + 0.5, abs=1e-12)


def test_quarter_period_modulus_and_symmetry():
    m, omega = 1.3, 0.8
    params = propagator(oscillator(1, m, omega), math.pi / (2 * omega))
    assert params.DBinv[0, 0] == pytest.approx(0.0, abs=1e-12)
    assert params.amplitude == pytest.approx(math.sqrt(m * omega / (2 * math.pi)), rel=1e-12)
    assert kernel_eval(params, [0.4], [-1.1]) == pytest.approx(kernel_eval(params, [-1.1], [0.4]), abs=1e-14)


def test_phase_additive_for_decoupled_modes():
    f1, f2, w1, w2, t = 0.3, -0.5, 1.0, 1.7, 1.1
    H = QuadraticHamiltonian(n=2, Z=np.diag([w1**2, w2**2]), K=np.eye(2), mu=[f1, f2])
    theta = phase_theta(H, classical_path(H, t))
    parts = [phase_theta(h, classical_path(h, t)) for h in (oscillator(1, 1.0, w1, [f1]), oscillator(1, 1.0, w2, [f2]))]
    assert theta == pytest.approx(sum(parts), abs=1e-12)
    assert theta == pytest.approx(oracles.forced_oscillator_theta(t, f1, 1.0, w1)
                                  + oracles.forced_oscillator_theta(t, f2, 1.0, w2), abs=1e-10)


def test_random_symplectic_blocks_give_symmetric_coefficients():
    from scipy.linalg import expm

    from quadprop.evolution import SymplecticBlocks
    from quadprop.quadform import symplectic_form

    rng = np.random.default_rng(8)
    for n in (1, 2, 4):
        S = rng.normal(size=(2 * n, 2 * n))
        M = expm(0.5 * symplectic_form(n) @ (S + S.T))
        params = kernel_params(SymplecticBlocks.from_matrix(1.0, M), None, 0.0)
        assert params.symmetry_defect < 1e-8


def test_ground_state_is_stationary():
    modes = decompose([[0.81]], 1.0)  # omega = 0.9
    psi0 = gaussian_state([(-10, 10, 512)], 0.0, math.sqrt(1 / (2 * 0.9)))
    psi = evolve_wavefunction(modes, None, psi0, 2.2)
    np.testing.assert_allclose(np.abs(psi.values), np.abs(psi0.values), atol=1e-10)


def test_mixed_density_stays_hermitian():
    modes = decompose([[1.0]], 1.0)
    axes = [(-8, 8, 200)]
    a = gaussian_state(axes, 1.0, 0.7).values
    b = gaussian_state(axes, -1.0, 0.7, 0.5).values
    rho0 = GridState(axes * 2, 0.5 * np.outer(a, a.conj()) + 0.5 * np.outer(b, b.conj()))
    rho = evolve_density(modes, None, rho0, 0.9)
    np.testing.assert_allclose(rho.values, rho.values.conj().T, atol=1e-12)
    assert density_trace(rho).real == pytest.approx(density_trace(rho0).real, abs=1e-6)
