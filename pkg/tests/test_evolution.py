import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from quadprop.errors import CausticError, TimeRangeError
from quadprop.evolution import (
    SymplecticBlocks,
    caustic_ratio,
    classical_path,
    crossed_caustic,
    fundamental_matrix,
    fundamental_path,
    green_function,
    source_response,
    zeta_path,
)
from quadprop.quadform import Function, NamedPreset, QuadraticHamiltonian, SampledTable, oscillator


def _random_stable(rng, n, with_L=True):
    M = rng.normal(size=(2 * n, 2 * n))
    w = M @ M.T / (2 * n) + 0.2 * np.eye(2 * n)
    L = w[n:, :n] if with_L else None
    return QuadraticHamiltonian(n=n, Z=w[:n, :n], K=w[n:, n:], L=L)


def test_identity_at_zero():
    H = oscillator(2, 1.0, 1.0)
    for method in ("closed-form", "expm", "rk4"):
        b = fundamental_matrix(H, 0.0, method=method)
        np.testing.assert_allclose(b.matrix, np.eye(4), atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_routes_agree(seed):
    rng = np.random.default_rng(seed)
    H = _random_stable(rng, 3, with_L=False)
    t = 2.3
    ref = fundamental_matrix(H, t, method="expm").matrix
    np.testing.assert_allclose(fundamental_matrix(H, t, method="closed-form").matrix, ref, atol=1e-11)
    np.testing.assert_allclose(fundamental_matrix(H, t, step=1e-3, method="rk4").matrix, ref, atol=1e-10)


def test_auto_method_selection():
    assert fundamental_matrix(oscillator(1, 1.0, 1.0), 1.0).method == "closed-form"
    H = QuadraticHamiltonian(n=1, Z=1.0, K=1.0, L=0.3)
    assert fundamental_matrix(H, 1.0).method == "expm"
    H = QuadraticHamiltonian(n=1, Z=Function(lambda t: 1.0 + 0.1 * t), K=1.0)
    assert fundamental_matrix(H, 1.0).method == "rk4"


def test_closed_form_handles_inverted_and_free_modes():
    # Z = diag(1, 0, -1): oscillating, free and unstable directions
    H = QuadraticHamiltonian(n=3, Z=np.diag([1.0, 0.0, -1.0]), K=np.eye(3))
    t = 1.3
    np.testing.assert_allclose(fundamental_matrix(H, t, method="closed-form").matrix,
                               fundamental_matrix(H, t, method="expm").matrix, atol=1e-12)
    b = fundamental_matrix(H, t)
    np.testing.assert_allclose(np.diag(b.A), [math.cos(t), 1.0, math.cosh(t)], atol=1e-13)
    np.testing.assert_allclose(np.diag(b.B), [math.sin(t), t, math.sinh(t)], atol=1e-13)


def test_rk4_fourth_order():
    # Mathieu-type oscillator; compare against a much finer run
    H = QuadraticHamiltonian(n=1, Z=Function(lambda t: 1.0 + 0.5 * math.cos(2 * t)), K=1.0)
    ref = fundamental_matrix(H, 2.0, step=1e-4, method="rk4").matrix
    e1 = np.max(np.abs(fundamental_matrix(H, 2.0, step=0.04, method="rk4").matrix - ref))
    e2 = np.max(np.abs(fundamental_matrix(H, 2.0, step=0.02, method="rk4").matrix - ref))
    assert 12 < e1 / e2 < 20


def test_path_grid_has_even_intervals():
    times, thetas, _ = fundamental_path(oscillator(1, 1.0, 1.0), 1.0, step=0.3)
    assert (len(times) - 1) % 2 == 0
    assert np.max(np.diff(times)) <= 0.3
    assert thetas.shape == (len(times), 2, 2)


def test_table_range_is_enforced():
    H = QuadraticHamiltonian(n=1, Z=SampledTable([0.0, 1.0], [[[1.0]], [[2.0]]]), K=1.0)
    fundamental_matrix(H, 1.0)
    with pytest.raises(TimeRangeError):
        fundamental_matrix(H, 1.5)


def test_symplectic_inverse_is_inverse():
    rng = np.random.default_rng(7)
    b = fundamental_matrix(_random_stable(rng, 4), 3.1)
    np.testing.assert_allclose(b.matrix @ b.symplectic_inverse(), np.eye(8), atol=1e-11)
    assert b.symplectic_residual() < 1e-11


def test_green_function_composition():
    rng = np.random.default_rng(11)
    H = _random_stable(rng, 2)
    b1, b2 = fundamental_matrix(H, 0.8), fundamental_matrix(H, 2.0)
    G = green_function(b2, b1)
    # time independent: G(t, t') = theta(t - t')
    np.testing.assert_allclose(G, fundamental_matrix(H, 1.2).matrix, atol=1e-12)
    with pytest.raises(ValueError):
        green_function(b1, b2)


def test_green_function_dense_fallback():
    M = np.array([[2.0, 0.0], [0.0, 0.25]])  # invertible, not symplectic
    b = SymplecticBlocks.from_matrix(0.0, M)
    G = green_function(SymplecticBlocks.from_matrix(1.0, np.eye(2)), b)
    np.testing.assert_allclose(G, np.linalg.inv(M))


@pytest.mark.parametrize("wt", [0.2, 1.0, 2.9])
def test_forced_oscillator_response(wt):
    m, omega, f0 = 1.3, 0.9, 0.4
    t = wt / omega
    resp = source_response(oscillator(1, m, omega, force=[f0]), t, step=1e-3)
    eta, xi = oracles.forced_oscillator_eta_xi(t, f0, m, omega)
    assert resp.eta[0] == pytest.approx(eta, abs=1e-12)
    assert resp.xi[0] == pytest.approx(xi, abs=1e-12)
    zeta = f0 / (m * omega**2) * m * omega * math.tan(omega * t / 2)
    assert resp.zeta[0] == pytest.approx(zeta, rel=1e-10)


def test_momentum_source_response():
    # H = p^2/2 + q^2/2 - nu p: dq/dt = p - nu, dp/dt = -q, from rest
    nu = 0.25
    t = 1.7
    resp = source_response(QuadraticHamiltonian(n=1, Z=1.0, K=1.0, nu=[nu]), t)
    assert resp.eta[0] == pytest.approx(-nu * math.sin(t), abs=1e-12)
    assert resp.xi[0] == pytest.approx(nu * (1 - math.cos(t)), abs=1e-12)


def test_zeta_at_start_uses_limit():
    nu = 0.3
    H = QuadraticHamiltonian(n=1, Z=1.0, K=2.0, nu=[nu])
    path = classical_path(H, 0.5)
    z = zeta_path(H, path)
    assert z[0, 0] == pytest.approx(nu / 2.0)
    assert z[1, 0] == pytest.approx(nu / 2.0, rel=1e-3)


def test_zeta_unavailable_at_caustic():
    H = oscillator(1, 1.0, 1.0, force=[0.1])
    resp = source_response(H, math.pi, step=1e-3)
    assert not resp.zeta_available
    with pytest.raises(CausticError):
        resp.require_zeta()


def test_caustic_ratio():
    assert caustic_ratio(np.eye(3)) == 1.0
    assert caustic_ratio(np.diag([1.0, 1e-14])) < 1e-12
    # isotropic collapse is only visible against the free-flight scale
    assert caustic_ratio(np.array([[1e-16]])) == 1.0
    assert caustic_ratio(np.array([[1e-16]]), kscale=3.0) < 1e-12
    assert caustic_ratio(np.zeros((2, 2))) == 0.0


def test_crossing_detection_sees_even_multiplicity():
    eps = 1e-3
    assert crossed_caustic(eps * np.eye(2), -eps * np.eye(2))
    assert crossed_caustic(np.diag([1.0, eps]), np.diag([1.0, -eps]))
    assert not crossed_caustic(np.eye(2), 1.01 * np.eye(2))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**31 - 1), st.floats(0.0, 8.0))
def test_defect_small_for_random_stable(n, seed, t):
    H = _random_stable(np.random.default_rng(seed), n)
    assert fundamental_matrix(H, t).defect < 1e-10


def test_unimodular_and_composition():
    rng = np.random.default_rng(21)
    H = _random_stable(rng, 3)
    b1, b2, b12 = (fundamental_matrix(H, t) for t in (0.7, 1.6, 2.3))
    assert np.linalg.det(b12.matrix) == pytest.approx(1.0, rel=1e-6)
    np.testing.assert_allclose(b12.matrix, b2.matrix @ b1.matrix, atol=1e-9)


def test_green_function_oscillator_blocks():
    m, omega = 1.4, 0.6
    H = oscillator(1, m, omega)
    G = green_function(fundamental_matrix(H, 2.5), fundamental_matrix(H, 0.9))
    A, B, C, D = oracles.oscillator_blocks(m, omega, 1.6)
    np.testing.assert_allclose(G, np.block([[A, B], [C, D]]), atol=1e-12)
    b = fundamental_matrix(H, 1.0)
    np.testing.assert_allclose(green_function(b, b), np.eye(2), atol=1e-14)


def test_richardson_ratio_quadratic_ramp():
    m, omega = 1.0, 1.2
    H = QuadraticHamiltonian(n=2, Z=Function(lambda t: m * (1 + 0.1 * t) ** 2 * omega**2 * np.eye(2)),
                             K=np.eye(2) / m)
    ref = fundamental_matrix(H, 3.0, step=2.5e-4, method="rk4").matrix
    e1 = np.max(np.abs(fundamental_matrix(H, 3.0, step=0.05, method="rk4").matrix - ref))
    e2 = np.max(np.abs(fundamental_matrix(H, 3.0, step=0.025, method="rk4").matrix - ref))
    assert e1 / e2 <= 16 * 1.25
    assert e1 / e2 > 8


def test_source_response_is_linear():
    base = dict(n=2, Z=np.array([[2.0, -1.0], [-1.0, 2.0]]), K=np.eye(2))
    mu1, mu2 = np.array([0.3, 0.0]), NamedPreset("sin", value=[0.0, 0.5], freq=1.3)
    r1 = source_response(QuadraticHamiltonian(**base, mu=mu1), 2.0)
    r2 = source_response(QuadraticHamiltonian(**base, mu=mu2), 2.0)
    r12 = source_response(QuadraticHamiltonian(**base, mu=lambda t: 2 * mu1 - 3 * mu2(t)), 2.0)
    np.testing.assert_allclose(r12.eta, 2 * r1.eta - 3 * r2.eta, atol=1e-12)
    np.testing.assert_allclose(r12.xi, 2 * r1.xi - 3 * r2.xi, atol=1e-12)


def test_no_sources_give_zero_response():
    r = source_response(oscillator(2, 1.0, 1.0), 1.0)
    assert not np.any(r.eta) and not np.any(r.xi) and not np.any(r.zeta)


def test_dirichlet_chain_eta_as_mode_sum():
    from scipy.integrate import quad

    from quadprop.chains import ChainSpec, build_Z, chain_hamiltonian, decompose

    spec = ChainSpec(3, m=1.0, omega0=1.0, force=NamedPreset("cos", value=[0.2, 0.0, 0.0], freq=0.5))
    H = chain_hamiltonian(spec)
    modes = decompose(build_Z(spec), spec.m)
    t = 2.4
    resp = source_response(H, t)
    want = np.zeros(3)
    for j, w in enumerate(modes.omegas):
        proj = modes.V[0, j] * 0.2
        integral = quad(lambda s: math.sin(w * (t - s)) / (spec.m * w) * math.cos(0.5 * s), 0, t)[0]
        want += modes.V[:, j] * proj * integral
    np.testing.assert_allclose(resp.eta, want, atol=1e-11)
