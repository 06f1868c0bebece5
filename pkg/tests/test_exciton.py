import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from corr2des.exciton import (
    DimerParams,
    build_coupling_operator,
    build_dipole_operators,
    build_model,
    build_site_hamiltonian,
    diagonalize_dimer,
    site_to_exciton,
    thermal_state,
)
from corr2des.units import cm1_to_angular

from conftest import PAPER

site_energies = st.floats(11000, 13000)
couplings = st.floats(-300, 300)


def dimer(e1, e2, j, mu1=1.0, mu2=-0.8, T=77.0):
    return DimerParams(e1, e2, j, mu1, mu2, T)


def test_site_hamiltonian_paper_values():
    h = build_site_hamiltonian(PAPER) / cm1_to_angular(1.0)
    assert h[3, 3].real == pytest.approx(24620.0)
    assert h[1, 2].real == pytest.approx(5.5)
    np.testing.assert_allclose(h, h.conj().T)


def test_uncoupled_hamiltonian_is_diagonal():
    h = build_site_hamiltonian(dimer(12410, 12210, 0.0))
    assert np.count_nonzero(h - np.diag(np.diag(h))) == 0


def test_degenerate_sites_split_by_twice_coupling():
    b = diagonalize_dimer(dimer(12300, 12300, 5.5))
    assert b.delta == pytest.approx(11.0, rel=1e-12)


def test_paper_splitting_and_angle():
    b = diagonalize_dimer(PAPER)
    assert b.delta == pytest.approx(math.sqrt(200**2 + 4 * 5.5**2), rel=1e-12)
    assert b.delta == pytest.approx(200.302, abs=5e-4)
    assert b.theta == pytest.approx(0.027472, abs=1e-6)
    assert math.sin(2 * b.theta) == pytest.approx(0.054917, abs=1e-6)


def test_paper_coupling_block():
    a0 = build_coupling_operator(diagonalize_dimer(PAPER))
    np.testing.assert_allclose(a0[1:3, 1:3].real, [[0.998491, 0.054917], [0.054917, -0.998491]], atol=1e-6)
    assert np.all(a0[0] == 0) and np.all(a0[3] == 0) and np.all(a0[:, 0] == 0) and np.all(a0[:, 3] == 0)


def test_uncoupled_sites_give_zero_angle():
    b = diagonalize_dimer(dimer(12410, 12210, 0.0))
    assert b.theta == 0.0
    a0 = build_coupling_operator(b)
    np.testing.assert_allclose(a0[1:3, 1:3], np.diag([1.0, -1.0]))
    # energy ordering puts the lower site first, so U is a permutation
    np.testing.assert_allclose(np.abs(b.U), [[0, 1], [1, 0]])


def test_fully_degenerate_rejected():
    with pytest.raises(ValueError):
        dimer(12300, 12300, 0.0)


def test_nonpositive_temperature_rejected():
    with pytest.raises(ValueError):
        dimer(12410, 12210, 5.5, T=0.0)


def test_exciton_dipoles_match_eigenvector_oracle():
    b = diagonalize_dimer(PAPER)
    _, mp, _ = build_dipole_operators(PAPER, b)
    # independent oracle: eigenvectors of the single-exciton block
    w, v = np.linalg.eigh(np.array([[12410.0, 5.5], [5.5, 12210.0]]))
    oracle = v.T @ np.array([1.0, -0.8])
    np.testing.assert_allclose(np.abs(mp[1:3, 0]), np.abs(oracle), atol=1e-12)
    c, s = math.cos(b.theta), math.sin(b.theta)
    assert abs(mp[1, 0]) == pytest.approx(abs(-s * 1.0 + c * -0.8), abs=1e-12)
    assert abs(mp[1, 0]) == pytest.approx(0.82717, abs=1e-5)
    assert abs(mp[2, 0]) == pytest.approx(0.97765, abs=1e-5)


def test_site_dipoles_before_rotation():
    b = diagonalize_dimer(PAPER)
    _, mp, mm = build_dipole_operators(PAPER, b)
    w = site_to_exciton(b)
    site = w @ mp @ w.T
    assert site[2, 0].real == pytest.approx(-0.8)
    assert site[1, 0].real == pytest.approx(1.0)
    assert site[3, 1].real == pytest.approx(-0.8)
    assert site[3, 2].real == pytest.approx(1.0)
    np.testing.assert_allclose(mm, mp.conj().T)


def test_zero_dipoles():
    p = dimer(12410, 12210, 5.5, mu1=0.0, mu2=0.0)
    mu, mp, mm = build_dipole_operators(p, diagonalize_dimer(p))
    assert not mu.any() and not mp.any() and not mm.any()


def test_thermal_state_paper_is_ground_state():
    m = build_model(PAPER)
    expected = np.zeros((4, 4))
    expected[0, 0] = 1.0
    np.testing.assert_allclose(m.rho0, expected, atol=1e-15)
    assert m.rho0[1, 1] < 1e-90


def test_thermal_state_infinite_temperature():
    p = dimer(12410, 12210, 5.5, T=math.inf)
    rho = thermal_state(p, build_site_hamiltonian(p))
    np.testing.assert_allclose(rho, np.eye(4) / 4, atol=1e-15)


def test_two_level_boltzmann_ratio():
    # splitting equal to k_B T between two levels
    T = 300.0
    kt = cm1_to_angular(0.6950348 * T)
    p = dimer(12410, 12210, 5.5, T=T)
    rho = thermal_state(p, np.diag([0.0, kt, 50.0, 50.0]).astype(complex))
    assert rho[1, 1].real / rho[0, 0].real == pytest.approx(math.exp(-1.0), rel=1e-12)


@given(site_energies, site_energies, couplings)
def test_diagonalization_invariants(e1, e2, j):
    if e1 == e2 and j == 0:
        return
    b = diagonalize_dimer(dimer(e1, e2, j))
    np.testing.assert_allclose(b.U.T @ b.U, np.eye(2), atol=1e-12)
    block = np.array([[e1, j], [j, e2]])
    np.testing.assert_allclose(b.U.T @ block @ b.U, np.diag([b.E1, b.E2]), atol=1e-10 * max(1, abs(e1)))
    assert b.E1 <= b.E2
    assert b.delta == pytest.approx(math.hypot(e1 - e2, 2 * j), rel=1e-9, abs=1e-7)
    assert -math.pi / 4 < b.theta <= math.pi / 4
    if e1 != e2:
        assert math.tan(2 * b.theta) == pytest.approx(2 * j / (e1 - e2), rel=1e-9, abs=1e-12)
    # the coupling block is the rotated site-difference operator, up to one overall sign
    a0 = build_coupling_operator(b)[1:3, 1:3].real
    rotated = b.coupling_sign * b.U.T @ np.diag([1.0, -1.0]) @ b.U
    np.testing.assert_allclose(a0, rotated, atol=1e-10)


@given(site_energies, site_energies, couplings)
def test_operator_invariants(e1, e2, j):
    if e1 == e2 and j == 0:
        return
    p = dimer(e1, e2, j)
    m = build_model(p)
    block = m.a0[1:3, 1:3]
    np.testing.assert_allclose(block @ block, np.eye(2), atol=1e-12)
    assert abs(np.trace(m.a0)) < 1e-12
    np.testing.assert_allclose(np.linalg.eigvalsh(block), [-1, 1], atol=1e-12)
    np.testing.assert_allclose(m.mu, m.mu.conj().T)
    # two raising steps take |g> only into |f>
    ladder = m.mu_plus @ m.mu_plus
    assert np.allclose(ladder[:3, :], 0) and np.allclose(ladder[:, 1:], 0)
    h = np.diag(m.h_rot)
    assert np.linalg.norm(m.rho0 @ h - h @ m.rho0) < 1e-12
    h_site = build_site_hamiltonian(p)
    rho = thermal_state(p, h_site)
    assert np.linalg.norm(rho @ h_site - h_site @ rho) < 1e-12 * max(1, np.abs(h_site).max())
    assert abs(np.trace(rho) - 1) < 1e-12


def test_site_exciton_round_trip(paper_model):
    rng = np.random.default_rng(3)
    op = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    np.testing.assert_allclose(paper_model.to_exciton(paper_model.to_site(op)), op, atol=1e-14)


def test_rotating_frame_energies(paper_model):
    d = cm1_to_angular(diagonalize_dimer(PAPER).delta)
    np.testing.assert_allclose(paper_model.h_rot, [0.0, -d / 2, d / 2, 0.0], atol=1e-12)
    e1, e2 = paper_model.energies_cm1
    assert paper_model.carrier_cm1 == pytest.approx(0.5 * (e1 + e2))
