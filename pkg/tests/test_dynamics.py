import math

import numpy as np
import pytest

from rp_quantizer.core import (
    ContinuationError,
    DispersionOracle,
    EuclideanVector,
    GeometryError,
    MarginError,
    PhysicalSpace,
    QuantumDynamics,
    SectorOperator,
    SupportViolationError,
    TestFunction,
    UnsupportedRegimeError,
    build_covariance,
    build_geometry,
    build_transfer,
    hamiltonian,
    momentum,
    time_zero_field,
    verify_field_bound,
    verify_local_field_ops,
    verify_spectral_condition,
)
from rp_quantizer.core.dynamics import (
    dispersion_error,
    dispersion_study,
    energy_bound,
    one_particle_energies,
    one_particle_shift,
    sup_stability,
)
from rp_quantizer.core.lattice import sobolev_norm

OMEGA = 0.9624236501192069


@pytest.fixture(scope="module")
def ring_dynamics(ring_space):
    return QuantumDynamics.build(ring_space)


def test_hamiltonian_of_simple_transfers():
    identity = SectorOperator(None, np.eye(3))
    np.testing.assert_allclose(hamiltonian(identity).matrix, np.zeros((3, 3)), atol=1e-15)
    diag = SectorOperator(None, np.diag([math.exp(-1), math.exp(-2)]))
    np.testing.assert_allclose(hamiltonian(diag).matrix, np.diag([1.0, 2.0]), atol=1e-12)


def test_hamiltonian_rejects_non_positive_transfer():
    with pytest.raises(ContinuationError):
        hamiltonian(SectorOperator(None, np.diag([0.5, -0.1])))


def test_periodic_time_is_thermal():
    space = PhysicalSpace(build_covariance(build_geometry(2, [], "periodic"), 1.0), 1)
    with pytest.raises(UnsupportedRegimeError, match="thermal"):
        build_transfer(space)
    with pytest.raises(UnsupportedRegimeError):
        one_particle_shift(space, [1], [0])


def test_shift_past_the_window_is_a_margin_error(line_space):
    with pytest.raises(MarginError):
        one_particle_shift(line_space, [3], [0])
    # pure spatial translations never leave the window
    assert one_particle_shift(line_space, [0], [0]).shape == (line_space.rank, line_space.rank)


def test_coordinates_reject_negative_time_support(line_space):
    geom = line_space.geometry
    with pytest.raises(SupportViolationError):
        line_space.one_particle_coordinates(TestFunction.delta(geom, (-1,)))
    assert line_space.one_particle_coordinates(TestFunction.delta(geom, (1,))).shape == (line_space.rank,)


def test_whole_line_energy(line_space):
    dyn = QuantumDynamics.build(line_space)
    np.testing.assert_allclose(one_particle_energies(dyn.H), [OMEGA], atol=1e-10)
    # free field: the two-particle sector sits at twice the mass gap
    np.testing.assert_allclose(np.linalg.eigvalsh(dyn.H.sector_block(2)), [2 * OMEGA], atol=1e-10)
    assert dyn.transfer.off_block_norm() == 0.0
    assert dyn.transfer.notes["equivariance_residual"] < 1e-10
    np.testing.assert_allclose(dyn.heat(0), np.eye(line_space.dim), atol=1e-14)


def test_ring_dispersion(ring_dynamics):
    assert dispersion_error(ring_dynamics.space, ring_dynamics.H) < 1e-10
    oracle = DispersionOracle(ring_dynamics.space.geometry, 1.0)
    assert oracle.omega_min == pytest.approx(OMEGA)
    assert oracle.momentum((3,)) == pytest.approx((-math.pi / 2,))
    assert oracle.momentum((2,)) == pytest.approx((math.pi,))


def test_ring_momentum(ring_dynamics):
    (P,) = ring_dynamics.momenta
    values = np.linalg.eigvalsh(P.matrix)
    allowed = np.array([0.0, math.pi / 2, -math.pi / 2, math.pi])
    assert all(np.min(np.abs(allowed - v)) < 1e-9 for v in values)
    u = P.notes["unitary"]
    np.testing.assert_allclose(np.linalg.matrix_power(u, 4), np.eye(len(u)), atol=1e-10)
    np.testing.assert_allclose(ring_dynamics.translation([4]), np.eye(len(u)), atol=1e-10)
    np.testing.assert_allclose(ring_dynamics.translation([1]), u)


def test_momentum_direction_guard(ring_space):
    with pytest.raises(GeometryError):
        momentum(ring_space, 2)


def test_spectral_condition(ring_dynamics):
    m_star, report = verify_spectral_condition(
        ring_dynamics.H, ring_dynamics.momenta, DispersionOracle(ring_dynamics.space.geometry, 1.0)
    )
    oracle = DispersionOracle(ring_dynamics.space.geometry, 1.0)
    expected = max(abs(oracle.momentum(k)[0]) / (oracle.omega(k) + 1) for k in oracle.momenta())
    assert m_star == pytest.approx(expected, abs=1e-9)
    assert report.passed
    assert report.analytic_bound == pytest.approx(math.pi / OMEGA)
    assert report.commutator_norm < 1e-8


def test_spectral_condition_without_space_directions(line_space):
    dyn = QuantumDynamics.build(line_space)
    m_star, report = verify_spectral_condition(dyn.H, [])
    assert m_star == 0.0
    assert report.passed


def test_time_zero_field_matrix_element(ring_space):
    geom = ring_space.geometry
    h = TestFunction.on_slice(geom, 0, [1.0, -0.5, 0.0, 2.0])
    phi = time_zero_field(ring_space, h)
    for x in range(4):
        state = ring_space.quantize(EuclideanVector.of_sites(geom, [(1, x)]))
        expected = sum(h.slice_values(0)[y] * ring_space.cov.entry((-1, x), (0, y)) for y in range(4))
        assert np.vdot(state, phi.matrix @ ring_space.vacuum()) == pytest.approx(expected, abs=1e-12)
    assert phi.self_adjoint_residual() < 1e-14
    assert phi.notes["truncation_residual"] > 0


def test_field_needs_site_reflection():
    space = PhysicalSpace(build_covariance(build_geometry(1, [2], "periodic", "link"), 1.0), 1)
    with pytest.raises(UnsupportedRegimeError):
        time_zero_field(space, TestFunction.on_slice(space.geometry, 0, [1.0, 0.0]))


def test_field_energy_bound(small_dynamics, rng):
    space, H = small_dynamics.space, small_dynamics.H
    h = TestFunction.on_slice(space.geometry, 0, rng.standard_normal(2))
    ratio, c = verify_field_bound(H, time_zero_field(space, h), h, 1)
    assert c > 0
    assert ratio == pytest.approx(c / sobolev_norm(h, 1))
    assert energy_bound(H, np.zeros_like(H.matrix)) == 0.0
    # scaling the field scales the constant
    assert energy_bound(H, 2 * time_zero_field(space, h).matrix) == pytest.approx(2 * c)


def test_sup_stability():
    stable = sup_stability([1.0, 2.0, 1.1, 2.1], 2)
    assert stable.sup_half == 2.0
    assert stable.sup_full == 2.1
    assert stable.stable
    assert not sup_stability([1.0, 1.0, 3.0, 1.0], 2).stable


def test_equal_time_fields_commute(small_dynamics):
    space, H = small_dynamics.space, small_dynamics.H
    f = TestFunction.delta(space.geometry, (0, 0))
    g = TestFunction.delta(space.geometry, (0, 1))
    report = verify_local_field_ops(space, H, f, g, 1, weyl=True)
    assert report.commutator_norm < 1e-10
    assert report.weyl_commutator is not None and report.weyl_commutator < 1e-6
    assert report.symmetry_residual < 1e-12
    assert report.spacetime_norm == pytest.approx(math.sqrt(13))


def test_dirichlet_dispersion_converges():
    errors = dispersion_study(build_geometry(1, [2]), 1.0, (2, 4, 6))
    assert errors[2] > errors[4] > errors[6]
