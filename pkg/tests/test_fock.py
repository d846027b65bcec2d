import math

import numpy as np
import pytest

from rp_quantizer.core import DomainError, EuclideanVector, assemble_gram
from rp_quantizer.core.fock import fock_dimension, occupation, partial_pairings, permanent
from rp_quantizer.core.rp_quantize import monomial_generators


def test_permanent():
    assert permanent(np.array([[1.0, 2.0], [3.0, 4.0]])) == pytest.approx(10.0)
    assert permanent(np.zeros((0, 0))) == 1.0
    assert permanent(np.ones((4, 4))) == pytest.approx(24.0)


def test_fock_dimension():
    assert fock_dimension(4, 3) == 35
    assert fock_dimension(1, 2) == 3


def test_partial_pairings_count():
    # matchings of 4 points: 1 empty + 6 single pairs + 3 perfect
    assert len(list(partial_pairings([0, 1, 2, 3]))) == 10


def test_occupation():
    np.testing.assert_array_equal(occupation((0, 0, 2), 3), [2, 0, 1])


def test_line_space_layout(line_space):
    # the whole-line field is Markov, so one time-zero mode spans the one-particle space
    assert line_space.rank == 1
    assert line_space.dim == 3
    assert line_space.states == [(), (0,), (0, 0)]
    assert line_space.sector(2) == slice(2, 3)


def test_ring_space_layout(ring_space):
    assert ring_space.rank == 4
    assert ring_space.dim == fock_dimension(4, 1)


def test_number_operator(ring_space):
    space = ring_space.with_n_max(2)
    np.testing.assert_allclose(space.dgamma(np.eye(space.rank)), np.diag(space.degrees), atol=1e-14)
    np.testing.assert_allclose(space.second_quantize(np.eye(space.rank)), np.eye(space.dim), atol=1e-14)


def test_second_quantize_is_multiplicative(ring_space, rng):
    space = ring_space.with_n_max(2)
    a, b = rng.standard_normal((2, space.rank, space.rank))
    np.testing.assert_allclose(
        space.second_quantize(a) @ space.second_quantize(b), space.second_quantize(a @ b), atol=1e-12
    )


def test_ladder_operators(ring_space, rng):
    space = ring_space.with_n_max(2)
    u, v = rng.standard_normal((2, space.rank))
    c = space.creation(v)
    np.testing.assert_allclose(space.annihilation(v), c.conj().T)
    field = space.field(v)
    np.testing.assert_allclose(field, field.conj().T)
    # canonical commutator below the top sector
    comm = space.annihilation(u) @ space.creation(v) - space.creation(v) @ space.annihilation(u)
    low = space.low_degree(space.n_max - 1)
    np.testing.assert_allclose(comm[np.ix_(low, low)], np.dot(u, v) * np.eye(low.sum()), atol=1e-12)


def test_truncation_residual(line_space):
    assert line_space.truncation_residual(np.array([1.0])) == pytest.approx(math.sqrt(3))


def test_symmetric_product_degree_guard(line_space):
    with pytest.raises(DomainError):
        line_space.symmetric_product([np.ones(1)] * 3)


def test_fock_realisation_is_isometric(line_space):
    geom, cov = line_space.geometry, line_space.cov
    gens = monomial_generators(geom, [(0,), (1,), (2,)], 2)
    gram = assemble_gram(cov, gens).matrix
    vectors = np.column_stack([line_space.quantize(g) for g in gens])
    np.testing.assert_allclose(vectors.conj().T @ vectors, gram, atol=1e-12)


def test_vacuum_and_single_field(line_space):
    geom, cov = line_space.geometry, line_space.cov
    np.testing.assert_allclose(line_space.quantize(EuclideanVector.vacuum(geom)), line_space.vacuum())
    y = line_space.quantize(EuclideanVector.of_sites(geom, [(1,)]))
    assert np.vdot(y, y).real == pytest.approx(cov.entry((1,), (-1,)))
    assert np.all(y[line_space.degrees != 1] == 0)
