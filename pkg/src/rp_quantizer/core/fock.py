"""Degree-truncated physical space realised as a bosonic Fock space.

For the Gaussian measure the quotient of degree <= N monomials splits into
symmetric powers of the one-particle quotient. States are labelled by sorted
mode tuples (a multiset of one-particle modes); ``occupation`` turns a label
into occupation numbers.
"""
from __future__ import annotations

import itertools
import math
from functools import cached_property
from typing import Iterator, Optional, Sequence

import numpy as np

from .exceptions import DomainError, SupportViolationError
from .gaussian import CovarianceOperator
from .i18n import messages
from .lattice import TestFunction, first_inadmissible_site, reflect
from .rp_quantize import (
    DEFAULT_TOL,
    EuclideanVector,
    QuotientBasis,
    assemble_gram,
    quotient,
)

Modes = tuple[int, ...]


def permanent(a: np.ndarray) -> complex:
    """Ryser's inclusion-exclusion formula."""
    n = a.shape[0]
    if n == 0:
        return 1.0
    total = 0.0
    for size in range(1, n + 1):
        sign = (-1) ** size
        for cols in itertools.combinations(range(n), size):
            total += sign * np.prod(a[:, cols].sum(axis=1))
    return (-1) ** n * total


def partial_pairings(items: Sequence[int]) -> Iterator[tuple[list[tuple[int, int]], list[int]]]:
    """Every matching of ``items`` as (pairs, unpaired)."""
    if not items:
        yield [], []
        return
    first, rest = items[0], list(items[1:])
    for pairs, free in partial_pairings(rest):
        yield pairs, [first] + free
    for k, partner in enumerate(rest):
        for pairs, free in partial_pairings(rest[:k] + rest[k + 1:]):
            yield [(first, partner)] + pairs, free


def occupation(modes: Modes, rank: int) -> np.ndarray:
    return np.bincount(np.asarray(modes, dtype=int), minlength=rank)


def _factorial_norm(modes: Modes, rank: int) -> float:
    return math.sqrt(math.prod(math.factorial(int(k)) for k in occupation(modes, rank)))


def fock_dimension(rank: int, n_max: int) -> int:
    return math.comb(rank + n_max, n_max)


class PhysicalSpace:
    def __init__(
        self,
        cov: CovarianceOperator,
        n_max: int,
        tol: float = DEFAULT_TOL,
        one_particle: Optional[QuotientBasis] = None,
    ):
        geom = cov.geometry
        self.cov = cov
        self.geometry = geom
        self.n_max = n_max
        self.tol = tol
        self.ambient_sites = [s for s in geom.sites() if geom.admissible_time(s[0])]
        if one_particle is None:
            gens = [EuclideanVector.of_sites(geom, [s]) for s in self.ambient_sites]
            one_particle = quotient(assemble_gram(cov, gens), tol)
        self.one_particle = one_particle
        self.rank = one_particle.rank

        rows = [geom.index(s) for s in self.ambient_sites]
        # u(f) = V^H <delta_a, Theta f> over ambient sites a
        self._embed = one_particle.isometry.conj().T @ cov.kernel[rows, :]

        self.states: list[Modes] = []
        self.sector_slices: list[slice] = []
        for n in range(n_max + 1):
            start = len(self.states)
            self.states.extend(itertools.combinations_with_replacement(range(self.rank), n))
            self.sector_slices.append(slice(start, len(self.states)))
        self.index = {modes: i for i, modes in enumerate(self.states)}
        self.degrees = np.array([len(m) for m in self.states])

    @property
    def dim(self) -> int:
        return len(self.states)

    def sector(self, n: int) -> slice:
        return self.sector_slices[n]

    def low_degree(self, max_degree: int) -> np.ndarray:
        return self.degrees <= max_degree

    def vacuum(self) -> np.ndarray:
        out = np.zeros(self.dim, dtype=complex)
        out[0] = 1.0
        return out

    def with_n_max(self, n_max: int) -> "PhysicalSpace":
        return PhysicalSpace(self.cov, n_max, self.tol, self.one_particle)

    @cached_property
    def enlarged(self) -> "PhysicalSpace":
        return self.with_n_max(self.n_max + 1)

    def one_particle_coordinates(self, f: TestFunction) -> np.ndarray:
        site = first_inadmissible_site(f)
        if site is not None:
            raise SupportViolationError(messages().t("rp.support_violation", site=site))
        return self._embed @ reflect(f).values

    def symmetric_product(self, vectors: Sequence[np.ndarray]) -> np.ndarray:
        """Coordinates of a+(u_1)...a+(u_k) applied to the vacuum."""
        k = len(vectors)
        if k > self.n_max:
            raise DomainError(messages().t("fock.degree_exceeds_truncation", degree=k, n_max=self.n_max))
        out = np.zeros(self.dim, dtype=complex)
        if k == 0:
            out[0] = 1.0
            return out
        u = np.column_stack(vectors)
        for i in range(self.sector(k).start, self.sector(k).stop):
            modes = self.states[i]
            out[i] = permanent(u[list(modes), :]) / _factorial_norm(modes, self.rank)
        return out

    def quantize(self, A: EuclideanVector) -> np.ndarray:
        """Wick-expand each monomial and map its Wick parts to symmetric products."""
        A.check_support()
        out = np.zeros(self.dim, dtype=complex)
        for coeff, mono in A.terms:
            us = [self.one_particle_coordinates(f) for f in mono]
            for pairs, free in partial_pairings(list(range(len(mono)))):
                weight = math.prod(self.cov.pair(mono[i], mono[j]) for i, j in pairs)
                out += coeff * weight * self.symmetric_product([us[i] for i in free])
        return out

    def second_quantize(self, a: np.ndarray) -> np.ndarray:
        """Gamma(a): the one-particle operator acting factorwise in every sector."""
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for sl in self.sector_slices:
            states = self.states[sl]
            for p, left in enumerate(states):
                norm_l = _factorial_norm(left, self.rank)
                for q, right in enumerate(states):
                    block = a[np.ix_(list(left), list(right))]
                    out[sl.start + p, sl.start + q] = permanent(block) / (
                        norm_l * _factorial_norm(right, self.rank)
                    )
        return out

    def dgamma(self, a: np.ndarray) -> np.ndarray:
        """Sum_ij a_ij a+_i a_j."""
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for src, modes in enumerate(self.states):
            occ = occupation(modes, self.rank)
            for j in np.flatnonzero(occ):
                lowered = list(modes)
                lowered.remove(j)
                for i in range(self.rank):
                    target = self.index[tuple(sorted(lowered + [i]))]
                    amp = math.sqrt(occ[j]) * math.sqrt(occ[i] + 1 - (i == j))
                    out[target, src] += a[i, j] * amp
        return out

    def creation(self, v: np.ndarray) -> np.ndarray:
        """a+(v); the part leaving the top sector is dropped."""
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for src, modes in enumerate(self.states):
            if len(modes) == self.n_max:
                continue
            occ = occupation(modes, self.rank)
            for i in range(self.rank):
                target = self.index[tuple(sorted(modes + (i,)))]
                out[target, src] += v[i] * math.sqrt(occ[i] + 1)
        return out

    def annihilation(self, v: np.ndarray) -> np.ndarray:
        return self.creation(v).conj().T

    def field(self, v: np.ndarray) -> np.ndarray:
        c = self.creation(v)
        return c + c.conj().T

    def truncation_residual(self, v: np.ndarray) -> float:
        """Norm of the block of a+(v) that maps the top sector out of the truncation."""
        big = self.enlarged
        c = big.creation(np.asarray(v))
        block = c[big.sector(self.n_max + 1), big.sector(self.n_max)]
        return float(np.linalg.norm(block, 2)) if block.size else 0.0
