"""Reflection-positive form on positive-time vectors and the quotient to the physical space."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np
import scipy.linalg as sla

from .exceptions import (
    ComplexityGuardError,
    DomainError,
    ReflectionPositivityError,
    SpanDeficiencyError,
    SupportViolationError,
)
from .gaussian import (
    DEFAULT_MOMENT_CAP,
    CharacteristicFunctional,
    CovarianceOperator,
    eval_S,
    hafnian,
    perfect_pairings,
)
from .i18n import messages
from .lattice import LatticeGeometry, Site, TestFunction, first_inadmissible_site, reflect

DEFAULT_TOL = 1e-10
SPAN_TOL = 1e-8

Monomial = tuple[TestFunction, ...]


@dataclass(frozen=True, eq=False)
class EuclideanVector:
    """Finite combination of monomials Phi(f1)...Phi(fn) applied to the Euclidean vacuum."""

    geometry: LatticeGeometry
    terms: tuple[tuple[complex, Monomial], ...]

    @classmethod
    def vacuum(cls, geometry: LatticeGeometry) -> "EuclideanVector":
        return cls(geometry, ((1.0 + 0j, ()),))

    @classmethod
    def monomial(cls, geometry: LatticeGeometry, fs: Sequence[TestFunction], coeff: complex = 1.0) -> "EuclideanVector":
        return cls(geometry, ((complex(coeff), tuple(fs)),))

    @classmethod
    def of_sites(cls, geometry: LatticeGeometry, sites: Sequence[Site]) -> "EuclideanVector":
        return cls.monomial(geometry, [TestFunction.delta(geometry, s) for s in sites])

    @property
    def degree(self) -> int:
        return max((len(mono) for _, mono in self.terms), default=0)

    def __add__(self, other: "EuclideanVector") -> "EuclideanVector":
        return EuclideanVector(self.geometry, self.terms + other.terms)

    def __mul__(self, scale: complex) -> "EuclideanVector":
        return EuclideanVector(self.geometry, tuple((c * scale, mono) for c, mono in self.terms))

    __rmul__ = __mul__

    def __sub__(self, other: "EuclideanVector") -> "EuclideanVector":
        return self + other * -1.0

    def check_support(self) -> None:
        for _, mono in self.terms:
            for f in mono:
                site = first_inadmissible_site(f)
                if site is not None:
                    raise SupportViolationError(messages().t("rp.support_violation", site=site))


def combine(vectors: Sequence[EuclideanVector], coeffs: Sequence[complex]) -> EuclideanVector:
    terms: list = []
    for v, c in zip(vectors, coeffs):
        terms.extend((c * a, mono) for a, mono in v.terms)
    return EuclideanVector(vectors[0].geometry, tuple(terms))


def monomial_generators(
    geometry: LatticeGeometry, sites: Iterable[Site], max_degree: int
) -> list[EuclideanVector]:
    """Vacuum plus every multiset of delta fields at ``sites`` up to ``max_degree``."""
    sites = sorted(sites)
    gens = []
    for n in range(max_degree + 1):
        for combo in itertools.combinations_with_replacement(sites, n):
            gens.append(EuclideanVector.of_sites(geometry, combo))
    return gens


def _key(mono: Monomial) -> tuple:
    return tuple(sorted(f.values.tobytes() for f in mono))


class _MonomialTable:
    """Distinct monomials of a generator list and the coefficient matrix onto them."""

    def __init__(self, generators: Sequence[EuclideanVector]):
        self.monomials: list[Monomial] = []
        index: dict[tuple, int] = {}
        entries = []
        for j, gen in enumerate(generators):
            for coeff, mono in gen.terms:
                k = index.setdefault(_key(mono), len(self.monomials))
                if k == len(self.monomials):
                    self.monomials.append(mono)
                entries.append((k, j, coeff))
        self.coefficients = np.zeros((len(self.monomials), len(generators)), dtype=complex)
        for k, j, coeff in entries:
            self.coefficients[k, j] += coeff


def _stack(monos: Sequence[Monomial], reflected: bool) -> np.ndarray:
    n = len(monos[0])
    size = monos[0][0].geometry.n_sites if n else 0
    out = np.zeros((len(monos), n, size))
    for a, mono in enumerate(monos):
        for u, f in enumerate(mono):
            out[a, u] = (reflect(f) if reflected else f).values
    return out


def pairing_block(kernel: np.ndarray, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Gaussian moments E[prod left_a * prod right_b] for stacks of monomials.

    ``left`` has shape (A, m, sites) and ``right`` (B, n, sites). Each perfect
    pairing of the m+n factors contributes a product of left-left, right-right
    and left-right contractions.
    """
    count_a, m = left.shape[:2]
    count_b, n = right.shape[:2]
    if (m + n) % 2:
        return np.zeros((count_a, count_b))
    if m + n == 0:
        return np.ones((count_a, count_b))
    ll = np.einsum("aus,st,avt->auv", left, kernel, left) if m else None
    rr = np.einsum("bus,st,bvt->buv", right, kernel, right) if n else None
    lr = np.einsum("aus,st,bvt->aubv", left, kernel, right) if m and n else None

    out = np.zeros((count_a, count_b))
    for pairing in perfect_pairings(list(range(m + n))):
        term = np.ones((count_a, count_b))
        for u, v in pairing:
            if v < m:
                term = term * ll[:, u, v][:, None]
            elif u >= m:
                term = term * rr[:, u - m, v - m][None, :]
            else:
                term = term * lr[:, u, :, v - m]
        out += term
    return out


def _moment_matrix(
    cov: CovarianceOperator, left: Sequence[Monomial], right: Sequence[Monomial], cap: Optional[int]
) -> np.ndarray:
    """<L_k, Theta R_l> for monomials: moments of L_k times the reflected R_l."""
    out = np.zeros((len(left), len(right)))
    groups_l: dict[int, list[int]] = {}
    groups_r: dict[int, list[int]] = {}
    for k, mono in enumerate(left):
        groups_l.setdefault(len(mono), []).append(k)
    for k, mono in enumerate(right):
        groups_r.setdefault(len(mono), []).append(k)

    for m, rows in groups_l.items():
        for n, cols in groups_r.items():
            if cap is not None and m + n > cap:
                raise ComplexityGuardError(messages().t("gaussian.moment_cap", n=m + n, cap=cap))
            if (m + n) % 2:
                continue
            block = pairing_block(
                cov.kernel,
                _stack([left[k] for k in rows], reflected=False),
                _stack([right[k] for k in cols], reflected=True),
            )
            out[np.ix_(rows, cols)] = block
    return out


def gram_entry(
    cov: CovarianceOperator, A: Sequence[TestFunction], B: Sequence[TestFunction], cap: Optional[int] = DEFAULT_MOMENT_CAP
) -> complex:
    n = len(A) + len(B)
    if cap is not None and n > cap:
        raise ComplexityGuardError(messages().t("gaussian.moment_cap", n=n, cap=cap))
    if n % 2:
        return 0.0
    fs = list(A) + [reflect(g) for g in B]
    return float(np.real(hafnian(cov.pair_matrix(fs, fs))))


def cross_gram(
    cov: CovarianceOperator,
    left: Sequence[EuclideanVector],
    right: Sequence[EuclideanVector],
    cap: Optional[int] = DEFAULT_MOMENT_CAP,
) -> np.ndarray:
    """Matrix of <L_i, Theta R_j>, antilinear in the left argument."""
    tl, tr = _MonomialTable(left), _MonomialTable(right)
    moments = _moment_matrix(cov, tl.monomials, tr.monomials, cap)
    return tl.coefficients.conj().T @ moments @ tr.coefficients


@dataclass(frozen=True, eq=False)
class RPGram:
    generators: tuple[EuclideanVector, ...]
    matrix: np.ndarray = field(repr=False)
    hermiticity_residual: float = 0.0

    @classmethod
    def from_matrix(cls, matrix) -> "RPGram":
        g = np.asarray(matrix, dtype=complex)
        return cls((), g, _hermiticity(g))

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def _hermiticity(g: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(g))), 1e-300) if g.size else 1.0
    return float(np.max(np.abs(g - g.conj().T))) / scale if g.size else 0.0


def assemble_gram(
    cov: CovarianceOperator, generators: Sequence[EuclideanVector], cap: Optional[int] = DEFAULT_MOMENT_CAP
) -> RPGram:
    for gen in generators:
        gen.check_support()
    g = cross_gram(cov, generators, generators, cap)
    residual = _hermiticity(g)
    return RPGram(tuple(generators), 0.5 * (g + g.conj().T), residual)


@dataclass
class RPVerdict:
    passed: bool
    min_eigenvalue: float
    max_eigenvalue: float
    tolerance: float

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "min_eigenvalue": self.min_eigenvalue,
            "max_eigenvalue": self.max_eigenvalue,
            "tolerance": self.tolerance,
        }


def check_rp(gram: Union[RPGram, np.ndarray], tol: float = DEFAULT_TOL) -> RPVerdict:
    if not isinstance(gram, RPGram):
        gram = RPGram.from_matrix(gram)
    if gram.hermiticity_residual > 1e-13:
        raise DomainError(messages().t("rp.not_hermitian", residual=gram.hermiticity_residual))
    w = sla.eigvalsh(gram.matrix)
    lmin, lmax = float(w[0]), float(w[-1])
    return RPVerdict(lmin >= -tol * max(lmax, 0.0), lmin, lmax, tol)


@dataclass(frozen=True, eq=False)
class QuotientBasis:
    generators: tuple[EuclideanVector, ...]
    gram: np.ndarray = field(repr=False)
    rank: int = 0
    isometry: np.ndarray = field(default=None, repr=False)
    null_space: np.ndarray = field(default=None, repr=False)
    eigenvalues: np.ndarray = field(default=None, repr=False)
    tolerance: float = DEFAULT_TOL

    def coordinates(self, coeffs: np.ndarray) -> np.ndarray:
        """Quotient coordinates of the combination sum_i c_i generator_i."""
        return self.isometry.conj().T @ (self.gram @ np.asarray(coeffs, dtype=complex))

    def generator_coordinates(self) -> np.ndarray:
        """Columns are the coordinates of each generator."""
        return self.isometry.conj().T @ self.gram

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "tolerance": self.tolerance,
            "V_real": self.isometry.real.tolist(),
            "V_imag": self.isometry.imag.tolist(),
        }


def quotient(gram: Union[RPGram, np.ndarray], tol: float = DEFAULT_TOL) -> QuotientBasis:
    if not isinstance(gram, RPGram):
        gram = RPGram.from_matrix(gram)
    verdict = check_rp(gram, tol)
    if not verdict.passed:
        raise ReflectionPositivityError(
            messages().t("rp.not_positive", lmin=verdict.min_eigenvalue, lmax=verdict.max_eigenvalue)
        )
    w, u = sla.eigh(gram.matrix)
    keep = w > tol * w[-1]
    v = u[:, keep] / np.sqrt(w[keep])
    return QuotientBasis(
        generators=gram.generators,
        gram=gram.matrix,
        rank=int(keep.sum()),
        isometry=v,
        null_space=u[:, ~keep],
        eigenvalues=w,
        tolerance=tol,
    )


def quantize(
    basis: QuotientBasis, cov: CovarianceOperator, A: EuclideanVector, span_tol: float = SPAN_TOL
) -> np.ndarray:
    A.check_support()
    g_a = cross_gram(cov, basis.generators, [A])[:, 0]
    y = basis.isometry.conj().T @ g_a
    norm2 = float(cross_gram(cov, [A], [A])[0, 0].real)
    deficit = norm2 - float(np.vdot(y, y).real)
    if deficit > span_tol * max(1.0, norm2):
        raise SpanDeficiencyError(messages().t("rp.span_deficiency", deficit=deficit))
    return y


def isometry_defect(basis: QuotientBasis) -> float:
    """max |<A_i^, A_j^> - <A_i, Theta A_j>| over generator pairs."""
    y = basis.generator_coordinates()
    return float(np.max(np.abs(y.conj().T @ y - basis.gram)))


@dataclass
class CholeskyResult:
    rank: int
    factor: np.ndarray = field(repr=False)
    pivots: np.ndarray = field(repr=False)
    negative_pivot: bool = False
    min_remaining: float = 0.0


def pivoted_cholesky(matrix: np.ndarray, tol: float = DEFAULT_TOL) -> CholeskyResult:
    """Greedy diagonal-pivoted Cholesky, stopped at the relative tolerance.

    Returns the low-rank factor L with matrix ~= L L^H and flags any remaining
    diagonal entry below -tol times the first pivot.
    """
    a = np.array(matrix, dtype=complex)
    n = a.shape[0]
    piv = np.arange(n)
    rank = n
    first = None
    negative = False

    for i in range(n):
        d = a.diagonal().real
        j = i + int(np.argmax(d[i:]))
        a_max = d[j]
        if first is None:
            first = a_max
            if first <= 0:
                rank = 0
                negative = bool(first < 0)
                break
        if float(np.min(d[i:])) < -tol * first:
            negative = True
        if a_max <= tol * first:
            rank = i
            break

        if j != i:
            a[:, [i, j]] = a[:, [j, i]]
            a[[i, j], :] = a[[j, i], :]
            piv[[i, j]] = piv[[j, i]]

        a[i, i] = np.sqrt(a[i, i].real)
        a[i + 1:, i] /= a[i, i]
        a[i + 1:, i + 1:] -= np.outer(a[i + 1:, i], a[i + 1:, i].conj())

    d = a.diagonal().real
    min_remaining = float(np.min(d[rank:])) if rank < n else 0.0
    lower = np.tril(a)[:, :rank]
    ipiv = np.empty(n, dtype=int)
    ipiv[piv] = np.arange(n)
    return CholeskyResult(rank, lower[ipiv, :], piv, negative, min_remaining)


def rank_curve(gram: RPGram, tol: float = DEFAULT_TOL, steps: Optional[Sequence[int]] = None) -> list[tuple[int, int]]:
    """Quotient rank of the leading k generators, for k in ``steps``."""
    n = gram.size
    steps = steps or list(range(1, n + 1))
    out = []
    for k in steps:
        w = sla.eigvalsh(gram.matrix[:k, :k])
        out.append((k, int(np.sum(w > tol * w[-1])) if w[-1] > 0 else 0))
    return out


def exponential_gram(cov: CovarianceOperator, fs: Sequence[TestFunction]) -> np.ndarray:
    """<e^{i Phi(f_i)} Omega, Theta e^{i Phi(f_j)} Omega> = S(theta f_j - f_i)."""
    S = CharacteristicFunctional(cov)
    refl = [reflect(f) for f in fs]
    out = np.zeros((len(fs), len(fs)))
    for i, f in enumerate(fs):
        for j, g in enumerate(refl):
            out[i, j] = eval_S(S, g - f)
    return out


def exponential_series_gram(cov: CovarianceOperator, fs: Sequence[TestFunction], order: int) -> np.ndarray:
    """Truncated moment expansion of :func:`exponential_gram`, total degree <= order."""
    geom = fs[0].geometry
    out = np.zeros((len(fs), len(fs)), dtype=complex)
    for m in range(order + 1):
        left = [EuclideanVector.monomial(geom, [f] * m) for f in fs]
        for n in range(order + 1 - m):
            right = [EuclideanVector.monomial(geom, [f] * n) for f in fs]
            weight = (-1j) ** m * (1j) ** n / (math.factorial(m) * math.factorial(n))
            out += weight * cross_gram(cov, left, right, cap=None)
    return out
