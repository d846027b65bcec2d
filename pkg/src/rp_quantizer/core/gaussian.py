"""Gaussian free field: covariance, characteristic functional, Wick moments, C1/C3."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .exceptions import ComplexityGuardError, MassError
from .i18n import messages
from .lattice import (
    LatticeGeometry,
    TestFunction,
    TimeBoundary,
    laplacian,
    random_test_function,
    reflect,
    shift,
    spacetime_norm,
    spatial_laplacian,
)

DEFAULT_MOMENT_CAP = 12


@dataclass(frozen=True, eq=False)
class CovarianceOperator:
    geometry: LatticeGeometry
    mass: float
    kernel: np.ndarray = field(repr=False)

    def pair(self, f: TestFunction, g: TestFunction) -> float:
        return float(f.values @ self.kernel @ g.values)

    def entry(self, a: Sequence[int], b: Sequence[int]) -> float:
        geom = self.geometry
        return float(self.kernel[geom.index(a), geom.index(b)])

    def pair_matrix(self, left: Sequence[TestFunction], right: Sequence[TestFunction]) -> np.ndarray:
        """Matrix of <f_i, C g_j>."""
        if not left or not right:
            return np.zeros((len(left), len(right)))
        fl = np.stack([f.values for f in left])
        fr = np.stack([g.values for g in right])
        return fl @ self.kernel @ fr.T


def kernel_rows(cov: CovarianceOperator) -> list[dict]:
    """Row-major kernel entries, sites in lexicographic (t, x1, ..., xs) order."""
    labels = [" ".join(str(v) for v in site) for site in cov.geometry.sites()]
    return [
        {"row": i, "col": j, "row_site": labels[i], "col_site": labels[j], "value": float(v)}
        for (i, j), v in np.ndenumerate(cov.kernel)
    ]


@dataclass(frozen=True)
class CharacteristicFunctional:
    covariance: CovarianceOperator


def _whole_line_kernel(geom: LatticeGeometry, m: float) -> np.ndarray:
    # spatial modes decouple; each is a 1D lattice Green function in t
    mu2, q = np.linalg.eigh(-spatial_laplacian(geom).toarray())
    omega = np.arccosh(1.0 + 0.5 * (m * m + mu2))
    t = np.arange(-geom.T, geom.T + 1)
    lag = np.abs(t[:, None] - t[None, :])
    decay = np.exp(-lag[:, :, None] * omega) / (2.0 * np.sinh(omega))
    kernel = np.einsum("ak,ijk,bk->iajb", q, decay, q)
    return kernel.reshape(geom.n_sites, geom.n_sites)


def build_covariance(geom: LatticeGeometry, m: float) -> CovarianceOperator:
    if not m > 0:
        raise MassError(messages().t("gaussian.invalid_mass", mass=m))
    if geom.time_boundary is TimeBoundary.INFINITE:
        kernel = _whole_line_kernel(geom, m)
    else:
        precision = -laplacian(geom).toarray() + m * m * np.eye(geom.n_sites)
        kernel = sla.solve(precision, np.eye(geom.n_sites), assume_a="pos")
    kernel = 0.5 * (kernel + kernel.T)
    kernel.setflags(write=False)
    return CovarianceOperator(geom, float(m), kernel)


def eval_S(S: CharacteristicFunctional, f: TestFunction) -> float:
    return math.exp(-0.5 * S.covariance.pair(f, f))


def pairing_count(n: int) -> int:
    """(n-1)!! for even n, 0 for odd n."""
    if n % 2:
        return 0
    return math.prod(range(n - 1, 0, -2))


def perfect_pairings(items: Sequence[int]) -> Iterator[list[tuple[int, int]]]:
    """All perfect pairings of ``items``, first element paired first."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for k, partner in enumerate(rest):
        for tail in perfect_pairings(rest[:k] + rest[k + 1:]):
            yield [(first, partner)] + tail


def hafnian(pairs: np.ndarray) -> complex:
    """Sum over perfect pairings of the product of matrix entries."""
    n = pairs.shape[0]
    if n % 2:
        return 0.0
    if n == 0:
        return 1.0

    def rec(idx: tuple[int, ...]):
        if not idx:
            return 1.0
        first, rest = idx[0], idx[1:]
        total = 0.0
        for k, partner in enumerate(rest):
            total = total + pairs[first, partner] * rec(rest[:k] + rest[k + 1:])
        return total

    return rec(tuple(range(n)))


def wick_moment(
    cov: CovarianceOperator, fs: Sequence[TestFunction], cap: Optional[int] = DEFAULT_MOMENT_CAP
) -> float:
    n = len(fs)
    if cap is not None and n > cap:
        raise ComplexityGuardError(messages().t("gaussian.moment_cap", n=n, cap=cap))
    if n % 2:
        return 0.0
    if n == 0:
        return 1.0
    return float(hafnian(cov.pair_matrix(fs, fs)))


def bivariate_moment(sxx: float, syy: float, sxy: float, p: int, q: int) -> float:
    """E[X^p Y^q] for centred jointly Gaussian X, Y, summed over the number k of X-Y pairs."""
    total = 0.0
    for k in range(min(p, q) + 1):
        if (p - k) % 2 or (q - k) % 2:
            continue
        total += (
            math.comb(p, k) * math.comb(q, k) * math.factorial(k)
            * pairing_count(p - k) * pairing_count(q - k)
            * sxx ** ((p - k) // 2) * syy ** ((q - k) // 2) * sxy**k
        )
    return total


@dataclass
class C1Report:
    samples: int
    max_spatial_deviation: float
    max_time_deviation: float
    max_reflection_deviation: float
    time_shift_exact: bool

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "max_spatial_deviation": self.max_spatial_deviation,
            "max_time_deviation": self.max_time_deviation,
            "max_reflection_deviation": self.max_reflection_deviation,
            "time_shift_exact": self.time_shift_exact,
        }


def verify_C1(S: CharacteristicFunctional, sample_count: int, rng: np.random.Generator) -> C1Report:
    geom = S.covariance.geometry
    interior = [t for t in geom.times if abs(t) < geom.T]

    spatial_dev = time_dev = refl_dev = 0.0
    for _ in range(sample_count):
        f = random_test_function(geom, rng, interior)
        base = eval_S(S, f)
        refl_dev = max(refl_dev, abs(eval_S(S, reflect(f)) - base))
        for j in range(1, geom.d):
            a = [0] * geom.d
            a[j] = 1
            spatial_dev = max(spatial_dev, abs(eval_S(S, shift(f, a)) - base))
        for step in (1, -1):
            time_dev = max(time_dev, time_shift_drift(S, f, step))

    return C1Report(
        samples=sample_count,
        max_spatial_deviation=spatial_dev,
        max_time_deviation=time_dev,
        max_reflection_deviation=refl_dev,
        time_shift_exact=geom.time_boundary is not TimeBoundary.DIRICHLET,
    )


def time_shift_drift(S: CharacteristicFunctional, f: TestFunction, step: int = 1) -> float:
    """|S(f shifted in time) - S(f)|; zero for translation invariant time axes."""
    a = [step] + [0] * f.geometry.s
    return abs(eval_S(S, shift(f, a)) - eval_S(S, f))


def boundary_drift(geom: LatticeGeometry, m: float, radius: int = 1) -> float:
    """Largest kernel gap between the Dirichlet window and the whole time line.

    Only sites with |t| <= radius are compared.
    """
    base = dict(geom.to_dict(), time_boundary=TimeBoundary.DIRICHLET.value, reflection="site")
    dirichlet = build_covariance(LatticeGeometry.from_dict(base), m)
    whole = build_covariance(
        LatticeGeometry.from_dict(dict(base, time_boundary=TimeBoundary.INFINITE.value)), m
    )
    rows = [i for i, site in enumerate(geom.sites()) if abs(site[0]) <= radius]
    diff = dirichlet.kernel[np.ix_(rows, rows)] - whole.kernel[np.ix_(rows, rows)]
    return float(np.max(np.abs(diff)))


@dataclass
class C3Report:
    samples: int
    r: int
    M_fit: float
    max_abs_S: float
    bounded_by_one: bool
    exponent: int = 2

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "r": self.r,
            "M_fit": self.M_fit,
            "max_abs_S": self.max_abs_S,
            "bounded_by_one": self.bounded_by_one,
            "exponent": self.exponent,
        }


def verify_C3(
    S: CharacteristicFunctional, r: int, samples: Sequence[TestFunction]
) -> tuple[float, C3Report]:
    cov = S.covariance
    m_fit = 0.0
    max_abs = 0.0
    for f in samples:
        norm = spacetime_norm(f, r)
        if norm == 0:
            continue
        m_fit = max(m_fit, cov.pair(f, f) / norm**2)
        max_abs = max(max_abs, abs(eval_S(S, f)))
    report = C3Report(
        samples=len(samples),
        r=r,
        M_fit=m_fit,
        max_abs_S=max_abs,
        bounded_by_one=max_abs <= 1.0,
    )
    return m_fit, report


def degenerate_geometry(spatial_sizes: Sequence[int] = ()) -> LatticeGeometry:
    """A single time slice with periodic time, for hand-checkable kernels."""
    return LatticeGeometry(0, tuple(spatial_sizes), TimeBoundary.PERIODIC)

