"""Space-time lattice, time reflection, translations and discrete Sobolev norms.

Sites are integer tuples (t, x1, ..., xs) with t in -T..T and each x_j on a
circle of L_j points. Flat indices follow lexicographic order of the tuples.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Mapping, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .exceptions import DomainError, GeometryError, OutOfRangeError
from .i18n import messages

Site = tuple[int, ...]


class TimeBoundary(str, Enum):
    DIRICHLET = "dirichlet"
    PERIODIC = "periodic"
    # whole time line, observed through the window -T..T
    INFINITE = "infinite"


class Reflection(str, Enum):
    SITE = "site"
    LINK = "link"


@dataclass(frozen=True)
class LatticeGeometry:
    T: int
    spatial_sizes: tuple[int, ...] = ()
    time_boundary: TimeBoundary = TimeBoundary.DIRICHLET
    reflection: Reflection = Reflection.SITE

    def __post_init__(self):
        object.__setattr__(self, "spatial_sizes", tuple(int(n) for n in self.spatial_sizes))
        object.__setattr__(self, "time_boundary", TimeBoundary(self.time_boundary))
        object.__setattr__(self, "reflection", Reflection(self.reflection))

    @property
    def s(self) -> int:
        return len(self.spatial_sizes)

    @property
    def d(self) -> int:
        return self.s + 1

    @property
    def n_times(self) -> int:
        return 2 * self.T + 1

    @property
    def times(self) -> range:
        return range(-self.T, self.T + 1)

    @property
    def slice_size(self) -> int:
        return math.prod(self.spatial_sizes)

    @property
    def n_sites(self) -> int:
        return self.n_times * self.slice_size

    @cached_property
    def spatial_points(self) -> tuple[tuple[int, ...], ...]:
        return tuple(itertools.product(*(range(n) for n in self.spatial_sizes)))

    def sites(self) -> list[Site]:
        return [(t, *x) for t in self.times for x in self.spatial_points]

    def index(self, site: Sequence[int]) -> int:
        t, x = int(site[0]), tuple(int(v) for v in site[1:])
        if t not in self.times or len(x) != self.s or any(
            not 0 <= xi < n for xi, n in zip(x, self.spatial_sizes)
        ):
            raise OutOfRangeError(messages().t("lattice.site_out_of_range", site=tuple(site)))
        offset = int(np.ravel_multi_index(x, self.spatial_sizes)) if self.s else 0
        return (t + self.T) * self.slice_size + offset

    def site(self, index: int) -> Site:
        row, offset = divmod(int(index), self.slice_size)
        x = np.unravel_index(offset, self.spatial_sizes) if self.s else ()
        return (row - self.T, *(int(v) for v in x))

    def wrap_time(self, t: int) -> int:
        return (t + self.T) % self.n_times - self.T

    def reflect_time(self, t: int) -> int:
        tt = -t if self.reflection is Reflection.SITE else 1 - t
        if self.time_boundary is TimeBoundary.PERIODIC:
            return self.wrap_time(tt)
        if tt not in self.times:
            raise OutOfRangeError(messages().t("lattice.reflection_out_of_window", t=t, T=self.T))
        return tt

    def admissible_time(self, t: int) -> bool:
        """Times allowed for generator supports: X+ and X0."""
        return t >= (0 if self.reflection is Reflection.SITE else 1)

    @property
    def admissible_times(self) -> list[int]:
        return [t for t in self.times if self.admissible_time(t)]

    @property
    def positive_times(self) -> list[int]:
        return [t for t in self.times if t >= 1]

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "spatial_sizes": list(self.spatial_sizes),
            "time_boundary": self.time_boundary.value,
            "reflection": self.reflection.value,
        }

    @staticmethod
    def from_dict(data: Mapping) -> "LatticeGeometry":
        return build_geometry(
            int(data["T"]),
            list(data.get("spatial_sizes", [])),
            data.get("time_boundary", TimeBoundary.DIRICHLET.value),
            data.get("reflection", Reflection.SITE.value),
        )


def build_geometry(
    T: int,
    spatial_sizes: Sequence[int] = (),
    time_boundary: Union[str, TimeBoundary] = TimeBoundary.DIRICHLET,
    reflection: Union[str, Reflection] = Reflection.SITE,
) -> LatticeGeometry:
    m = messages()
    if T < 1:
        raise GeometryError(m.t("lattice.invalid_time_extent", T=T))
    if any(n < 2 for n in spatial_sizes):
        raise GeometryError(m.t("lattice.invalid_spatial_size", sizes=list(spatial_sizes)))
    try:
        boundary, refl = TimeBoundary(time_boundary), Reflection(reflection)
    except ValueError as e:
        raise GeometryError(str(e))
    # -T..T is not symmetric about t = 1/2 unless the time axis wraps
    if boundary is TimeBoundary.DIRICHLET and refl is Reflection.LINK:
        raise GeometryError(m.t("lattice.link_needs_symmetric_window"))
    return LatticeGeometry(T, tuple(spatial_sizes), boundary, refl)


@dataclass(frozen=True, eq=False)
class TestFunction:
    __test__ = False

    geometry: LatticeGeometry
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.values, dtype=float).reshape(self.geometry.n_sites)
        if not np.all(np.isfinite(arr)):
            raise DomainError(messages().t("lattice.non_finite_values"))
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def zeros(cls, geometry: LatticeGeometry) -> "TestFunction":
        return cls(geometry, np.zeros(geometry.n_sites))

    @classmethod
    def delta(cls, geometry: LatticeGeometry, site: Sequence[int], weight: float = 1.0) -> "TestFunction":
        values = np.zeros(geometry.n_sites)
        values[geometry.index(site)] = weight
        return cls(geometry, values)

    @classmethod
    def from_sparse(
        cls, geometry: LatticeGeometry, entries: Union[Mapping, Iterable]
    ) -> "TestFunction":
        """Build from {site: value} or from [[site, value], ...] as read from JSON."""
        items = entries.items() if isinstance(entries, Mapping) else entries
        values = np.zeros(geometry.n_sites)
        for site, value in items:
            values[geometry.index(tuple(site))] += float(value)
        return cls(geometry, values)

    @classmethod
    def on_slice(cls, geometry: LatticeGeometry, t: int, slice_values: Sequence[float]) -> "TestFunction":
        grid = np.zeros((geometry.n_times, geometry.slice_size))
        grid[t + geometry.T] = np.asarray(slice_values, dtype=float).reshape(geometry.slice_size)
        return cls(geometry, grid)

    def to_sparse(self) -> dict[Site, float]:
        return {self.geometry.site(i): float(self.values[i]) for i in np.flatnonzero(self.values)}

    @property
    def grid(self) -> np.ndarray:
        """Values as a (time, slice) array."""
        return self.values.reshape(self.geometry.n_times, self.geometry.slice_size)

    @property
    def support(self) -> frozenset[Site]:
        return frozenset(self.to_sparse())

    @property
    def time_support(self) -> tuple[int, ...]:
        rows = np.flatnonzero(np.any(self.grid != 0, axis=1))
        return tuple(int(r) - self.geometry.T for r in rows)

    def slice_values(self, t: int) -> np.ndarray:
        return self.grid[t + self.geometry.T]

    def __add__(self, other: "TestFunction") -> "TestFunction":
        return TestFunction(self.geometry, self.values + other.values)

    def __sub__(self, other: "TestFunction") -> "TestFunction":
        return TestFunction(self.geometry, self.values - other.values)

    def __mul__(self, scale: float) -> "TestFunction":
        return TestFunction(self.geometry, self.values * float(scale))

    __rmul__ = __mul__

    def __neg__(self) -> "TestFunction":
        return self * -1.0


def reflect(f: TestFunction) -> TestFunction:
    geom = f.geometry
    grid = np.zeros_like(f.grid)
    for t in f.time_support:
        grid[geom.reflect_time(t) + geom.T] = f.slice_values(t)
    return TestFunction(geom, grid)


def shift(f: TestFunction, a: Sequence[int]) -> TestFunction:
    """Translate f by a = (a0, a1, ..., as): f_a(x) = f(x - a)."""
    geom = f.geometry
    if len(a) != geom.d:
        raise GeometryError(messages().t("lattice.shift_dimension", got=len(a), d=geom.d))
    a0, spatial = int(a[0]), [int(v) for v in a[1:]]

    grid = f.grid
    if geom.s and any(spatial):
        cube = grid.reshape(geom.n_times, *geom.spatial_sizes)
        cube = np.roll(cube, spatial, axis=tuple(range(1, geom.d)))
        grid = cube.reshape(geom.n_times, geom.slice_size)
    if a0 == 0:
        return TestFunction(geom, grid)

    out = np.zeros_like(grid)
    for t in f.time_support:
        tt = t + a0
        if geom.time_boundary is TimeBoundary.PERIODIC:
            tt = geom.wrap_time(tt)
        elif tt not in geom.times:
            raise OutOfRangeError(messages().t("lattice.shift_off_window", t=t, a0=a0, T=geom.T))
        out[tt + geom.T] = grid[t + geom.T]
    return TestFunction(geom, out)


def cycle_laplacian(n: int) -> sp.csr_matrix:
    """f(x+1) + f(x-1) - 2 f(x) on a circle of n points."""
    if n == 1:
        return sp.csr_matrix((1, 1))
    roll = sp.eye(n, k=1, format="csr") + sp.eye(n, k=1 - n, format="csr")
    return (roll + roll.T - 2 * sp.eye(n, format="csr")).tocsr()


def path_laplacian(n: int) -> sp.csr_matrix:
    """Second difference on n points with zero values outside."""
    return sp.diags([np.ones(n - 1), -2 * np.ones(n), np.ones(n - 1)], [-1, 0, 1], format="csr")


def time_laplacian(n: int, boundary: Union[str, TimeBoundary]) -> sp.csr_matrix:
    if TimeBoundary(boundary) is TimeBoundary.PERIODIC:
        return cycle_laplacian(n)
    return path_laplacian(n)


def spatial_laplacian(geom: LatticeGeometry) -> sp.csr_matrix:
    # the last coordinate varies fastest, matching the flat site order
    lap = sp.csr_matrix((1, 1))
    for n in geom.spatial_sizes:
        lap = sp.kronsum(cycle_laplacian(n), lap, format="csr")
    return lap.tocsr()


def laplacian(geom: LatticeGeometry) -> sp.csr_matrix:
    """Nearest-neighbour Laplacian on all sites.

    For the infinite boundary this is the Dirichlet operator of the window; the
    whole-line covariance is not its inverse and is built in closed form instead.
    """
    lt = time_laplacian(geom.n_times, geom.time_boundary)
    lx = spatial_laplacian(geom)
    return (sp.kron(lt, sp.eye(geom.slice_size)) + sp.kron(sp.eye(geom.n_times), lx)).tocsr()


def _slice_sobolev(geom: LatticeGeometry, row: np.ndarray, r: int) -> float:
    if r < 0:
        raise DomainError(messages().t("lattice.negative_order", r=r))
    op = sp.eye(geom.slice_size, format="csr") - spatial_laplacian(geom)
    v = np.asarray(row, dtype=float)
    for _ in range(r):
        v = op @ v
    return float(np.linalg.norm(v))


def sobolev_norm(h: TestFunction, r: int) -> float:
    times = h.time_support
    if len(times) > 1:
        raise DomainError(messages().t("lattice.not_time_zero", times=list(times)))
    if not times:
        return 0.0
    return _slice_sobolev(h.geometry, h.slice_values(times[0]), r)


def spacetime_norm(f: TestFunction, r: int) -> float:
    return float(sum(_slice_sobolev(f.geometry, f.slice_values(t), r) for t in f.time_support))


def random_test_function(
    geom: LatticeGeometry,
    rng: np.random.Generator,
    times: Union[Sequence[int], None] = None,
    scale: float = 1.0,
) -> TestFunction:
    """Gaussian values on the given time slices, normalised to l2 norm ``scale``."""
    rows = list(geom.times if times is None else times)
    grid = np.zeros((geom.n_times, geom.slice_size))
    for t in rows:
        grid[t + geom.T] = rng.standard_normal(geom.slice_size)
    norm = np.linalg.norm(grid)
    if norm > 0:
        grid *= scale / norm
    return TestFunction(geom, grid)


def random_slice_function(
    geom: LatticeGeometry, rng: np.random.Generator, t: int = 0, scale: float = 1.0
) -> TestFunction:
    return random_test_function(geom, rng, [t], scale)


def first_inadmissible_site(f: TestFunction) -> Union[Site, None]:
    """First support site outside the generator region, or None."""
    geom = f.geometry
    for t in f.time_support:
        if not geom.admissible_time(t):
            offset = int(np.flatnonzero(f.slice_values(t))[0])
            return geom.site((t + geom.T) * geom.slice_size + offset)
    return None
