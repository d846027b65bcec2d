"""Localised generator families and the rank test for quantization domains."""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .exceptions import DomainError, ScheduleInfeasibleError
from .fock import PhysicalSpace
from .i18n import messages
from .lattice import LatticeGeometry, Site
from .rp_quantize import DEFAULT_TOL, EuclideanVector

WITNESS_TOL = 1e-8


@dataclass(frozen=True)
class Region:
    sites: frozenset[Site]
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "sites", frozenset(tuple(int(v) for v in s) for s in self.sites))
        if not self.sites:
            raise DomainError(messages().t("density.empty_region", label=self.label))
        bad = sorted(s for s in self.sites if s[0] < 1)
        if bad:
            raise DomainError(messages().t("density.nonpositive_time", label=self.label, site=bad[0]))

    @classmethod
    def box(cls, times: Iterable[int], points: Iterable[Sequence[int]], label: str = "") -> "Region":
        return cls(frozenset((t, *p) for t in times for p in points), label)

    @classmethod
    def positive_half(cls, geom: LatticeGeometry, label: str = "X+") -> "Region":
        return cls.box(geom.positive_times, geom.spatial_points, label)

    @property
    def times(self) -> list[int]:
        return sorted({s[0] for s in self.sites})

    def at_time(self, t: int) -> list[Site]:
        return sorted(s for s in self.sites if s[0] == t)

    def __le__(self, other: "Region") -> bool:
        return self.sites <= other.sites


def strip_schedule(times: Sequence[int], n: int, eps_gap: int = 1) -> tuple[tuple[int, ...], ...]:
    """Assign each of n factors a strip of region times, consecutive strips 2*eps_gap apart."""
    times = sorted(set(times))
    if n == 0:
        return ()
    if n == 1:
        return (tuple(times),)
    span = times[-1] - times[0] + 1
    width = (span - (n - 1) * (2 * eps_gap - 1)) // n
    if width < 1:
        raise ScheduleInfeasibleError(messages().t("density.schedule_infeasible", n=n, span=span, gap=eps_gap))
    strips = []
    for j in range(n):
        start = times[0] + j * (width + 2 * eps_gap - 1)
        strip = tuple(t for t in times if start <= t < start + width)
        if not strip:
            raise ScheduleInfeasibleError(messages().t("density.schedule_infeasible", n=n, span=span, gap=eps_gap))
        strips.append(strip)
    return tuple(strips)


def region_family(
    region: Region, n: int, eps_gap: int = 1, coincident_times: bool = True
) -> tuple[list[tuple[Site, ...]], bool]:
    """Degree-n site tuples of the generating family and whether a separated schedule existed."""
    family: set[tuple[Site, ...]] = set()
    feasible = True
    try:
        strips = strip_schedule(region.times, n, eps_gap)
        choices = [[s for t in strip for s in region.at_time(t)] for strip in strips]
        family.update(tuple(sorted(c)) for c in itertools.product(*choices))
    except ScheduleInfeasibleError:
        if not coincident_times:
            raise
        feasible = False
    if coincident_times:
        family.update(itertools.combinations_with_replacement(sorted(region.sites), n))
    return sorted(family), feasible


@dataclass
class DensityReport:
    label: str
    degree: int
    dims: list[int]
    ranks: list[int]
    min_singular_values: list[float]
    schedule_feasible: list[bool]
    family_size: int
    witness: Optional[np.ndarray] = field(default=None, repr=False)
    witness_degree: Optional[int] = None
    witness_overlap: Optional[float] = None
    seconds: float = 0.0

    @property
    def gaps(self) -> list[int]:
        return [d - r for d, r in zip(self.dims, self.ranks)]

    @property
    def dense(self) -> bool:
        return all(g == 0 for g in self.gaps)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "degree": self.degree,
            "dims": self.dims,
            "ranks": self.ranks,
            "gaps": self.gaps,
            "min_singular_values": self.min_singular_values,
            "schedule_feasible": self.schedule_feasible,
            "family_size": self.family_size,
            "witness_degree": self.witness_degree,
            "witness_overlap": self.witness_overlap,
        }


def density_check(
    space: PhysicalSpace,
    region: Region,
    N: int,
    tol: float = DEFAULT_TOL,
    eps_gap: int = 1,
    coincident_times: bool = True,
) -> DensityReport:
    if N > space.n_max:
        raise DomainError(messages().t("fock.degree_exceeds_truncation", degree=N, n_max=space.n_max))
    started = time.perf_counter()
    geom = space.geometry

    dims, ranks, sigmas, feasible = [], [], [], []
    vectors = []
    witness = witness_degree = None
    for n in range(N + 1):
        family, ok = region_family(region, n, eps_gap, coincident_times)
        feasible.append(ok)
        coords = np.column_stack([space.quantize(EuclideanVector.of_sites(geom, sites)) for sites in family])
        vectors.append(coords)
        block = coords[space.sector(n), :]
        dim = sector_dimension(space.rank, n)
        u, s, _ = np.linalg.svd(block)
        rank = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
        dims.append(dim)
        ranks.append(rank)
        sigmas.append(float(s[dim - 1]) if s.size >= dim else 0.0)
        if rank < dim and witness is None:
            witness = np.zeros(space.dim, dtype=complex)
            witness[space.sector(n)] = u[:, rank]
            witness_degree = n

    overlap = None
    if witness is not None:
        overlap = float(max(np.max(np.abs(witness.conj() @ v)) for v in vectors))

    return DensityReport(
        label=region.label,
        degree=N,
        dims=dims,
        ranks=ranks,
        min_singular_values=sigmas,
        schedule_feasible=feasible,
        family_size=sum(v.shape[1] for v in vectors),
        witness=witness,
        witness_degree=witness_degree,
        witness_overlap=overlap,
        seconds=time.perf_counter() - started,
    )


def orthogonal_witness(report: DensityReport) -> Optional[np.ndarray]:
    """The unit vector orthogonal to the generated span, when the span is not full."""
    if report.witness is None:
        return None
    if report.witness_overlap is not None and report.witness_overlap > WITNESS_TOL:
        return None
    return report.witness


@dataclass
class SweepResult:
    reports: list[DensityReport]
    monotone: bool
    violations: list[tuple[str, str, int]]


def density_sweep(
    space: PhysicalSpace,
    regions: Sequence[Region],
    degrees: Sequence[int],
    tol: float = DEFAULT_TOL,
    eps_gap: int = 1,
    coincident_times: bool = True,
) -> SweepResult:
    reports = [
        density_check(space, region, N, tol, eps_gap, coincident_times)
        for region in regions
        for N in degrees
    ]
    by_key = {(r.label, r.degree): r for r in reports}
    violations = []
    for small, large in itertools.permutations(regions, 2):
        if not small <= large:
            continue
        for N in degrees:
            a, b = by_key[(small.label, N)], by_key[(large.label, N)]
            for n, (ra, rb) in enumerate(zip(a.ranks, b.ranks)):
                if ra > rb:
                    violations.append((small.label, large.label, n))
    return SweepResult(reports, not violations, violations)


def sector_dimension(rank: int, n: int) -> int:
    return math.comb(rank + n - 1, n)
