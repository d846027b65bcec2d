"""Transfer operator, Hamiltonian, momentum and fields on the truncated physical space."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .exceptions import ContinuationError, DomainError, GeometryError, MarginError, UnsupportedRegimeError
from .fock import PhysicalSpace, fock_dimension
from .gaussian import build_covariance
from .i18n import messages
from .lattice import (
    LatticeGeometry,
    Reflection,
    TestFunction,
    TimeBoundary,
    random_slice_function,
    random_test_function,
    shift,
    sobolev_norm,
    spacetime_norm,
)

OP_TOL = 1e-10
COMMUTATOR_TOL = 1e-8
MOMENTUM_BRANCH = "(-pi, pi]"
# fixed weights that split joint eigenvalues of H and P_j
_SPLIT = (math.sqrt(2) - 1, math.sqrt(3) - 1, math.sqrt(5) - 2)


class OperatorLabel(str, Enum):
    TRANSFER = "transfer"
    HAMILTONIAN = "hamiltonian"
    MOMENTUM = "momentum"
    FIELD = "field"
    REGULARIZED_FIELD = "regularized_field"
    OTHER = "other"


@dataclass(frozen=True, eq=False)
class SectorOperator:
    space: Optional[PhysicalSpace]
    matrix: np.ndarray = field(repr=False)
    label: OperatorLabel = OperatorLabel.OTHER
    notes: dict = field(default_factory=dict)

    def blocks(self) -> list[slice]:
        if self.space is None:
            return [slice(0, self.matrix.shape[0])]
        return self.space.sector_slices

    def sector_block(self, n: int) -> np.ndarray:
        sl = self.blocks()[n]
        return self.matrix[sl, sl]

    def off_block_norm(self) -> float:
        """Size of the part that changes monomial degree."""
        rest = self.matrix.copy()
        for sl in self.blocks():
            rest[sl, sl] = 0
        return float(np.max(np.abs(rest))) if rest.size else 0.0

    def self_adjoint_residual(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))


def apply_function(op: SectorOperator, fn) -> np.ndarray:
    """fn applied through the spectral decomposition of each sector block."""
    out = np.zeros_like(op.matrix, dtype=complex)
    for sl in op.blocks():
        w, u = sla.eigh(op.matrix[sl, sl])
        out[sl, sl] = (u * fn(w)) @ u.conj().T
    return out


@dataclass(frozen=True)
class DispersionOracle:
    geometry: LatticeGeometry
    mass: float

    def momenta(self) -> list[tuple[int, ...]]:
        return list(itertools.product(*(range(n) for n in self.geometry.spatial_sizes)))

    def omega(self, k: Sequence[int]) -> float:
        lap = sum(2 * (1 - math.cos(2 * math.pi * kj / n)) for kj, n in zip(k, self.geometry.spatial_sizes))
        return math.acosh(1 + 0.5 * (self.mass**2 + lap))

    def momentum(self, k: Sequence[int]) -> tuple[float, ...]:
        """Lattice momentum 2 pi k / L folded into (-pi, pi]."""
        out = []
        for kj, n in zip(k, self.geometry.spatial_sizes):
            p = 2 * math.pi * kj / n
            out.append(p - 2 * math.pi if p > math.pi + 1e-12 else p)
        return tuple(out)

    @property
    def omega_min(self) -> float:
        return math.acosh(1 + 0.5 * self.mass**2)

    def table(self) -> dict[tuple[int, ...], float]:
        return {k: self.omega(k) for k in self.momenta()}

    def one_particle_energies(self) -> np.ndarray:
        return np.sort(np.array(list(self.table().values())))


def _slice_columns(space: PhysicalSpace, times: Sequence[int]) -> np.ndarray:
    geom = space.geometry
    cols = []
    for t in times:
        for x in geom.spatial_points:
            cols.append(space.one_particle_coordinates(TestFunction.delta(geom, (t, *x))))
    return np.column_stack(cols)


def _shift_columns(space: PhysicalSpace, times: Sequence[int], a: Sequence[int]) -> np.ndarray:
    geom = space.geometry
    cols = []
    for t in times:
        for x in geom.spatial_points:
            cols.append(space.one_particle_coordinates(shift(TestFunction.delta(geom, (t, *x)), a)))
    return np.column_stack(cols)


def source_slices(space: PhysicalSpace) -> list[int]:
    """Fewest consecutive admissible slices, from the reflection plane on, spanning the one-particle space."""
    admissible = space.geometry.admissible_times
    for k in range(1, len(admissible) + 1):
        y = _slice_columns(space, admissible[:k])
        s = np.linalg.svd(y, compute_uv=False)
        if s.size and np.sum(s > space.tol * s[0]) >= space.rank:
            return admissible[:k]
    return admissible


@dataclass
class OneParticleTransfer:
    matrix: np.ndarray = field(repr=False)
    sources: list[int]
    symmetry_residual: float
    semigroup_defect: float
    equivariance_residual: float


def one_particle_shift(space: PhysicalSpace, a: Sequence[int], sources: Sequence[int]) -> np.ndarray:
    """Matrix on one-particle coordinates induced by translating the source slices by ``a``."""
    geom = space.geometry
    if a[0] and geom.time_boundary is TimeBoundary.PERIODIC:
        # the time cycle returns the positive half onto itself: a thermal state, no semigroup
        raise UnsupportedRegimeError(messages().t("dynamics.thermal_time", T=geom.T))
    if a[0] and max(sources) + a[0] > geom.T:
        raise MarginError(messages().t("dynamics.margin", t=max(sources) + a[0], T=geom.T))
    y_src = _slice_columns(space, sources)
    y_tgt = _shift_columns(space, sources, a)
    return y_tgt @ np.linalg.pinv(y_src, rcond=space.tol)


def one_particle_transfer(space: PhysicalSpace) -> OneParticleTransfer:
    geom = space.geometry
    sources = source_slices(space)
    step = [1] + [0] * geom.s
    t1 = one_particle_shift(space, step, sources)
    sym = float(np.max(np.abs(t1 - t1.conj().T))) if t1.size else 0.0

    try:
        t2 = one_particle_shift(space, [2] + [0] * geom.s, sources)
        defect = float(np.linalg.norm(t2 - t1 @ t1, 2)) if t1.size else 0.0
    except MarginError:
        defect = float("nan")

    movable = [t for t in geom.admissible_times if t + 1 <= geom.T]
    y = _slice_columns(space, movable)
    y_shift = _shift_columns(space, movable, step)
    equiv = float(np.max(np.abs(y_shift - t1 @ y))) if y.size else 0.0

    return OneParticleTransfer(0.5 * (t1 + t1.conj().T), sources, sym, defect, equiv)


def build_transfer(space: PhysicalSpace) -> SectorOperator:
    one = one_particle_transfer(space)
    mat = space.second_quantize(one.matrix)
    mat = 0.5 * (mat + mat.conj().T)
    w = np.linalg.eigvalsh(mat)
    if w.size and (w[0] < -OP_TOL or w[-1] > 1 + OP_TOL):
        raise ContinuationError(
            messages().t("dynamics.not_contraction", lmin=float(w[0]), lmax=float(w[-1]))
        )
    return SectorOperator(
        space,
        mat,
        OperatorLabel.TRANSFER,
        {
            "one_particle": one.matrix,
            "sources": one.sources,
            "symmetry_residual": one.symmetry_residual,
            "semigroup_defect": one.semigroup_defect,
            "equivariance_residual": one.equivariance_residual,
        },
    )


def hamiltonian(transfer: SectorOperator) -> SectorOperator:
    """H = -log(transfer) sector by sector."""
    out = np.zeros_like(transfer.matrix, dtype=complex)
    for sl in transfer.blocks():
        w, u = sla.eigh(transfer.matrix[sl, sl])
        if w.size and w[0] <= 0:
            raise ContinuationError(
                messages().t("dynamics.transfer_not_positive", spectrum=np.array2string(w, precision=3))
            )
        out[sl, sl] = (u * -np.log(w)) @ u.conj().T
    return SectorOperator(transfer.space, 0.5 * (out + out.conj().T), OperatorLabel.HAMILTONIAN, {})


def one_particle_energies(H: SectorOperator) -> np.ndarray:
    return np.linalg.eigvalsh(H.sector_block(1))


def spatial_shift_unitary(space: PhysicalSpace, j: int) -> np.ndarray:
    geom = space.geometry
    a = [0] * geom.d
    a[j] = 1
    times = geom.admissible_times
    y = _slice_columns(space, times)
    return _shift_columns(space, times, a) @ np.linalg.pinv(y, rcond=space.tol)


def _principal_momentum(phases: np.ndarray) -> np.ndarray:
    p = -np.angle(phases)
    return np.where(p <= -math.pi + 1e-9, math.pi, p)


def momentum(space: PhysicalSpace, j: int) -> SectorOperator:
    """P_j with U_j = exp(-i P_j); U_j translates by +1 in spatial direction j (1-based)."""
    if not 1 <= j <= space.geometry.s:
        raise GeometryError(messages().t("dynamics.bad_direction", j=j, s=space.geometry.s))
    u1 = spatial_shift_unitary(space, j)
    u = space.second_quantize(u1)
    unitarity = float(np.max(np.abs(u.conj().T @ u - np.eye(space.dim))))
    if unitarity > OP_TOL:
        raise GeometryError(messages().t("dynamics.not_unitary", residual=unitarity))
    t, z = sla.schur(u, output="complex")
    p = (z * _principal_momentum(np.diag(t))) @ z.conj().T
    return SectorOperator(
        space,
        0.5 * (p + p.conj().T),
        OperatorLabel.MOMENTUM,
        {"direction": j, "branch": MOMENTUM_BRANCH, "unitary": u, "unitarity_residual": unitarity},
    )


@dataclass
class SpectralReport:
    M_star: float
    analytic_bound: float
    omega_min: float
    commutator_norm: float
    joint_residual: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "M_star": self.M_star,
            "analytic_bound": self.analytic_bound,
            "omega_min": self.omega_min,
            "commutator_norm": self.commutator_norm,
            "joint_residual": self.joint_residual,
            "passed": self.passed,
        }


def joint_spectrum(H: SectorOperator, P_list: Sequence[SectorOperator]) -> tuple[np.ndarray, np.ndarray, float]:
    """Joint eigenvalues (h, p) of commuting H and P_j, and the off-diagonal residual."""
    hs, ps = [], []
    residual = 0.0
    for sl in H.blocks():
        hb = H.matrix[sl, sl]
        pbs = [P.matrix[sl, sl] for P in P_list]
        mix = hb + sum(c * pb for c, pb in zip(_SPLIT, pbs))
        _, z = sla.eigh(mix)
        for op in [hb, *pbs]:
            d = z.conj().T @ op @ z
            residual = max(residual, float(np.max(np.abs(d - np.diag(np.diag(d))))))
        hs.append(np.real(np.diag(z.conj().T @ hb @ z)))
        ps.append(np.column_stack([np.real(np.diag(z.conj().T @ pb @ z)) for pb in pbs]) if pbs else np.zeros((hb.shape[0], 0)))
    return np.concatenate(hs), np.vstack(ps), residual


def verify_spectral_condition(
    H: SectorOperator, P_list: Sequence[SectorOperator], oracle: Optional[DispersionOracle] = None
) -> tuple[float, SpectralReport]:
    comm = 0.0
    for P in P_list:
        comm = max(comm, float(np.max(np.abs(H.matrix @ P.matrix - P.matrix @ H.matrix))))
    if comm > COMMUTATOR_TOL:
        raise UnsupportedRegimeError(messages().t("dynamics.noncommuting", norm=comm))

    h, p, residual = joint_spectrum(H, P_list)
    norms = np.linalg.norm(p, axis=1) if p.shape[1] else np.zeros_like(h)
    m_star = float(np.max(norms / (h + 1.0))) if h.size else 0.0

    s = len(P_list)
    omega_min = oracle.omega_min if oracle is not None else float(np.min(one_particle_energies(H)))
    bound = math.pi * math.sqrt(s) / omega_min
    return m_star, SpectralReport(m_star, bound, omega_min, comm, residual, m_star <= bound + 1e-9)


def _require_site_reflection(space: PhysicalSpace):
    if space.geometry.reflection is not Reflection.SITE:
        raise UnsupportedRegimeError(messages().t("dynamics.needs_site_reflection"))


def _zero_slice(h: TestFunction) -> TestFunction:
    times = h.time_support
    if len(times) > 1:
        raise DomainError(messages().t("lattice.not_time_zero", times=list(times)))
    if not times or times[0] == 0:
        return h
    return TestFunction.on_slice(h.geometry, 0, h.slice_values(times[0]))


def time_zero_field(space: PhysicalSpace, h: TestFunction) -> SectorOperator:
    """phi(0, h); ``h`` on any single slice is read as its t = 0 copy."""
    _require_site_reflection(space)
    v = space.one_particle_coordinates(_zero_slice(h))
    return SectorOperator(
        space,
        space.field(v),
        OperatorLabel.FIELD,
        {"truncation_residual": space.truncation_residual(v)},
    )


def energy_bound(H: SectorOperator, phi: np.ndarray) -> float:
    """Smallest c with c (H + 1) +/- phi >= 0."""
    if not np.any(phi):
        return 0.0
    w = sla.eigh(phi, H.matrix + np.eye(H.matrix.shape[0]), eigvals_only=True)
    return float(np.max(np.abs(w)))


def verify_field_bound(H: SectorOperator, phi_h: SectorOperator, h: TestFunction, r: int) -> tuple[float, float]:
    """Returns (ratio, c) with ratio = c(h) / ||h||_r."""
    c = energy_bound(H, phi_h.matrix)
    norm = sobolev_norm(h, r)
    return (c / norm if norm > 0 else 0.0), c


@dataclass
class SupStability:
    sup_half: float
    sup_full: float
    samples: int
    relative_change: float
    stable: bool

    def to_dict(self) -> dict:
        return {
            "sup_half": self.sup_half,
            "sup_full": self.sup_full,
            "samples": self.samples,
            "relative_change": self.relative_change,
            "stable": self.stable,
        }


def sup_stability(values: Sequence[float], half: int, tol: float = 0.2) -> SupStability:
    first = max(values[:half], default=0.0)
    full = max(values, default=0.0)
    change = (full - first) / first if first > 0 else 0.0
    return SupStability(first, full, len(values), change, math.isfinite(full) and change < tol)


def field_bound_sweep(
    space: PhysicalSpace, H: SectorOperator, r: int, count: int, rng: np.random.Generator
) -> SupStability:
    ratios = []
    for _ in range(2 * count):
        h = random_slice_function(space.geometry, rng, 0)
        ratios.append(verify_field_bound(H, time_zero_field(space, h), h, r)[0])
    return sup_stability(ratios, count)


def _propagator(H: SectorOperator, t: float) -> np.ndarray:
    return apply_function(H, lambda w: np.exp(1j * t * w))


def smeared_field(space: PhysicalSpace, H: SectorOperator, f: TestFunction, imaginary: bool = False) -> np.ndarray:
    """Sum over time slices of the time-zero field of f(t, .) moved to time t.

    Real time uses e^{itH} phi e^{-itH}; imaginary time uses e^{-tH} phi e^{tH}.
    """
    _require_site_reflection(space)
    out = np.zeros((space.dim, space.dim), dtype=complex)
    for t in f.time_support:
        phi = space.field(space.one_particle_coordinates(TestFunction.on_slice(f.geometry, 0, f.slice_values(t))))
        if t == 0:
            out += phi
            continue
        if imaginary:
            left = apply_function(H, lambda w: np.exp(-t * w))
            right = apply_function(H, lambda w: np.exp(t * w))
        else:
            left = _propagator(H, t)
            right = left.conj().T
        out += left @ phi @ right
    return out


@dataclass
class LocalFieldReport:
    resolvent_norm: float
    spacetime_norm: float
    ratio: float
    symmetry_residual: float
    commutator_norm: float
    weyl_commutator: Optional[float]
    weyl_scale: Optional[float]
    imaginary_time_growth: float

    def to_dict(self) -> dict:
        return {
            "resolvent_norm": self.resolvent_norm,
            "spacetime_norm": self.spacetime_norm,
            "ratio": self.ratio,
            "symmetry_residual": self.symmetry_residual,
            "commutator_norm": self.commutator_norm,
            "weyl_commutator": self.weyl_commutator,
            "weyl_scale": self.weyl_scale,
            "imaginary_time_growth": self.imaginary_time_growth,
        }


def _weyl_space(space: PhysicalSpace, extra: int = 8, max_dim: int = 2000) -> PhysicalSpace:
    while extra > 1 and fock_dimension(space.rank, space.n_max + extra) > max_dim:
        extra -= 1
    return space.with_n_max(space.n_max + extra)


def weyl_commutator(
    space: PhysicalSpace, H: SectorOperator, f: TestFunction, g: TestFunction, size: float = 0.3
) -> tuple[float, float]:
    """||[e^{i phi(f)}, e^{i phi(g)}]|| on degree <= 1, evaluated in an enlarged truncation.

    f and g are rescaled so the summed one-particle norms are at most ``size``.
    Returns (commutator norm, scale used).
    """
    big = _weyl_space(space)
    h1 = H.sector_block(1)
    big_H = SectorOperator(big, big.dgamma(h1), OperatorLabel.HAMILTONIAN)

    def weight(u: TestFunction) -> float:
        return sum(
            float(np.linalg.norm(space.one_particle_coordinates(TestFunction.on_slice(u.geometry, 0, u.slice_values(t)))))
            for t in u.time_support
        )

    largest = max(weight(f), weight(g))
    scale = size / largest if largest > 0 else 1.0
    wf = _unitary_exp(smeared_field(big, big_H, f * scale))
    wg = _unitary_exp(smeared_field(big, big_H, g * scale))
    low = big.low_degree(1)
    comm = (wf @ wg - wg @ wf)[np.ix_(low, low)]
    return float(np.linalg.norm(comm, 2)), scale


def _unitary_exp(a: np.ndarray) -> np.ndarray:
    w, u = sla.eigh(0.5 * (a + a.conj().T))
    return (u * np.exp(1j * w)) @ u.conj().T


def verify_local_field_ops(
    space: PhysicalSpace,
    H: SectorOperator,
    f: TestFunction,
    g: TestFunction,
    r: int,
    weyl: bool = True,
) -> LocalFieldReport:
    phi_f = smeared_field(space, H, f)
    phi_g = smeared_field(space, H, g)
    resolvent = np.linalg.inv(H.matrix + np.eye(space.dim))
    res_norm = float(np.linalg.norm(phi_f @ resolvent, 2))
    norm = spacetime_norm(f, r)

    # degree <= N-1 is where the truncated product is exact
    exact = space.low_degree(space.n_max - 1)
    comm = (phi_f @ phi_g - phi_g @ phi_f)[:, exact]
    comm_norm = float(np.linalg.norm(comm, 2)) if comm.size else 0.0

    w_comm = w_scale = None
    if weyl and comm_norm < OP_TOL:
        w_comm, w_scale = weyl_commutator(space, H, f, g)

    imag = smeared_field(space, H, f, imaginary=True)
    real_norm = float(np.linalg.norm(phi_f, 2))
    growth = float(np.linalg.norm(imag, 2)) / real_norm if real_norm > 0 else 0.0

    return LocalFieldReport(
        resolvent_norm=res_norm,
        spacetime_norm=norm,
        ratio=res_norm / norm if norm > 0 else 0.0,
        symmetry_residual=float(np.max(np.abs(phi_f - phi_f.conj().T))),
        commutator_norm=comm_norm,
        weyl_commutator=w_comm,
        weyl_scale=w_scale,
        imaginary_time_growth=growth,
    )


def local_field_sweep(
    space: PhysicalSpace, H: SectorOperator, r: int, count: int, rng: np.random.Generator
) -> SupStability:
    times = [t for t in space.geometry.admissible_times if t <= max(1, space.geometry.T // 2)]
    resolvent = np.linalg.inv(H.matrix + np.eye(space.dim))
    ratios = []
    for _ in range(2 * count):
        f = random_test_function(space.geometry, rng, times)
        phi = smeared_field(space, H, f)
        norm = spacetime_norm(f, r)
        ratios.append(float(np.linalg.norm(phi @ resolvent, 2)) / norm if norm > 0 else 0.0)
    return sup_stability(ratios, count)


def dispersion_error(space: PhysicalSpace, H: SectorOperator) -> float:
    oracle = DispersionOracle(space.geometry, space.cov.mass)
    measured = one_particle_energies(H)
    expected = oracle.one_particle_energies()
    if measured.shape != expected.shape:
        return float("inf")
    return float(np.max(np.abs(measured - expected)))


@dataclass(frozen=True, eq=False)
class QuantumDynamics:
    """Transfer, Hamiltonian and momenta of one physical space."""

    space: PhysicalSpace
    transfer: SectorOperator
    H: SectorOperator
    momenta: tuple[SectorOperator, ...]

    @classmethod
    def build(cls, space: PhysicalSpace) -> "QuantumDynamics":
        transfer = build_transfer(space)
        H = hamiltonian(transfer)
        P = tuple(momentum(space, j) for j in range(1, space.geometry.s + 1))
        return cls(space, transfer, H, P)

    def heat(self, t: complex) -> np.ndarray:
        """e^{-tH} for real or complex t."""
        return apply_function(self.H, lambda w: np.exp(-t * w))

    def translation(self, x: Sequence[int]) -> np.ndarray:
        """U(x) = exp(-i x.P), taken as powers of the lattice shift unitaries."""
        out = np.eye(self.space.dim, dtype=complex)
        for xj, P in zip(x, self.momenta):
            out = out @ np.linalg.matrix_power(P.notes["unitary"], int(xj) % self.space.geometry.spatial_sizes[P.notes["direction"] - 1])
        return out


def dispersion_study(geometry: LatticeGeometry, mass: float, extents: Sequence[int] = (4, 6, 8)) -> dict[int, float]:
    """One-particle dispersion error of the transfer built at each time extent T."""
    oracle = DispersionOracle(geometry, mass).one_particle_energies()
    out = {}
    for T in extents:
        geom = LatticeGeometry.from_dict(dict(geometry.to_dict(), T=T))
        space = PhysicalSpace(build_covariance(geom, mass), 1)
        w = np.linalg.eigvalsh(one_particle_transfer(space).matrix)
        if w.shape != oracle.shape or np.any(w <= 0):
            out[T] = float("inf")
            continue
        out[T] = float(np.max(np.abs(np.sort(-np.log(w)) - oracle)))
    return out
