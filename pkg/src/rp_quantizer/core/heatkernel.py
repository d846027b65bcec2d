"""Heat-kernel regularised imaginary-time fields, their derivatives and complex-time continuation."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import ComplexityGuardError, DomainError, MarginError, OutsideDomainError
from .dynamics import OperatorLabel, QuantumDynamics, SectorOperator, time_zero_field
from .i18n import messages
from .lattice import TestFunction
from .rp_quantize import EuclideanVector

DERIVATIVE_CAP = 6
GAMMA_CAP = 20
TAYLOR_ORDER = 12
FD_STEPS = (1e-3, 5e-4)
LEMMA_TOL = 1e-9


@dataclass(frozen=True)
class MultiIndex:
    k: tuple[int, ...]

    @property
    def order(self) -> int:
        return sum(self.k)

    @property
    def factorial(self) -> int:
        return math.prod(math.factorial(v) for v in self.k)

    def raised(self, j: int) -> "MultiIndex":
        k = list(self.k)
        k[j] += 1
        return MultiIndex(tuple(k))

    @staticmethod
    def up_to(d: int, cap: int) -> list["MultiIndex"]:
        out = [MultiIndex(k) for k in itertools.product(range(cap + 1), repeat=d) if sum(k) <= cap]
        return sorted(out, key=lambda m: (m.order, m.k))


@dataclass(frozen=True, eq=False)
class RegularizedField:
    epsilon: float
    x: tuple[int, ...]
    t: float
    matrix: SectorOperator
    # phi(0, delta_x) before time translation and sandwiching
    base: np.ndarray = field(repr=False)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix.matrix, 2))


def _point_field(dyn: QuantumDynamics, x: Sequence[int]) -> np.ndarray:
    """phi(0, delta_x) as U(x) phi(0, delta_0) U(x)^-1."""
    geom = dyn.space.geometry
    phi0 = time_zero_field(dyn.space, TestFunction.delta(geom, (0,) + (0,) * geom.s)).matrix
    u = dyn.translation(x)
    return u @ phi0 @ u.conj().T


def regularized_field(dyn: QuantumDynamics, x: Sequence[float], eps: float) -> RegularizedField:
    """e^{-eps H} e^{-tH} U phi(0, delta_0) U^-1 e^{tH} e^{-eps H} at x = (t, x1, ..., xs)."""
    if not eps > 0:
        raise DomainError(messages().t("heatkernel.bad_epsilon", eps=eps))
    t, spatial = float(x[0]), tuple(int(v) for v in x[1:])
    if not 0 <= t <= eps:
        raise MarginError(messages().t("heatkernel.time_margin", t=t, eps=eps))
    base = _point_field(dyn, spatial)
    mat = dyn.heat(eps + t) @ base @ dyn.heat(eps - t)
    op = SectorOperator(dyn.space, mat, OperatorLabel.REGULARIZED_FIELD, {"epsilon": eps, "x": (t,) + spatial})
    return RegularizedField(eps, spatial, t, op, base)


def composed_form(dyn: QuantumDynamics, field_: RegularizedField) -> np.ndarray:
    """The definition written out factor by factor, for cross-checks."""
    outer = dyn.heat(field_.epsilon)
    inner = dyn.heat(field_.t) @ field_.base @ dyn.heat(-field_.t)
    return outer @ inner @ outer


def ad(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def field_derivative(
    dyn: QuantumDynamics, field_: RegularizedField, k: MultiIndex, cap: int = DERIVATIVE_CAP
) -> SectorOperator:
    """D^k of the regularised field through nested commutators with H and P_j."""
    if k.order > cap:
        raise ComplexityGuardError(messages().t("heatkernel.derivative_cap", order=k.order, cap=cap))
    if len(k.k) != dyn.space.geometry.d:
        raise DomainError(messages().t("heatkernel.index_length", got=len(k.k), d=dyn.space.geometry.d))
    gens = [dyn.H.matrix] + [P.matrix for P in dyn.momenta]
    inner = dyn.heat(field_.t) @ field_.base @ dyn.heat(-field_.t)
    for gen, power in zip(gens, k.k):
        for _ in range(power):
            inner = ad(gen, inner)
    prefactor = (-1) ** k.k[0] * (-1j) ** (k.order - k.k[0])
    outer = dyn.heat(field_.epsilon)
    return SectorOperator(dyn.space, prefactor * (outer @ inner @ outer), OperatorLabel.OTHER, {"k": k.k})


def time_difference(dyn: QuantumDynamics, field_: RegularizedField, steps: Sequence[float] = FD_STEPS) -> np.ndarray:
    """Richardson-extrapolated difference in t of the regularised field.

    Central inside [0, epsilon]; the second order one-sided stencil at either end.
    """
    t, eps = field_.t, field_.epsilon
    widest = max(steps)
    if t - widest >= 0 and t + widest <= eps:
        stencil = ((-1, -0.5), (1, 0.5))
    elif t + 2 * widest <= eps:
        stencil = ((0, -1.5), (1, 2.0), (2, -0.5))
    else:
        stencil = ((0, 1.5), (-1, -2.0), (-2, 0.5))

    def difference(delta: float) -> np.ndarray:
        out = 0.0
        for offset, weight in stencil:
            out = out + weight * regularized_field(dyn, (t + offset * delta,) + field_.x, eps).matrix.matrix
        return out / delta

    coarse, fine = (difference(s) for s in steps)
    ratio = (steps[0] / steps[1]) ** 2
    return (ratio * fine - coarse) / (ratio - 1)


@dataclass
class AnalyticityReport:
    epsilon: float
    M_used: float
    M1_fit: Optional[float]
    gamma_fit: Optional[int]
    gamma_proof: int
    max_k_checked: int
    table: list[dict]
    radius_estimate: float
    fit_failed: bool = False

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "M_used": self.M_used,
            "M1_fit": self.M1_fit,
            "gamma_fit": self.gamma_fit,
            "gamma_proof": self.gamma_proof,
            "max_k_checked": self.max_k_checked,
            "radius_estimate": self.radius_estimate,
            "fit_failed": self.fit_failed,
            "table": self.table,
        }

    def bound(self, order: int) -> float:
        rate = 4 * self.M_used / self.epsilon
        return self.M1_fit * rate ** (order + self.gamma_fit) * math.factorial(order + self.gamma_fit)


def measure_derivatives(
    dyn: QuantumDynamics, eps: float, cap: int, x: Optional[Sequence[float]] = None
) -> dict[MultiIndex, float]:
    geom = dyn.space.geometry
    x = x if x is not None else (0.0,) + (0,) * geom.s
    field_ = regularized_field(dyn, x, eps)
    return {
        k: float(np.linalg.norm(field_derivative(dyn, field_, k).matrix, 2))
        for k in MultiIndex.up_to(geom.d, cap)
    }


def _envelope_holds(norms: dict[MultiIndex, float], rate: float, gamma: int, d: int) -> bool:
    for k, n_k in norms.items():
        for j in range(d):
            up = k.raised(j)
            if up in norms and norms[up] > rate * (k.order + gamma + 1) * n_k * (1 + 1e-12):
                return False
    return True


def verify_derivative_bound(
    dyn: QuantumDynamics, eps: float, M: float, K: int, r: int = 1, x: Optional[Sequence[float]] = None
) -> AnalyticityReport:
    geom = dyn.space.geometry
    m_used = max(M, 1.0)
    if K > DERIVATIVE_CAP:
        raise ComplexityGuardError(messages().t("heatkernel.derivative_cap", order=K, cap=DERIVATIVE_CAP))
    rate = 4 * m_used / eps
    norms = measure_derivatives(dyn, eps, K, x)

    gamma = next((g for g in range(GAMMA_CAP + 1) if _envelope_holds(norms, rate, g, geom.d)), None)
    m1 = None
    table = []
    if gamma is not None:
        m1 = max(n / (rate ** (k.order + gamma) * math.factorial(k.order + gamma)) for k, n in norms.items())
        for k, n in norms.items():
            bound = m1 * rate ** (k.order + gamma) * math.factorial(k.order + gamma)
            table.append({"k": list(k.k), "norm": n, "bound": bound, "margin": bound - n})
    else:
        table = [{"k": list(k.k), "norm": n, "bound": None, "margin": None} for k, n in norms.items()]

    pure = [(k.order, n) for k, n in norms.items() if k.order == k.k[0] and k.order > 0 and n > 0]
    radius = min(((math.factorial(o) / n) ** (1.0 / o) for o, n in pure), default=math.inf)

    return AnalyticityReport(
        epsilon=eps,
        M_used=m_used,
        M1_fit=m1,
        gamma_fit=gamma,
        gamma_proof=2 * r + geom.d + 2,
        max_k_checked=K,
        table=table,
        radius_estimate=radius,
        fit_failed=gamma is None,
    )


@dataclass
class ContinuationResult:
    exact: complex
    taylor: complex
    error: float


def _time_derivatives(dyn: QuantumDynamics, spatial: Sequence[int], eps: float, A: np.ndarray, B: np.ndarray, order: int) -> list[complex]:
    """<A, D^{(k,0)} phi_eps(0, x) B> for k = 0..order."""
    outer = dyn.heat(eps)
    inner = _point_field(dyn, spatial)
    left, right = outer.conj().T @ A, outer @ B
    out = []
    for k in range(order + 1):
        out.append(complex(np.vdot(left, ((-1) ** k) * inner @ right)))
        inner = ad(dyn.H.matrix, inner)
    return out


def continue_complex(
    dyn: QuantumDynamics,
    A: np.ndarray,
    B: np.ndarray,
    x: Sequence[int],
    eps: float,
    z0: complex,
    M: float,
    allow_outside: bool = False,
    order: int = TAYLOR_ORDER,
) -> ContinuationResult:
    """F(z0) = <A, e^{-eps H} e^{-z0 H} phi(0, x) e^{z0 H} e^{-eps H} B>, exactly and by Taylor series."""
    rho = eps / (4 * max(M, 1.0))
    if abs(z0) >= rho and not allow_outside:
        raise OutsideDomainError(messages().t("heatkernel.outside_disk", z=abs(z0), rho=rho))
    base = _point_field(dyn, x)
    exact = complex(np.vdot(A, dyn.heat(eps + z0) @ base @ dyn.heat(eps - z0) @ B))
    coeffs = _time_derivatives(dyn, x, eps, A, B, order)
    taylor = sum(c * z0**k / math.factorial(k) for k, c in enumerate(coeffs))
    return ContinuationResult(exact, complex(taylor), abs(exact - taylor))


@dataclass
class LemmaReport:
    rho: float
    samples: int
    max_ratio_to_majorant: float
    normalized_sup: float
    taylor_error: float
    relative_taylor_error: float
    measured_radius: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "samples": self.samples,
            "max_ratio_to_majorant": self.max_ratio_to_majorant,
            "normalized_sup": self.normalized_sup,
            "taylor_error": self.taylor_error,
            "relative_taylor_error": self.relative_taylor_error,
            "measured_radius": self.measured_radius,
            "passed": self.passed,
        }


def convergence_radius(
    dyn: QuantumDynamics, A: np.ndarray, B: np.ndarray, x: Sequence[int], eps: float, rho: float,
    order: int = TAYLOR_ORDER, steps: int = 12, angles: int = 8, tol: float = 1e-8,
) -> float:
    """Largest grid radius rho*j/8 at which the last Taylor term stays below tol*|A||B|."""
    coeffs = _time_derivatives(dyn, x, eps, A, B, order)
    scale = tol * np.linalg.norm(A) * np.linalg.norm(B)
    best = 0.0
    for j in range(1, steps + 1):
        radius = rho * j / 8
        worst = 0.0
        for a in range(angles):
            z = radius * np.exp(2j * math.pi * a / angles)
            worst = max(worst, abs(coeffs[order] * z**order / math.factorial(order)))
        if worst > scale:
            break
        best = radius
    return best


def verify_lemma(
    dyn: QuantumDynamics,
    report: AnalyticityReport,
    A: np.ndarray,
    B: np.ndarray,
    x: Sequence[int],
    samples: int,
    rng: np.random.Generator,
) -> LemmaReport:
    eps, m = report.epsilon, report.M_used
    rho = eps / (4 * m)
    norm_ab = float(np.linalg.norm(A) * np.linalg.norm(B))
    gamma = report.gamma_fit or 0
    m1 = report.M1_fit or 0.0

    taylor = continue_complex(dyn, A, B, x, eps, 1j * eps / (8 * m), m)
    rel = taylor.error / abs(taylor.exact) if abs(taylor.exact) > 0 else taylor.error

    worst = 0.0
    sup_f = 0.0
    for _ in range(samples):
        z = rho * 0.95 * math.sqrt(rng.random()) * np.exp(2j * math.pi * rng.random())
        value = abs(continue_complex(dyn, A, B, x, eps, z, m).exact)
        q = 4 * m * abs(z) / eps
        majorant = m1 * (4 * m / eps) ** gamma * math.factorial(gamma) * (1 - q) ** (-(gamma + 1)) * norm_ab
        worst = max(worst, value / majorant if majorant > 0 else math.inf)
        sup_f = max(sup_f, value)

    radius = convergence_radius(dyn, A, B, x, eps, rho)
    # |F(z)| <= (M1 / eps^gamma) |A| |B| with the fitted constants
    normalized_sup = sup_f * eps**gamma / norm_ab if norm_ab > 0 else 0.0
    passed = (
        not report.fit_failed
        and normalized_sup <= m1 * (1 + LEMMA_TOL)
        and rel <= 1e-8
        and radius >= rho * (1 - 1e-12)
    )
    return LemmaReport(rho, samples, worst, normalized_sup, taylor.error, rel, radius, passed)


@dataclass
class AntiTimeOrderedResult:
    vector: np.ndarray
    coincident_times: bool
    equivariance_residual: Optional[float]


def antitimeordered_vector(
    dyn: QuantumDynamics, points: Sequence[Sequence[int]], check: bool = True
) -> AntiTimeOrderedResult:
    """phi_I(x_1)...phi_I(x_n) Omega with t_1 <= ... <= t_n."""
    space = dyn.space
    geom = space.geometry
    if len(points) > space.n_max:
        raise DomainError(messages().t("fock.degree_exceeds_truncation", degree=len(points), n_max=space.n_max))
    for p in points:
        if not geom.admissible_time(p[0]):
            raise MarginError(messages().t("heatkernel.point_margin", site=tuple(p)))

    ordered = sorted((tuple(p) for p in points), key=lambda p: p[0])
    times = [p[0] for p in ordered]
    coincident = len(set(times)) < len(times)

    v = space.vacuum()
    for j in range(len(ordered) - 1, -1, -1):
        t, spatial = ordered[j][0], ordered[j][1:]
        v = _point_field(dyn, spatial) @ v
        previous = ordered[j - 1][0] if j > 0 else 0
        v = dyn.heat(t - previous) @ v

    residual = None
    if check:
        target = space.quantize(EuclideanVector.of_sites(geom, ordered))
        residual = float(np.max(np.abs(v - target))) if v.size else 0.0
    return AntiTimeOrderedResult(v, coincident, residual)
