"""Laplace-domain decoherence function and its two inversion routes.

``build_rational_F`` clears the kernel denominators to obtain a strictly
proper rational function, which ``invert_rational`` inverts exactly by
roots and residues.  ``contour_invert`` is a generic deformed-contour
quadrature used as an independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.linalg import expm

from .closed_form import RtnPairParams
from .errors import NumericalFailureError
from .noise_kernels import (
    Composite,
    Exponential,
    Memoryless,
    ModulatedCosine,
    kernel_laplace,
)

CLUSTER_RTOL = 1e-7
GROUP_RTOL = 1e-2
COMMON_ROOT_RTOL = 1e-9
CONTOUR_CHECK_TOL = 1e-6

BACKENDS = ("closed", "rational", "contour", "volterra", "mc")


@dataclass
class DecoherenceSeries:
    """Sampled decoherence function with its provenance."""

    times: np.ndarray
    values: np.ndarray
    backend: str
    stderr: Optional[np.ndarray] = None  # (n, 2): real and imaginary parts
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.times.shape != self.values.shape:
            raise ValueError("times and values must have the same shape")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend tag {self.backend!r}")


@dataclass(frozen=True)
class ComplexRational:
    """``num(p) / den(p)`` with ascending complex coefficients and monic den."""

    num: tuple
    den: tuple

    def __post_init__(self):
        num = np.trim_zeros(np.asarray(self.num, dtype=complex), "b")
        den = np.trim_zeros(np.asarray(self.den, dtype=complex), "b")
        if den.size == 0:
            raise ValueError("zero denominator")
        if num.size == 0:
            num = np.zeros(1, dtype=complex)
        num, den = num / den[-1], den / den[-1]
        if num.size >= den.size:
            raise ValueError("rational function must be strictly proper")
        object.__setattr__(self, "num", tuple(num))
        object.__setattr__(self, "den", tuple(den))

    @property
    def num_coeffs(self) -> np.ndarray:
        return np.array(self.num, dtype=complex)

    @property
    def den_coeffs(self) -> np.ndarray:
        return np.array(self.den, dtype=complex)

    def __call__(self, p):
        return P.polyval(p, self.num_coeffs) / P.polyval(p, self.den_coeffs)

    def allclose(self, other: "ComplexRational", atol: float = 1e-12) -> bool:
        if len(self.num) != len(other.num) or len(self.den) != len(other.den):
            return False
        return bool(
            np.allclose(self.num_coeffs, other.num_coeffs, rtol=0, atol=atol)
            and np.allclose(self.den_coeffs, other.den_coeffs, rtol=0, atol=atol)
        )


def build_F_laplace(params: RtnPairParams) -> Callable:
    """Evaluator for the Laplace-domain decoherence function."""
    nu, lam, a, k = params.nu, params.lam, params.a, params.kernel

    def F(p):
        z = np.asarray(p, dtype=complex)
        inner = z + 2.0 * lam * kernel_laplace(k, z)
        out = (inner + 1j * a * nu) / (z * inner + nu * nu)
        return complex(out) if out.ndim == 0 else out

    return F


def split_F_laplace(params: RtnPairParams) -> tuple[Callable, Callable]:
    """Real-coefficient pieces ``F0`` and ``G`` with ``F = F0 + i a nu G``."""
    nu, lam, k = params.nu, params.lam, params.kernel

    def F0(p):
        inner = p + 2.0 * lam * kernel_laplace(k, p)
        return inner / (p * inner + nu * nu)

    def G(p):
        inner = p + 2.0 * lam * kernel_laplace(k, p)
        return 1.0 / (p * inner + nu * nu)

    return F0, G


def polyroots(c) -> np.ndarray:
    """Roots of an ascending-coefficient polynomial (companion eigenvalues)."""
    c = np.asarray(c, dtype=complex)
    if c.size <= 1:
        return np.zeros(0, dtype=complex)
    roots = P.polyroots(c)
    if not np.all(np.isfinite(roots)):
        raise NumericalFailureError(f"root finding failed for coefficients {c}")
    return roots


def reduce_rational(num, den, rtol: float = COMMON_ROOT_RTOL) -> ComplexRational:
    """Cancel common roots of ``num`` and ``den`` (within ``rtol``).

    Surviving factors are rebuilt from their roots; synthetic division by a
    large, slightly perturbed root would smear its error over the small
    coefficients.
    """
    num = np.trim_zeros(np.asarray(num, dtype=complex), "b")
    den = np.trim_zeros(np.asarray(den, dtype=complex), "b")
    if num.size <= 1:
        return ComplexRational(tuple(num), tuple(den))
    rn, rd = list(polyroots(num)), list(polyroots(den))
    cancelled = False
    while rn and rd:
        gap = np.abs(np.array(rn)[:, None] - np.array(rd)[None, :])
        i, j = np.unravel_index(np.argmin(gap), gap.shape)
        if gap[i, j] >= rtol * (1.0 + abs(0.5 * (rn[i] + rd[j]))):
            break
        rn.pop(i)
        rd.pop(j)
        cancelled = True
    if cancelled:
        num = num[-1] * P.polyfromroots(rn) if rn else num[-1:]
        den = den[-1] * P.polyfromroots(rd)
    return ComplexRational(tuple(num), tuple(den))


def build_rational_F(params: RtnPairParams) -> ComplexRational:
    """Laplace-domain decoherence function as a reduced rational function."""
    nu, lam, a, k = params.nu, params.lam, params.a, params.kernel
    ian = 1j * a * nu
    if isinstance(k, Memoryless):
        num = [2 * lam + ian, 1.0]
        den = [nu * nu, 2 * lam, 1.0]
    elif isinstance(k, (Exponential, Composite)):
        w = k.w if isinstance(k, Composite) else 0.0
        kap = k.kappa
        num = [2 * lam * kap + ian * kap, kap + 2 * lam * w + ian, 1.0]
        den = [nu * nu * kap, 2 * lam * kap + nu * nu, kap + 2 * lam * w, 1.0]
    elif isinstance(k, ModulatedCosine):
        kap, om = k.kappa, k.Omega
        Q = np.array([kap * kap + om * om, 2 * kap, 1.0], dtype=complex)
        lin = np.array([2 * lam * kap * kap, 2 * lam * kap], dtype=complex)
        num = P.polyadd(P.polymul([ian, 1.0], Q), lin)
        pQ = P.polymulx(Q)
        den = P.polyadd(P.polymulx(P.polyadd(pQ, lin)), nu * nu * Q)
    else:
        raise TypeError(f"not a memory kernel: {k!r}")
    return reduce_rational(num, den)


def _cluster(roots: np.ndarray, rtol: float) -> list[list[int]]:
    # single-linkage grouping of roots closer than rtol * (1 + |r|)
    groups = [[i] for i in range(roots.size)]
    merged = True
    while merged:
        merged = False
        for x in range(len(groups)):
            for y in range(x + 1, len(groups)):
                gap = np.min(np.abs(roots[groups[x]][:, None] - roots[groups[y]][None, :]))
                scale = 1.0 + np.max(np.abs(roots[groups[x] + groups[y]]))
                if gap < rtol * scale:
                    groups[x] += groups.pop(y)
                    merged = True
                    break
            if merged:
                break
    return groups


def _bidiagonal(nodes: np.ndarray) -> np.ndarray:
    m = nodes.size
    return np.diag(nodes) + np.diag(np.ones(m - 1, dtype=complex), 1)


def _matpolyval(J: np.ndarray, c: np.ndarray) -> np.ndarray:
    out = np.zeros_like(J)
    eye = np.eye(J.shape[0], dtype=complex)
    for coef in c[::-1]:
        out = out @ J + coef * eye
    return out


@dataclass(frozen=True)
class RootGroup:
    """Roots whose partial fractions are combined into one divided difference.

    The group contributes ``[h exp(. t)][nodes]``, the divided difference over
    ``nodes`` of ``h(p) exp(p t)`` with ``h = num / (den / prod(p - node))``.
    Repeated entries in ``nodes`` make this the confluent (polynomial in t)
    formula; distinct but close entries avoid the cancellation between large
    individual residues.
    """

    nodes: tuple
    h_matrix: np.ndarray

    @property
    def residue_sum(self) -> complex:
        return complex(self.h_matrix[0, -1])

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        J = _bidiagonal(np.array(self.nodes, dtype=complex))
        if J.shape[0] == 1:
            return self.h_matrix[0, 0] * np.exp(self.nodes[0] * t)
        out = np.empty(t.shape, dtype=complex)
        for i, ti in enumerate(t.flat):
            out.flat[i] = (self.h_matrix @ expm(J * ti))[0, -1]
        return out


def root_groups(
    F: ComplexRational,
    repeat_rtol: float = CLUSTER_RTOL,
    group_rtol: float = GROUP_RTOL,
) -> list[RootGroup]:
    """Split the poles of ``F`` into groups for stable inversion.

    Roots within ``repeat_rtol`` are treated as one repeated root (replaced
    by their mean); groups of roots within ``group_rtol`` share a divided
    difference.
    """
    num, den = F.num_coeffs, F.den_coeffs
    roots = polyroots(den)
    for cl in _cluster(roots, repeat_rtol):
        roots[cl] = roots[cl].mean()
    groups = []
    for cl in _cluster(roots, group_rtol):
        nodes = roots[cl]
        J = _bidiagonal(nodes)
        # den is monic: its cofactor at the group is the product over the other roots
        q = np.eye(len(nodes), dtype=complex)
        for r in np.delete(roots, cl):
            q = q @ (J - r * np.eye(len(nodes)))
        h = _matpolyval(J, num) @ np.linalg.inv(q)
        groups.append(RootGroup(tuple(complex(r) for r in nodes), h))
    return groups


def invert_rational(F: ComplexRational, times) -> DecoherenceSeries:
    """Exact inverse Laplace transform of a strictly proper rational function."""
    t = np.asarray(times, dtype=float)
    groups = root_groups(F)
    out = np.zeros(t.shape, dtype=complex)
    with np.errstate(under="ignore"):
        for g in groups:
            out += g.evaluate(t)
    if not np.all(np.isfinite(out)):
        raise NumericalFailureError(f"non-finite inverse transform; poles {[g.nodes for g in groups]}")
    roots = [r for g in groups for r in g.nodes]
    return DecoherenceSeries(
        t,
        out,
        "rational",
        info={
            "roots": roots,
            "residue_sum": complex(sum(g.residue_sum for g in groups)),
            "max_root_real": max((r.real for r in roots), default=-np.inf),
        },
    )


# Cotangent contour z = S(sigma + mu th cot(alpha th) + i nu th), th in (-pi, pi).
# sigma, mu, alpha follow Weideman's optimized Talbot contour; nu is raised
# from 0.2645 so the contour also encloses the weakly damped oscillatory
# poles of underdamped noise and modulated kernels.
_CT_SIGMA, _CT_MU, _CT_NU, _CT_ALPHA = -0.6122, 0.5017, 1.0, 0.6407
_SIZE_PER_NODE = 0.75
# roundoff is ~ 1e-16 exp(0.17 size): keep the main contour below ~1e-9
# and the enlarged check contour below ~1e-7
_SIZE_MAX, _CHECK_SIZE_MAX = 96.0, 120.0
# contour size per unit of (bandwidth * t), tuned against a high-precision oracle
_REACH_PER_BANDWIDTH = 0.8


def _talbot_real(F: Callable, t: float, nodes: int, size: float) -> float:
    """Inverse transform at one time of a function with a real original.

    ``size / t`` scales the contour; roundoff grows like ``exp(0.17 size)``.
    """
    # midpoints on the upper half of the contour; conjugate symmetry gives the rest
    theta = (np.arange(nodes) + 0.5) * np.pi / nodes
    scale = size / t
    at = _CT_ALPHA * theta
    cot = np.cos(at) / np.sin(at)
    z = scale * (_CT_SIGMA + _CT_MU * theta * cot + 1j * _CT_NU * theta)
    dz = scale * (
        _CT_MU * (cot - _CT_ALPHA * theta / np.sin(at) ** 2) + 1j * _CT_NU
    )
    vals = np.exp(z * t) * F(z) * dz
    return float(np.sum(vals).imag / nodes)


def _contour_values(parts, times: np.ndarray, nodes, sizes) -> np.ndarray:
    out = np.empty(times.shape, dtype=complex)
    for i, t in enumerate(times):
        if t == 0.0:
            out[i] = 1.0
            continue
        out[i] = sum(w * _talbot_real(f, t, int(nodes[i]), sizes[i]) for w, f in parts)
    return out


def contour_invert(F, times, nodes: int = 64, check: bool = True, bandwidth: float = 0.0) -> DecoherenceSeries:
    """Numerical inverse Laplace transform on a deformed Bromwich contour.

    ``F`` is either a callable with a real original, or a sequence of
    ``(weight, callable)`` pairs whose originals are real and which are
    combined with complex weights.  This is how complex originals are
    handled: see :func:`contour_decoherence`.  ``t = 0`` returns the known
    initial value 1.

    ``bandwidth`` is an estimate of the largest imaginary part among the
    singularities of ``F``.  Once ``0.8 * bandwidth * t`` exceeds the
    default contour size the contour is enlarged to match (with
    proportionally more nodes), up to a size where roundoff stays near
    1e-9.  Weakly damped singularities with ``bandwidth * t`` well above
    ~100 therefore cannot be resolved in double precision; use the rational
    backend there.

    With ``check`` the result is recomputed with twice as many nodes on an
    enlarged contour, so a singularity missed by the first contour but
    enclosed by the second shows up as a disagreement; above 1e-6 this
    raises.  Singularities outside both contours go unnoticed.
    """
    parts = [(1.0, F)] if callable(F) else list(F)
    t = np.asarray(times, dtype=float)
    if np.any(t < 0):
        raise ValueError("times must be non-negative")
    base = _SIZE_PER_NODE * nodes
    sizes = np.maximum(base, np.minimum(_REACH_PER_BANDWIDTH * bandwidth * t, _SIZE_MAX))
    counts = np.maximum(nodes, np.ceil(sizes / _SIZE_PER_NODE)).astype(int)
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        values = _contour_values(parts, t, counts, sizes)
        if not np.all(np.isfinite(values)):
            raise NumericalFailureError("contour quadrature produced non-finite values")
        info = {"nodes": int(counts.max(initial=nodes))}
        if check:
            check_sizes = np.minimum(1.5 * sizes, np.maximum(sizes, _CHECK_SIZE_MAX))
            fine = _contour_values(parts, t, 2 * counts, check_sizes)
            gap = float(np.max(np.abs(fine - values))) if t.size else 0.0
            info["check_nodes"] = 2 * info["nodes"]
            info["check_gap"] = gap
            if not gap <= CONTOUR_CHECK_TOL:
                worst = int(np.argmax(np.abs(fine - values)))
                raise NumericalFailureError(
                    f"contour inversion unconverged: {counts[worst]} vs {2 * counts[worst]} nodes "
                    f"differ by {gap:.3e} at t={t[worst]:.6g}"
                )
    return DecoherenceSeries(t, values, "contour", info=info)


def rational_decoherence(params: RtnPairParams, times) -> DecoherenceSeries:
    return invert_rational(build_rational_F(params), times)


def singularity_bandwidth(params: RtnPairParams) -> float:
    """Heuristic bound on ``|Im p|`` over the singularities of the transform.

    Noise amplitude plus modulation frequency plus the frequency of the
    kernel-dressed switching mode when that mode is underdamped, with a
    25% margin for their coupling.
    """
    nu, lam, k = params.nu, params.lam, params.kernel
    if isinstance(k, Memoryless):
        return 1.25 * nu
    w = k.w if isinstance(k, Composite) else 0.0
    omega = k.Omega if isinstance(k, ModulatedCosine) else 0.0
    dressed = 2.0 * lam * k.kappa - 0.25 * (k.kappa + 2.0 * lam * w) ** 2
    return 1.25 * (nu + omega + math.sqrt(max(dressed, 0.0)))


def contour_decoherence(params: RtnPairParams, times, nodes: int = 64) -> DecoherenceSeries:
    F0, G = split_F_laplace(params)
    parts = [(1.0, F0)]
    if params.a != 0.0 and params.nu != 0.0:
        parts.append((1j * params.a * params.nu, G))
    return contour_invert(parts, times, nodes, bandwidth=singularity_bandwidth(params))
