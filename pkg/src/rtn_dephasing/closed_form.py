"""Exact decoherence function for memoryless telegraph noise.

The three branches (overdamped, critical, underdamped) share the prefactor
``exp(-lambda t)``.  Near the critical point ``sinh(beta t)/beta`` and
``sin(beta t)/beta`` are evaluated by their Taylor series so that the
formula stays continuous across ``nu = lambda``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import BackendMismatchError, ParameterError
from .noise_kernels import Memoryless, MemoryKernel, is_memoryless

CRITICAL_RTOL = 1e-9
SERIES_CUTOFF = 1e-6


@dataclass(frozen=True)
class RtnPairParams:
    """Telegraph noise acting on one level pair.

    Attributes
    ----------
    nu : float
        Noise amplitude; the process jumps between ``+nu`` and ``-nu``.
    lam : float
        Switching rate.
    a : float
        Nonequilibrium parameter in ``[-1, 1]``; ``a = 0`` is the
        stationary initial distribution.
    kernel : MemoryKernel
        Memory kernel of the generalized master equation.
    """

    nu: float
    lam: float
    a: float = 0.0
    kernel: MemoryKernel = Memoryless()

    def __post_init__(self):
        nu, lam, a = float(self.nu), float(self.lam), float(self.a)
        if not math.isfinite(nu) or nu < 0.0:
            raise ParameterError(f"nu must be finite and >= 0, got {nu!r}")
        if not math.isfinite(lam) or lam <= 0.0:
            raise ParameterError(f"lambda must be finite and > 0, got {lam!r}")
        if not (-1.0 <= a <= 1.0):
            raise ParameterError(f"a must lie in [-1, 1], got {a!r}")
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "a", a)

    @property
    def stationary(self) -> bool:
        return self.a == 0.0

    def with_a(self, a: float) -> "RtnPairParams":
        return RtnPairParams(self.nu, self.lam, a, self.kernel)


class Regime(enum.Enum):
    OVERDAMPED = "overdamped"
    CRITICAL = "critical"
    UNDERDAMPED = "underdamped"


@dataclass(frozen=True)
class RegimeBeta:
    beta: float
    regime: Regime


def classify_regime(params: RtnPairParams) -> RegimeBeta:
    """Return ``beta = sqrt(|lambda^2 - nu^2|)`` and the dynamical regime."""
    nu, lam = params.nu, params.lam
    if abs(lam - nu) <= CRITICAL_RTOL * max(lam, nu):
        return RegimeBeta(0.0, Regime.CRITICAL)
    beta = math.sqrt(abs((lam - nu) * (lam + nu)))
    return RegimeBeta(beta, Regime.UNDERDAMPED if nu > lam else Regime.OVERDAMPED)


def _sinc_like(beta: float, t: np.ndarray, hyperbolic: bool) -> np.ndarray:
    # sinh(beta t)/beta or sin(beta t)/beta, series below SERIES_CUTOFF
    x = beta * t
    small = np.abs(x) < SERIES_CUTOFF
    sign = 1.0 if hyperbolic else -1.0
    out = np.empty_like(t)
    out[small] = t[small] * (1.0 + sign * x[small] ** 2 / 6.0)
    big = ~small
    if hyperbolic:
        out[big] = np.sinh(x[big]) / beta
    else:
        out[big] = np.sin(x[big]) / beta
    return out


def memoryless_decoherence(params: RtnPairParams, t):
    """Decoherence function ``F(t)`` for a memoryless kernel.

    ``t`` may be a scalar or an array of non-negative times; the result is
    complex with the same shape.
    """
    if not is_memoryless(params.kernel):
        raise BackendMismatchError(
            f"closed form requires a memoryless kernel, got {params.kernel!r}"
        )
    times = np.asarray(t, dtype=float)
    scalar = times.ndim == 0
    times = np.atleast_1d(times)
    if np.any(times < 0):
        raise ParameterError("times must be non-negative")

    nu, lam, a = params.nu, params.lam, params.a
    rb = classify_regime(params)
    with np.errstate(over="ignore", invalid="ignore"):
        re, im = _branches(rb, nu, lam, a, times)
    out = re + 1j * im
    out[times == 0.0] = 1.0 + 0.0j
    return complex(out[0]) if scalar else out


def _branches(rb: RegimeBeta, nu: float, lam: float, a: float, times: np.ndarray):
    decay = np.exp(-lam * times)
    if rb.regime is Regime.CRITICAL:
        re = decay * (1.0 + lam * times)
        im = a * lam * times * decay
    else:
        hyperbolic = rb.regime is Regime.OVERDAMPED
        x = rb.beta * times
        osc = np.cosh(np.minimum(x, 30.0)) if hyperbolic else np.cos(x)
        s = _sinc_like(rb.beta, times, hyperbolic)
        if hyperbolic:
            # For large beta t the hyperbolic functions overflow before the
            # decay is applied; fold exp(-lambda t) into the exponentials.
            far = x > 30.0
            grow = np.exp((rb.beta - lam) * times[far])
            shrink = np.exp(-(rb.beta + lam) * times[far])
            cosh_decay = decay * np.where(far, 1.0, osc)
            sinh_decay = decay * s
            cosh_decay[far] = 0.5 * (grow + shrink)
            sinh_decay[far] = 0.5 * (grow - shrink) / rb.beta
            re = cosh_decay + lam * sinh_decay
            im = a * nu * sinh_decay
        else:
            re = decay * (osc + lam * s)
            im = a * nu * s * decay
    return re, im
