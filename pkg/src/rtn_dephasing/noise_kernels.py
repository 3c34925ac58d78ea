"""Memory kernels of the telegraph-noise master equation.

Each kernel knows its smooth time-domain part and its Laplace transform.
The delta component (``Memoryless`` and the weight ``w`` of ``Composite``)
is never sampled pointwise; consumers read :func:`delta_weight` and treat
it analytically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import NoPointwiseValueError, ParameterError, PoleEvaluationError

POLE_TOL = 1e-12


def _check_rate(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise ParameterError(f"{name} must be a finite positive rate, got {value!r}")
    return value


@dataclass(frozen=True)
class Memoryless:
    """Delta-function kernel, ``K(t) = delta(t)``."""

    def __repr__(self) -> str:
        return "Memoryless()"


@dataclass(frozen=True)
class Exponential:
    """``K(t) = kappa * exp(-kappa t)``."""

    kappa: float

    def __post_init__(self):
        object.__setattr__(self, "kappa", _check_rate("kappa", self.kappa))


@dataclass(frozen=True)
class Composite:
    """Weighted mix of a delta kernel and an exponential kernel.

    ``K(t) = w delta(t) + (1 - w) kappa exp(-kappa t)`` with ``0 <= w <= 1``.
    """

    w: float
    kappa: float

    def __post_init__(self):
        w = float(self.w)
        if not (0.0 <= w <= 1.0):
            raise ParameterError(f"w must lie in [0, 1], got {w!r}")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "kappa", _check_rate("kappa", self.kappa))


@dataclass(frozen=True)
class ModulatedCosine:
    """``K(t) = kappa exp(-kappa t) cos(Omega t)``."""

    kappa: float
    Omega: float

    def __post_init__(self):
        omega = float(self.Omega)
        if not math.isfinite(omega) or omega < 0.0:
            raise ParameterError(f"Omega must be finite and >= 0, got {omega!r}")
        object.__setattr__(self, "kappa", _check_rate("kappa", self.kappa))
        object.__setattr__(self, "Omega", omega)


MemoryKernel = Union[Memoryless, Exponential, Composite, ModulatedCosine]


def delta_weight(k: MemoryKernel) -> float:
    """Weight of the delta component: 1, 0, or ``w`` for Composite."""
    if isinstance(k, Memoryless):
        return 1.0
    if isinstance(k, Composite):
        return k.w
    return 0.0


def is_memoryless(k: MemoryKernel) -> bool:
    """True for kernels that are exactly a delta function."""
    return delta_weight(k) == 1.0


def exponential_modes(k: MemoryKernel) -> list[tuple[complex, complex]]:
    """Smooth part of ``k`` as a sum ``sum_j c_j exp(-mu_j t)``.

    Returns ``[(c_j, mu_j), ...]``; empty for the memoryless kernel.  The
    modulated kernel splits into a complex-conjugate pair.
    """
    if isinstance(k, Memoryless):
        return []
    if isinstance(k, Exponential):
        return [(complex(k.kappa), complex(k.kappa))]
    if isinstance(k, Composite):
        if k.w == 1.0:
            return []
        return [(complex((1.0 - k.w) * k.kappa), complex(k.kappa))]
    if isinstance(k, ModulatedCosine):
        if k.Omega == 0.0:
            return [(complex(k.kappa), complex(k.kappa))]
        mu = complex(k.kappa, -k.Omega)
        return [(0.5 * k.kappa, mu), (0.5 * k.kappa, mu.conjugate())]
    raise TypeError(f"not a memory kernel: {k!r}")


def poles(k: MemoryKernel) -> list[complex]:
    """Poles of the Laplace transform of ``k``."""
    if isinstance(k, Memoryless) or (isinstance(k, Composite) and k.w == 1.0):
        return []
    if isinstance(k, ModulatedCosine):
        return [complex(-k.kappa, k.Omega), complex(-k.kappa, -k.Omega)]
    return [complex(-k.kappa)]


def kernel_time(k: MemoryKernel, dt):
    """Smooth (absolutely continuous) part of the kernel at lag ``dt >= 0``.

    Accepts a scalar or an array of lags.  Raises
    :class:`NoPointwiseValueError` for kernels that are a pure delta.
    """
    if is_memoryless(k):
        raise NoPointwiseValueError("memoryless kernel has no pointwise value")
    lag = np.asarray(dt, dtype=float)
    if np.any(lag < 0):
        raise ParameterError("lag must be non-negative")
    if isinstance(k, Exponential):
        out = k.kappa * np.exp(-k.kappa * lag)
    elif isinstance(k, Composite):
        out = (1.0 - k.w) * k.kappa * np.exp(-k.kappa * lag)
    else:
        out = k.kappa * np.exp(-k.kappa * lag) * np.cos(k.Omega * lag)
    return float(out) if out.ndim == 0 else out


def kernel_laplace(k: MemoryKernel, p):
    """Laplace transform of the kernel at complex ``p`` (scalar or array)."""
    z = np.asarray(p, dtype=complex)
    for pole in poles(k):
        if np.any(np.abs(z - pole) < POLE_TOL * (1.0 + abs(pole))):
            raise PoleEvaluationError(f"kernel transform evaluated at its pole {pole}")
    if isinstance(k, Memoryless):
        out = np.ones_like(z)
    elif isinstance(k, Exponential):
        out = k.kappa / (z + k.kappa)
    elif isinstance(k, Composite):
        if k.w == 1.0:
            out = np.ones_like(z)
        else:
            out = k.w + (1.0 - k.w) * k.kappa / (z + k.kappa)
    elif isinstance(k, ModulatedCosine) and k.Omega == 0.0:
        # removable singularity: same expression as the exponential kernel
        out = k.kappa / (z + k.kappa)
    elif isinstance(k, ModulatedCosine):
        shifted = z + k.kappa
        out = k.kappa * shifted / (shifted * shifted + k.Omega**2)
    else:
        raise TypeError(f"not a memory kernel: {k!r}")
    return complex(out) if out.ndim == 0 else out
