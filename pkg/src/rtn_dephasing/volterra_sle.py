"""Time-domain solver for the telegraph-noise stochastic Liouville equation.

The two partial averages ``rho(+nu, t)`` and ``rho(-nu, t)`` obey coupled
Volterra integro-differential equations.  In the frame rotating with the
intrinsic frequency, ``sigma = exp(i omega t) rho``, they read::

    d sigma_+/dt = -i nu sigma_+ + lam (K * (sigma_- - sigma_+))(t)
    d sigma_-/dt = +i nu sigma_- + lam (K * (sigma_+ - sigma_-))(t)

The delta part of ``K`` enters as a local term with full weight.  The smooth
part is a sum of exponentials (see ``noise_kernels.exponential_modes``)
convolved by product integration against the piecewise-linear interpolant
of the history, with weights integrated exactly.  Time stepping is the
trapezoidal rule with an explicit Euler predictor and one corrector pass.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .closed_form import RtnPairParams
from .errors import DephasingError, DivergenceError, ParameterError
from .laplace_engine import DecoherenceSeries
from .noise_kernels import delta_weight, exponential_modes

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class VolterraConfig:
    step: float = 1e-3
    t_max: float = 10.0

    def __post_init__(self):
        if not (self.step > 0 and math.isfinite(self.step)):
            raise ParameterError(f"step must be positive, got {self.step!r}")
        if not (self.t_max > 0 and math.isfinite(self.t_max)):
            raise ParameterError(f"t_max must be positive, got {self.t_max!r}")
        if self.step > self.t_max:
            raise ParameterError("step must not exceed t_max")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.step))

    @property
    def times(self) -> np.ndarray:
        return self.step * np.arange(self.n_steps + 1)


@dataclass
class PartialAverages:
    """Partial averages over the two noise values, and their sum."""

    times: np.ndarray
    rho_plus: np.ndarray
    rho_minus: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.rho_plus + self.rho_minus


def _hat_weights(c: complex, mu: complex, h: float) -> tuple[complex, complex]:
    """Integrals of ``c exp(-mu u)`` against the two hat halves on ``[0, h]``.

    Returns ``(older, newer)``: weights multiplying the history value at
    lag ``h`` and at lag ``0`` of the first subinterval.
    """
    z = mu * h
    if abs(z) < 1e-2:
        # series of (1 - e^-z (1 + z))/z^2 and (1 - e^-z)/z
        older = 0.5 - z / 3 + z**2 / 8 - z**3 / 30 + z**4 / 144 - z**5 / 840
        total = 1 - z / 2 + z**2 / 6 - z**3 / 24 + z**4 / 120 - z**5 / 720
    else:
        em = np.exp(-z)
        older = (1 - em * (1 + z)) / z**2
        total = -np.expm1(-z) / z
    return c * h * older, c * h * (total - older)


def _convolution_weights(k, h: float, n_steps: int) -> tuple[np.ndarray, np.ndarray]:
    """Lag-indexed product-trapezoid weights for the smooth kernel part.

    ``older[q]``/``newer[q]`` belong to the subinterval with lags in
    ``[q h, (q + 1) h]``.  Conjugate mode pairs are summed, so for real
    kernels the weights are real up to rounding and are returned real.
    """
    q = np.arange(n_steps)
    older = np.zeros(n_steps, dtype=complex)
    newer = np.zeros(n_steps, dtype=complex)
    for c, mu in exponential_modes(k):
        a0, b0 = _hat_weights(c, mu, h)
        with np.errstate(under="ignore"):
            decay = np.exp(-mu * h * q)
        older += a0 * decay
        newer += b0 * decay
    return older.real.copy(), newer.real.copy()


def solve_gsle_rtn(
    params: RtnPairParams, omega: float, rho0: complex, cfg: VolterraConfig
) -> PartialAverages:
    """Integrate the two partial averages on ``{0, h, ..., t_max}``."""
    h, n = cfg.step, cfg.n_steps
    nu, lam, a = params.nu, params.lam, params.a
    if h * lam > 0.1:
        log.warning("step * lambda = %.3g exceeds 0.1; accuracy may suffer", h * lam)
    w = delta_weight(params.kernel)
    older, newer = _convolution_weights(params.kernel, h, n)
    smooth = bool(np.any(older) or np.any(newer))

    sp = np.empty(n + 1, dtype=complex)
    sm = np.empty(n + 1, dtype=complex)
    d = np.empty(n + 1, dtype=complex)  # sigma_- - sigma_+
    sp[0] = 0.5 * (1.0 + a) * rho0
    sm[0] = 0.5 * (1.0 - a) * rho0
    d[0] = sm[0] - sp[0]

    # weight of history node j at step m is older[m-1-j] + newer[m-j];
    # inner[k] holds it for k = m - j in 1..n-1, node 0 only sees older
    inner = np.zeros(n)
    inner[1:] = older[:-1] + newer[1:]

    def history(m: int) -> complex:
        # convolution at t_m without the newest node j = m
        if not smooth:
            return 0.0
        return np.dot(inner[m - 1 : 0 : -1], d[1:m]) + older[m - 1] * d[0]

    def rhs(p: complex, q: complex, conv: complex) -> tuple[complex, complex]:
        dd = q - p
        coupling = lam * (w * dd + conv)
        return -1j * nu * p + coupling, 1j * nu * q - coupling

    fp, fm = rhs(sp[0], sm[0], 0.0)
    # overflow is caught by the finiteness check below
    with np.errstate(over="ignore", invalid="ignore"):
        for m in range(1, n + 1):
            base = history(m)
            pp = sp[m - 1] + h * fp
            pm = sm[m - 1] + h * fm
            gp, gm = rhs(pp, pm, base + newer[0] * (pm - pp))
            sp[m] = sp[m - 1] + 0.5 * h * (fp + gp)
            sm[m] = sm[m - 1] + 0.5 * h * (fm + gm)
            d[m] = sm[m] - sp[m]
            if not (np.isfinite(sp[m]) and np.isfinite(sm[m])):
                raise DivergenceError(f"non-finite partial average at step {m}", step=m)
            fp, fm = rhs(sp[m], sm[m], base + newer[0] * d[m])

    times = cfg.times
    phase = np.exp(-1j * omega * times)
    return PartialAverages(times, sp * phase, sm * phase)


def decoherence_from_volterra(pa: PartialAverages, omega: float, rho0: complex) -> DecoherenceSeries:
    """Decoherence function ``exp(i omega t) total(t) / rho0``."""
    if rho0 == 0:
        raise DephasingError("rho0 = 0 carries no coherence; decoherence undefined")
    values = np.exp(1j * omega * pa.times) * pa.total / rho0
    return DecoherenceSeries(pa.times, values, "volterra")
