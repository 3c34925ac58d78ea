"""Uniform entry point: params and a time grid in, a DecoherenceSeries out.

Analytic backends (``closed``, ``rational``, ``contour``) follow the
Laplace-domain formula, whose imaginary part is ``+a nu t`` at short times.
Path-based backends (``volterra``, ``mc``) average ``exp(-i int eps)`` and
come out as the complex conjugate; :func:`to_analytic` maps them over.
The two conventions differ only by ``a -> -a``, so ``|F|`` agrees.
"""

from __future__ import annotations

import numpy as np

from .closed_form import RtnPairParams, memoryless_decoherence
from .errors import BackendMismatchError, ParameterError, SamplerValidityError
from .laplace_engine import (
    BACKENDS,
    DecoherenceSeries,
    contour_decoherence,
    rational_decoherence,
)
from .noise_kernels import Composite, Exponential, is_memoryless
from .rtn_sampler import McConfig, hypoexponential_rates, mc_decoherence
from .volterra_sle import VolterraConfig, decoherence_from_volterra, solve_gsle_rtn

PATH_CONVENTION = frozenset({"volterra", "mc"})


def to_analytic(series: DecoherenceSeries) -> np.ndarray:
    """Values of ``series`` in the analytic sign convention."""
    if series.backend in PATH_CONVENTION:
        return np.conj(series.values)
    return series.values


def check_backend(name: str, params: RtnPairParams) -> None:
    """Raise if ``name`` cannot evaluate ``params``."""
    if name not in BACKENDS:
        raise ParameterError(f"unknown backend {name!r}; choose from {', '.join(BACKENDS)}")
    k = params.kernel
    if name == "closed" and not is_memoryless(k):
        raise BackendMismatchError(f"backend 'closed' requires a memoryless kernel, got {k!r}")
    if name == "mc" and not is_memoryless(k):
        if isinstance(k, Exponential) or (isinstance(k, Composite) and k.w == 0.0):
            hypoexponential_rates(params.lam, k.kappa)
        else:
            raise SamplerValidityError(f"backend 'mc' has no trajectory sampler for {k!r}")


def decoherence(
    name: str,
    params: RtnPairParams,
    times,
    *,
    volterra_step: float = 1e-3,
    mc_n_traj: int = 100_000,
    mc_seed: int = 0,
    contour_nodes: int = 64,
    workers: int | None = None,
) -> DecoherenceSeries:
    """Evaluate ``F`` on ``times`` with the named backend."""
    check_backend(name, params)
    t = np.asarray(times, dtype=float)
    if name == "closed":
        return DecoherenceSeries(t, memoryless_decoherence(params, t), "closed")
    if name == "rational":
        return rational_decoherence(params, t)
    if name == "contour":
        return contour_decoherence(params, t, nodes=contour_nodes)
    if name == "volterra":
        return _volterra_on_grid(params, t, volterra_step)
    return mc_decoherence(params, McConfig(mc_n_traj, mc_seed, tuple(t)), workers=workers)


def _volterra_on_grid(params: RtnPairParams, t: np.ndarray, step: float) -> DecoherenceSeries:
    # the solver runs on its own uniform grid; output grid points must be on it
    cfg = VolterraConfig(step=step, t_max=float(t[-1]))
    pa = solve_gsle_rtn(params, 0.0, 1.0, cfg)
    full = decoherence_from_volterra(pa, 0.0, 1.0)
    idx = np.rint(t / step).astype(int)
    if np.any(np.abs(idx * step - t) > 1e-9 * max(1.0, t[-1])):
        raise ParameterError(
            f"volterra step {step:g} does not divide the output grid; "
            "choose n_points and step so that every grid time is a multiple of step"
        )
    return DecoherenceSeries(t, full.values[idx], "volterra", info={"step": step})
