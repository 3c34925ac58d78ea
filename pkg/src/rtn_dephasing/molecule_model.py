"""N-level reduced density matrix under pure dephasing and its l1 coherence."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .backends import decoherence, to_analytic
from .closed_form import RtnPairParams
from .errors import ConfigError, DephasingError, ParameterError


@dataclass
class MoleculeSpec:
    """Levels, their intrinsic frequencies, initial state and pair noise.

    ``pair_params`` is keyed by ``(n, m)`` with ``n < m``; the ``(m, n)``
    element of the density matrix is the complex conjugate.
    """

    omegas: np.ndarray
    rho0: np.ndarray
    pair_params: Mapping[tuple[int, int], RtnPairParams] = field(default_factory=dict)

    def __post_init__(self):
        self.omegas = np.asarray(self.omegas, dtype=float)
        self.rho0 = np.asarray(self.rho0, dtype=complex)
        n = self.omegas.size
        if n < 2:
            raise ParameterError("a molecule needs at least two levels")
        if self.rho0.shape != (n, n):
            raise ParameterError(f"rho0 must be {n}x{n}, got shape {self.rho0.shape}")
        if not np.allclose(self.rho0, self.rho0.conj().T, rtol=0, atol=1e-12):
            raise ParameterError("rho0 must be Hermitian")
        if abs(np.trace(self.rho0) - 1.0) > 1e-10:
            raise ParameterError(f"rho0 must have unit trace, got {np.trace(self.rho0):.12g}")
        if np.linalg.eigvalsh(self.rho0).min() < -1e-10:
            raise ParameterError("rho0 must be positive semidefinite")
        for key in self.pair_params:
            i, j = key
            if not (0 <= i < j < n):
                raise ParameterError(f"pair key {key} must satisfy 0 <= n < m < {n}")
        missing = [p for p in self.coherent_pairs() if p not in self.pair_params]
        if missing:
            raise ConfigError(f"missing noise parameters for pairs {missing}", key="pair")

    @property
    def n_levels(self) -> int:
        return self.omegas.size

    def coherent_pairs(self) -> list[tuple[int, int]]:
        n = self.n_levels
        return [(i, j) for i in range(n) for j in range(i + 1, n) if self.rho0[i, j] != 0]


def reduced_density_matrix(spec: MoleculeSpec, t: float, F: Mapping[tuple[int, int], complex]) -> np.ndarray:
    """Density matrix at time ``t`` given ``F[(n, m)]`` for every coherent pair."""
    rho = np.diag(np.diag(spec.rho0)).astype(complex)
    for i, j in spec.coherent_pairs():
        if (i, j) not in F:
            raise ConfigError(f"no decoherence value for pair {(i, j)}", key=f"pair.{i}.{j}")
        w = spec.omegas[i] - spec.omegas[j]
        rho[i, j] = spec.rho0[i, j] * np.exp(-1j * w * t) * F[(i, j)]
        rho[j, i] = np.conj(rho[i, j])
    return rho


def l1_coherence(rho) -> float:
    """Sum of the moduli of all off-diagonal elements."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ParameterError("rho must be a square matrix")
    return float(np.abs(rho).sum() - np.abs(np.diag(rho)).sum())


@dataclass
class CoherenceSeries:
    times: np.ndarray
    values: np.ndarray


def pair_series(spec: MoleculeSpec, times, backend: str, **options) -> dict:
    """Run ``backend`` for every coherent pair; errors name the pair."""
    out = {}
    for pair in spec.coherent_pairs():
        try:
            out[pair] = decoherence(backend, spec.pair_params[pair], times, **options)
        except DephasingError as exc:
            exc.args = (f"pair {pair}: {exc}",) + exc.args[1:]
            raise
    return out


def coherence_series(spec: MoleculeSpec, times, backend: str = "rational", **options) -> CoherenceSeries:
    """l1 coherence along ``times`` with one backend for every pair.

    Path-convention backends are conjugated first; ``C_l1`` depends only on
    ``|F|`` so this does not change the result.
    """
    t = np.asarray(times, dtype=float)
    series = pair_series(spec, t, backend, **options)
    values = {pair: to_analytic(s) for pair, s in series.items()}
    c = np.array(
        [
            l1_coherence(reduced_density_matrix(spec, ti, {p: v[k] for p, v in values.items()}))
            for k, ti in enumerate(t)
        ]
    )
    return CoherenceSeries(t, c)


def min_eigenvalue(rho) -> float:
    """Smallest eigenvalue of a Hermitian matrix, as a positivity diagnostic."""
    return float(np.linalg.eigvalsh(np.asarray(rho)).min())
