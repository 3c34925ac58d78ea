"""Monte Carlo oracle: explicit telegraph-noise trajectories.

Each trajectory is piecewise constant, so the accumulated phase is an exact
sum of ``sign * nu * duration`` terms.  Trajectories are generated in
fixed-size blocks; block ``b`` draws from a Philox stream keyed by
``(seed, b)``, and block sums are combined in block order.  The ensemble
therefore does not depend on how many workers process the blocks.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .closed_form import RtnPairParams
from .errors import ParameterError, SamplerValidityError
from .laplace_engine import DecoherenceSeries
from .noise_kernels import Composite, Exponential, is_memoryless

BLOCK_SIZE = 4096
WORKERS_ENV = "RTN_DEPHASING_WORKERS"


@dataclass(frozen=True)
class McConfig:
    n_traj: int
    seed: int
    times: tuple

    def __post_init__(self):
        if int(self.n_traj) < 1:
            raise ParameterError(f"n_traj must be >= 1, got {self.n_traj!r}")
        times = tuple(float(t) for t in self.times)
        if not times or times[0] != 0.0 or any(b <= a for a, b in zip(times, times[1:])):
            raise ParameterError("times must be strictly ascending and start at 0")
        object.__setattr__(self, "n_traj", int(self.n_traj))
        object.__setattr__(self, "seed", int(self.seed) % 2**64)
        object.__setattr__(self, "times", times)


@dataclass(frozen=True)
class Trajectory:
    initial_sign: int
    switch_times: np.ndarray

    def value(self, t: float, nu: float) -> float:
        n = int(np.searchsorted(self.switch_times, t, side="right"))
        return self.initial_sign * nu * (-1) ** n

    def phase(self, t: float, nu: float) -> float:
        """Exact ``int_0^t eps(s) ds``."""
        edges = np.concatenate(([0.0], self.switch_times[self.switch_times < t], [t]))
        signs = self.initial_sign * (-1.0) ** np.arange(edges.size - 1)
        return float(nu * np.sum(signs * np.diff(edges)))


def stream(seed: int, index: int) -> np.random.Generator:
    """Deterministic random stream for block ``index``."""
    return np.random.Generator(np.random.Philox(key=[seed % 2**64, index]))


def sample_initial(a: float, rng: np.random.Generator, size=None):
    """Initial noise sign: +1 with probability (1 + a)/2."""
    if not (-1.0 <= a <= 1.0):
        raise ParameterError(f"a must lie in [-1, 1], got {a!r}")
    u = rng.random(size)
    out = np.where(u < 0.5 * (1.0 + a), 1, -1)
    return int(out) if size is None else out


def hypoexponential_rates(lam: float, kappa: float) -> tuple[float, float]:
    """Rates of the two exponential stages of the renewal waiting time.

    For the exponential kernel the waiting density has Laplace transform
    ``lam kappa / (p^2 + kappa p + lam kappa)``; it is a proper density only
    when both poles are real, i.e. ``kappa >= 4 lam``.
    """
    disc = kappa * kappa - 4.0 * lam * kappa
    if disc < 0.0:
        raise SamplerValidityError(
            "waiting density not non-negative; no trajectory representation in this "
            f"regime (kappa={kappa:g} < 4 lambda={4 * lam:g})"
        )
    root = math.sqrt(disc)
    return 0.5 * (kappa - root), 0.5 * (kappa + root)


def _waiting_sampler(params: RtnPairParams):
    k = params.kernel
    if is_memoryless(k):
        lam = params.lam
        return lambda rng, size: rng.exponential(1.0 / lam, size)
    if isinstance(k, (Exponential, Composite)) and (
        isinstance(k, Exponential) or k.w == 0.0
    ):
        r1, r2 = hypoexponential_rates(params.lam, k.kappa)
        return lambda rng, size: rng.exponential(1.0 / r1, size) + rng.exponential(1.0 / r2, size)
    raise SamplerValidityError(f"no trajectory sampler for kernel {k!r}")


def _sample_block(params, waiting, t_max, n, rng):
    """Initial signs (n,) and padded switch times (n, K) with inf padding."""
    signs = sample_initial(params.a, rng, n)
    cols = []
    clock = np.zeros(n)
    alive = np.ones(n, dtype=bool)
    while alive.any():
        clock = clock + waiting(rng, n)
        clock[~alive] = np.inf
        alive &= clock <= t_max
        cols.append(np.where(alive, clock, np.inf))
    switches = np.stack(cols[:-1], axis=1) if len(cols) > 1 else np.full((n, 0), np.inf)
    return signs, switches


def _trajectories(params, waiting, t_max, n, rng) -> list[Trajectory]:
    signs, switches = _sample_block(params, waiting, t_max, n, rng)
    return [Trajectory(int(s), row[np.isfinite(row)]) for s, row in zip(signs, switches)]


def sample_trajectory_markov(params: RtnPairParams, t_max: float, rng) -> Trajectory:
    """One Markov telegraph trajectory on ``[0, t_max]``."""
    if not is_memoryless(params.kernel):
        raise SamplerValidityError("Markov sampling requires a memoryless kernel")
    return _trajectories(params, _waiting_sampler(params), t_max, 1, rng)[0]


def sample_trajectory_semimarkov(params: RtnPairParams, t_max: float, rng) -> Trajectory:
    """One renewal trajectory for the exponential kernel (``kappa >= 4 lam``)."""
    k = params.kernel
    if not (isinstance(k, Exponential) or (isinstance(k, Composite) and k.w == 0.0)):
        raise SamplerValidityError("semi-Markov sampling requires an exponential kernel")
    return _trajectories(params, _waiting_sampler(params), t_max, 1, rng)[0]


def block_phases(signs, switches, nu: float, times: np.ndarray) -> np.ndarray:
    """Exact phases ``int_0^t eps`` for a block, shape (n, len(times))."""
    n = signs.shape[0]
    edges = np.concatenate((np.zeros((n, 1)), switches, np.full((n, 1), np.inf)), axis=1)
    # eps on [edges[k], edges[k+1]) is sign * (-1)^k
    alt = (-1.0) ** np.arange(edges.shape[1] - 1)
    out = np.empty((n, times.size))
    for i, t in enumerate(times):
        clipped = np.minimum(edges, t)
        out[:, i] = np.diff(clipped, axis=1) @ alt
    return nu * signs[:, None] * out


def _block_sums(params, waiting, times, seed, index, n):
    rng = stream(seed, index)
    signs, switches = _sample_block(params, waiting, times[-1], n, rng)
    phase = block_phases(signs.astype(float), switches, params.nu, times)
    re, im = np.cos(phase), -np.sin(phase)
    return np.stack([re.sum(0), im.sum(0), (re * re).sum(0), (im * im).sum(0)])


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ParameterError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def mc_decoherence(params: RtnPairParams, cfg: McConfig, workers: int | None = None) -> DecoherenceSeries:
    """Ensemble average of ``exp(-i phase(t))`` with standard errors."""
    waiting = _waiting_sampler(params)
    times = np.asarray(cfg.times)
    sizes = [BLOCK_SIZE] * (cfg.n_traj // BLOCK_SIZE)
    if cfg.n_traj % BLOCK_SIZE:
        sizes.append(cfg.n_traj % BLOCK_SIZE)
    jobs = [(params, waiting, times, cfg.seed, b, n) for b, n in enumerate(sizes)]
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda job: _block_sums(*job), jobs))
    else:
        parts = [_block_sums(*job) for job in jobs]
    total = np.zeros_like(parts[0])
    for part in parts:
        total += part
    n = cfg.n_traj
    mean_re, mean_im = total[0] / n, total[1] / n
    if n > 1:
        var_re = np.maximum(total[2] - n * mean_re**2, 0.0) / (n - 1)
        var_im = np.maximum(total[3] - n * mean_im**2, 0.0) / (n - 1)
        stderr = np.sqrt(np.stack([var_re, var_im], axis=1) / n)
    else:
        stderr = np.zeros((times.size, 2))
    return DecoherenceSeries(
        times, mean_re + 1j * mean_im, "mc", stderr=stderr, info={"n_traj": n, "seed": cfg.seed}
    )
