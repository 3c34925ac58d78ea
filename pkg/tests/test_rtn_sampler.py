import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from rtn_dephasing import (
    Composite,
    Exponential,
    McConfig,
    ModulatedCosine,
    ParameterError,
    RtnPairParams,
    SamplerValidityError,
    mc_decoherence,
    memoryless_decoherence,
    sample_initial,
)
from rtn_dephasing.laplace_engine import rational_decoherence
from rtn_dephasing.rtn_sampler import (
    _sample_block,
    _waiting_sampler,
    block_phases,
    hypoexponential_rates,
    sample_trajectory_markov,
    sample_trajectory_semimarkov,
    stream,
)


def test_sample_initial_extremes():
    rng = stream(1, 0)
    assert np.all(sample_initial(1.0, rng, 1000) == 1)
    assert np.all(sample_initial(-1.0, rng, 1000) == -1)
    assert sample_initial(1.0, rng) == 1
    with pytest.raises(ParameterError):
        sample_initial(1.5, rng)


def test_sample_initial_unbiased():
    draws = sample_initial(0.0, stream(2, 0), 10**6)
    assert abs(draws.mean()) <= 4e-3


def test_markov_switch_count():
    params = RtnPairParams(1, 1, 0)
    _, switches = _sample_block(params, _waiting_sampler(params), 10.0, 10**5, stream(3, 0))
    counts = np.isfinite(switches).sum(axis=1)
    assert 9.87 <= counts.mean() <= 10.13


def _sign_at(signs, switches, t):
    return signs * (-1.0) ** (switches <= t).sum(axis=1)


def test_stationary_occupation():
    params = RtnPairParams(1, 1, 0)
    n = 10**5
    signs, switches = _sample_block(params, _waiting_sampler(params), 5.0, n, stream(4, 0))
    for t in (0.0, 0.5, 2.0, 5.0):
        frac = np.mean(_sign_at(signs, switches, t) > 0)
        assert abs(frac - 0.5) <= 4 * 0.5 / math.sqrt(n)


def test_relaxation_of_mean_noise():
    # brute-force oracle: integrate the two-state master equation
    lam, n = 1.0, 10**5
    params = RtnPairParams(1, lam, 1.0)
    signs, switches = _sample_block(params, _waiting_sampler(params), 3.0, n, stream(5, 0))
    sol = solve_ivp(
        lambda t, P: [lam * (P[1] - P[0]), lam * (P[0] - P[1])],
        (0, 3.0), [1.0, 0.0], t_eval=[0.25, 0.5, 1.0, 2.0, 3.0], rtol=1e-11, atol=1e-13,
    )
    for t, Pp, Pm in zip(sol.t, *sol.y):
        s = _sign_at(signs, switches, t)
        err = s.std(ddof=1) / math.sqrt(n)
        assert abs(s.mean() - (Pp - Pm)) <= 4 * err
        assert Pp - Pm == pytest.approx(math.exp(-2 * lam * t), rel=1e-8)


def test_trajectory_objects():
    params = RtnPairParams(0.7, 1.0, 0.0)
    tr = sample_trajectory_markov(params, 5.0, stream(6, 0))
    assert np.all(np.diff(tr.switch_times) > 0) and np.all(tr.switch_times <= 5.0)
    # exact phase from the object agrees with the vectorized block phase
    phases = block_phases(np.array([float(tr.initial_sign)]), tr.switch_times[None, :], 0.7, np.array([1.0, 3.3, 5.0]))
    for k, t in enumerate((1.0, 3.3, 5.0)):
        assert tr.phase(t, 0.7) == pytest.approx(phases[0, k], abs=1e-12)
    assert abs(tr.value(0.0, 0.7)) == 0.7
    with pytest.raises(SamplerValidityError):
        sample_trajectory_markov(RtnPairParams(1, 1, 0, Exponential(5.0)), 1.0, stream(0, 0))


def test_phase_is_exact_for_a_known_path():
    signs = np.array([1.0])
    switches = np.array([[1.0, 2.5, np.inf]])
    # 2 - 2*1.5 + 2*0.5 = 0 at t = 3
    got = block_phases(signs, switches, 2.0, np.array([0.0, 0.5, 1.0, 2.0, 3.0]))
    # eps = +2 on [0,1), -2 on [1,2.5), +2 after
    assert np.allclose(got[0], [0.0, 1.0, 2.0, 0.0, 0.0], atol=1e-15)


def test_noise_free_is_exactly_one():
    F = mc_decoherence(RtnPairParams(0.0, 1.0, 0.3), McConfig(1000, 1, (0.0, 1.0, 2.0)))
    assert np.all(F.values == 1) and np.all(F.stderr == 0)


def test_single_frozen_trajectory():
    t = np.linspace(0, 5, 11)
    F = mc_decoherence(RtnPairParams(1.3, 1e-12, 1.0), McConfig(1, 9, tuple(t)))
    assert np.allclose(F.values, np.exp(-1.3j * t), atol=1e-12)


@pytest.mark.parametrize("a", [0.0, 1.0])
def test_markov_ensemble_matches_conjugate_closed_form(a):
    params = RtnPairParams(1, 1, a)
    t = np.linspace(0, 10, 26)
    F = mc_decoherence(params, McConfig(10**5, 99, tuple(t)))
    ref = np.conj(memoryless_decoherence(params, t))
    diff = F.values - ref
    assert np.all(np.abs(diff.real) <= 4 * F.stderr[:, 0])
    assert np.all(np.abs(diff.imag) <= 4 * F.stderr[:, 1])
    assert np.all(np.abs(F.values) <= 1)


def test_reproducible_across_worker_counts():
    cfg = McConfig(20000, 2024, tuple(np.linspace(0, 4, 9)))
    params = RtnPairParams(1.5, 0.8, 0.4)
    runs = [mc_decoherence(params, cfg, workers=w) for w in (1, 2, 5)]
    for other in runs[1:]:
        assert np.array_equal(other.values, runs[0].values)
        assert np.array_equal(other.stderr, runs[0].stderr)
    assert not np.array_equal(mc_decoherence(params, McConfig(20000, 2025, cfg.times)).values, runs[0].values)


def test_stderr_scaling():
    params = RtnPairParams(1, 1, 0)
    times = (0.0, 1.0, 2.0)
    small = mc_decoherence(params, McConfig(10000, 11, times)).stderr[1:]
    large = mc_decoherence(params, McConfig(40000, 12, times)).stderr[1:]
    ratio = small[:, 0] / large[:, 0]
    assert np.all(np.abs(ratio - 2.0) <= 0.4)


def test_hypoexponential_regime():
    r1, r2 = hypoexponential_rates(1.0, 4.0)
    assert r1 == r2 == 2.0
    r1, r2 = hypoexponential_rates(1.0, 10.0)
    assert r1 * r2 == pytest.approx(10.0) and r1 + r2 == pytest.approx(10.0)
    with pytest.raises(SamplerValidityError, match="waiting density not non-negative"):
        hypoexponential_rates(1.0, 2.0)
    with pytest.raises(SamplerValidityError):
        mc_decoherence(RtnPairParams(1, 1, 0, Exponential(2.0)), McConfig(10, 0, (0.0, 1.0)))
    with pytest.raises(SamplerValidityError):
        mc_decoherence(RtnPairParams(1, 1, 0, ModulatedCosine(5.0, 1.0)), McConfig(10, 0, (0.0, 1.0)))
    with pytest.raises(SamplerValidityError):
        mc_decoherence(RtnPairParams(1, 1, 0, Composite(0.5, 5.0)), McConfig(10, 0, (0.0, 1.0)))


def test_erlang_waiting_times_at_boundary():
    # kappa = 4 lambda: Erlang(2, kappa/2), mean 1/lambda, variance 8/kappa^2
    params = RtnPairParams(1, 1.0, 0, Exponential(4.0))
    w = _waiting_sampler(params)(stream(13, 0), 10**5)
    assert abs(w.mean() - 1.0) <= 4 * math.sqrt(0.5 / 10**5)
    assert w.var() == pytest.approx(0.5, rel=0.03)
    tr = sample_trajectory_semimarkov(params, 5.0, stream(13, 1))
    assert np.all(np.diff(tr.switch_times) > 0)


def test_semimarkov_fast_memory_limit():
    t = np.linspace(0, 5, 11)
    params = RtnPairParams(1, 1, 0.5, Exponential(1e4))
    F = mc_decoherence(params, McConfig(50000, 17, tuple(t)))
    ref = np.conj(memoryless_decoherence(params.with_a(0.5).__class__(1, 1, 0.5), t))
    assert np.max(np.abs(F.values - ref)) < 0.02


def test_semimarkov_discrepancy_is_reported(capsys):
    # Open question: the renewal ensemble need not reproduce the integro-differential
    # solution for finite memory.  Measure and print the gap; do not assert equality.
    t = np.linspace(0, 10, 21)
    params = RtnPairParams(1, 1, 0.5, Exponential(5.0))
    F = mc_decoherence(params, McConfig(20000, 21, tuple(t)))
    gap = np.max(np.abs(np.conj(F.values) - rational_decoherence(params, t).values))
    print(f"semi-Markov (kappa=5 lambda) vs rational: max |dF| = {gap:.4f}")
    assert np.isfinite(gap)
