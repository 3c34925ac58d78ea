import logging
import math

import numpy as np
import pytest

from rtn_dephasing import (
    Composite,
    DephasingError,
    DivergenceError,
    Exponential,
    Memoryless,
    ModulatedCosine,
    ParameterError,
    RtnPairParams,
    VolterraConfig,
    decoherence_from_volterra,
    memoryless_decoherence,
    solve_gsle_rtn,
)
from rtn_dephasing.laplace_engine import rational_decoherence
from rtn_dephasing.volterra_sle import _convolution_weights, _hat_weights


def run(params, h=1e-3, t_max=10.0, omega=0.0, rho0=1.0):
    pa = solve_gsle_rtn(params, omega, rho0, VolterraConfig(h, t_max))
    return pa, decoherence_from_volterra(pa, omega, rho0)


def test_initial_conditions():
    pa, F = run(RtnPairParams(1.5, 1.0, 0.3, Composite(0.5, 2.0)), h=1e-2, t_max=1.0, rho0=0.5 - 0.2j)
    assert pa.rho_plus[0] == 0.5 * 1.3 * (0.5 - 0.2j)
    assert pa.rho_minus[0] == 0.5 * 0.7 * (0.5 - 0.2j)
    assert pa.total[0] == pytest.approx(0.5 - 0.2j, abs=1e-16)
    assert F.values[0] == pytest.approx(1.0, abs=1e-15)
    assert np.array_equal(pa.total, pa.rho_plus + pa.rho_minus)


def test_memoryless_critical_point():
    pa, _ = run(RtnPairParams(1, 1, 0), h=1e-3, t_max=1.0)
    assert abs(pa.total[-1] - 2 * math.exp(-1)) <= 1e-4


def test_path_convention():
    # the integrated equation gives the conjugate of the Laplace-domain formula
    params = RtnPairParams(2, 1, 0.5)
    _, F = run(params, h=1e-3, t_max=3.0)
    closed = memoryless_decoherence(params, F.times)
    assert np.max(np.abs(np.conj(F.values) - closed)) < 1e-5
    assert np.max(np.abs(F.values - closed)) > 0.1


def test_composite_against_rational():
    params = RtnPairParams(2, 1, 0.5, Composite(0.5, 1.0))
    _, F = run(params)
    ref = rational_decoherence(params, F.times).values
    assert np.max(np.abs(np.conj(F.values) - ref)) <= 1e-3


@pytest.mark.parametrize(
    "kernel", [Memoryless(), Composite(0.5, 1.0), Exponential(0.6), ModulatedCosine(1.5, 2.0)]
)
def test_second_order_convergence(kernel):
    params = RtnPairParams(1.2, 1.0, 0.4, kernel)
    errs = []
    for h in (4e-3, 2e-3, 1e-3):
        _, F = run(params, h=h, t_max=5.0)
        errs.append(np.max(np.abs(np.conj(F.values) - rational_decoherence(params, F.times).values)))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios >= 3) & (ratios <= 5)), ratios


def test_memoryless_order_ratio_against_closed_form():
    params = RtnPairParams(1, 1, 0)
    errs = []
    for h in (2e-3, 1e-3):
        _, F = run(params, h=h)
        errs.append(np.max(np.abs(F.values - memoryless_decoherence(params, F.times))))
    assert 3 <= errs[0] / errs[1] <= 5


def test_omega_independence():
    params = RtnPairParams(1, 1, 0)
    pa0, F0 = run(params, t_max=3.0)
    pa5, F5 = run(params, t_max=3.0, omega=5.0)
    assert np.max(np.abs(F5.values - F0.values)) <= 1e-12
    assert np.max(np.abs(pa5.total - np.exp(-5j * pa5.times) * pa0.total)) <= 1e-12
    params = RtnPairParams(2, 0.7, -0.4, ModulatedCosine(1.0, 3.0))
    _, G0 = run(params, h=1e-2, t_max=5.0)
    _, G9 = run(params, h=1e-2, t_max=5.0, omega=-9.0)
    assert np.max(np.abs(G9.values - G0.values)) <= 1e-12


def test_linearity():
    params = RtnPairParams(1.3, 0.8, 0.2, Composite(0.3, 1.5))
    pa1, _ = run(params, h=1e-2, t_max=4.0)
    pa2, _ = run(params, h=1e-2, t_max=4.0, rho0=2.0)
    assert np.array_equal(pa2.total, 2.0 * pa1.total)
    c = 0.3 - 0.7j
    pac, _ = run(params, h=1e-2, t_max=4.0, rho0=c)
    assert np.allclose(pac.total, c * pa1.total, rtol=1e-13, atol=0)


def test_composite_limits_follow_kernel_identities():
    base = dict(nu=1.1, lam=0.9, a=0.5)
    _, m = run(RtnPairParams(kernel=Memoryless(), **base), h=1e-2, t_max=3.0)
    _, c1 = run(RtnPairParams(kernel=Composite(1.0, 4.0), **base), h=1e-2, t_max=3.0)
    assert np.array_equal(m.values, c1.values)
    _, e = run(RtnPairParams(kernel=Exponential(2.0), **base), h=1e-2, t_max=3.0)
    _, c0 = run(RtnPairParams(kernel=Composite(0.0, 2.0), **base), h=1e-2, t_max=3.0)
    _, o0 = run(RtnPairParams(kernel=ModulatedCosine(2.0, 0.0), **base), h=1e-2, t_max=3.0)
    assert np.array_equal(e.values, c0.values)
    assert np.max(np.abs(e.values - o0.values)) < 1e-13


@pytest.mark.parametrize("kernel", [Exponential(1.3), ModulatedCosine(0.8, 2.0), Composite(0.4, 3.0)])
def test_product_weights_reproduce_kernel_integrals(kernel):
    # sum of both hat weights over every subinterval = integral of the smooth kernel
    from scipy.integrate import quad
    from rtn_dephasing import kernel_time

    h, n = 0.05, 40
    older, newer = _convolution_weights(kernel, h, n)
    for q in (0, 7, 39):
        exact, _ = quad(lambda u: kernel_time(kernel, u), q * h, (q + 1) * h, epsabs=1e-14)
        first, _ = quad(lambda u: kernel_time(kernel, u) * (u - q * h) / h, q * h, (q + 1) * h, epsabs=1e-14)
        assert older[q] + newer[q] == pytest.approx(exact, rel=1e-12)
        assert older[q] == pytest.approx(first, rel=1e-11)


@pytest.mark.parametrize("z", [1e-6, 5e-3, 1.5e-2, 0.3, 4.0, 0.2 + 0.5j])
def test_hat_weight_series_and_closed_form_agree(z):
    from scipy.integrate import quad

    h = 1.0
    older, newer = _hat_weights(1.0, z, h)
    re_o = quad(lambda v: (np.exp(-z * v) * v).real, 0, h, epsabs=1e-15)[0]
    im_o = quad(lambda v: (np.exp(-z * v) * v).imag, 0, h, epsabs=1e-15)[0]
    assert older == pytest.approx(re_o + 1j * im_o, rel=1e-12, abs=1e-15)
    re_n = quad(lambda v: (np.exp(-z * v) * (h - v)).real, 0, h, epsabs=1e-15)[0]
    im_n = quad(lambda v: (np.exp(-z * v) * (h - v)).imag, 0, h, epsabs=1e-15)[0]
    assert newer == pytest.approx(re_n + 1j * im_n, rel=1e-12, abs=1e-15)


def test_step_warning(caplog):
    with caplog.at_level(logging.WARNING, logger="rtn_dephasing.volterra_sle"):
        run(RtnPairParams(1, 5.0, 0), h=0.05, t_max=0.5)
    assert "exceeds 0.1" in caplog.text


def test_divergence_reports_step():
    with pytest.raises(DivergenceError) as info:
        run(RtnPairParams(1e3, 1.0, 0), h=1e-2, t_max=10.0)
    assert info.value.step > 0


def test_config_and_rho0_validation():
    with pytest.raises(ParameterError):
        VolterraConfig(0.0, 1.0)
    with pytest.raises(ParameterError):
        VolterraConfig(2.0, 1.0)
    pa, _ = run(RtnPairParams(1, 1, 0), h=0.1, t_max=1.0)
    with pytest.raises(DephasingError):
        decoherence_from_volterra(pa, 0.0, 0.0)
