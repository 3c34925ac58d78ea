import mpmath
import numpy as np
import pytest
import sympy
from scipy.linalg import expm

from rtn_dephasing import Composite, Exponential, Memoryless, RtnPairParams


def kubo_oracle(params: RtnPairParams, times) -> np.ndarray:
    """Memoryless decoherence by exponentiating the two-state generator.

    Propagates the partial averages ``(rho(+nu), rho(-nu))`` with
    ``expm(A t)`` and conjugates, so the result is in the analytic sign
    convention.  Independent of every backend in the package.
    """
    nu, lam, a = params.nu, params.lam, params.a
    A = np.array([[-1j * nu - lam, lam], [lam, 1j * nu - lam]])
    start = np.array([0.5 * (1 + a), 0.5 * (1 - a)])
    return np.array([np.conj((expm(A * t) @ start).sum()) for t in np.atleast_1d(times)])


def residue_oracle(params: RtnPairParams, times, dps: int = 40) -> np.ndarray:
    """High-precision inverse transform by residues (analytic convention).

    The transform is assembled symbolically from the kernel definition with
    exact rational parameters, simplified to lowest terms, and its poles are
    found with ``dps`` digits.  Assumes simple poles, which holds for
    generic (random) parameters.
    """
    p = sympy.symbols("p")
    q = sympy.Rational
    nu, lam, a, k = q(params.nu), q(params.lam), q(params.a), params.kernel
    if isinstance(k, Memoryless):
        K = sympy.Integer(1)
    elif isinstance(k, Exponential):
        K = q(k.kappa) / (p + q(k.kappa))
    elif isinstance(k, Composite):
        K = q(k.w) + (1 - q(k.w)) * q(k.kappa) / (p + q(k.kappa))
    else:
        K = q(k.kappa) * (p + q(k.kappa)) / ((p + q(k.kappa)) ** 2 + q(k.Omega) ** 2)
    F = sympy.cancel(sympy.together((p + 2 * lam * K + sympy.I * a * nu) / (p * (p + 2 * lam * K) + nu**2)))
    num, den = (sympy.Poly(x, p) for x in sympy.fraction(F))

    def coeffs(poly):
        return [mpmath.mpc(str(sympy.re(c).evalf(dps + 10)), str(sympy.im(c).evalf(dps + 10))) for c in poly.all_coeffs()]

    with mpmath.workdps(dps):
        n, d, dd = coeffs(num), coeffs(den), coeffs(den.diff(p))
        roots = mpmath.polyroots(d, maxsteps=500, extraprec=4 * dps)
        res = [mpmath.polyval(n, r) / mpmath.polyval(dd, r) for r in roots]
        return np.array([complex(sum(c * mpmath.exp(r * t) for c, r in zip(res, roots))) for t in np.atleast_1d(times)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion and assert it."""

    def record(number: int, title: str, ok: bool, detail: str) -> None:
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
        print(line)
        _VERDICTS.append(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS):
            terminalreporter.write_line(line)
