import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import k1e

from levyfem import CGMY, NIG, BlackScholes, Merton, StripError

BS = BlackScholes(sigma=0.2, r=0.01)
MERTON = Merton(sigma=0.15, lam=3.0, alpha=-0.04, beta=0.2, r=0.03)
CGMY_T1 = CGMY(C=0.5, G=23.78, M=27.24, Y=1.1, r=0.03)
NIG_T1 = NIG(alpha=12.26, beta=-5.77, delta=0.52, r=0.03)
ALL_MODELS = [BS, MERTON, CGMY_T1, NIG_T1]


@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.name)
def test_symbol_vanishes_at_origin(model):
    assert abs(model.symbol(0.0)) < 1e-12


@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.name)
def test_real_line_parity(model):
    rng = np.random.default_rng(42)
    xi = rng.uniform(-200.0, 200.0, 1000)
    a_pos = model.symbol(xi)
    a_neg = model.symbol(-xi)
    scale = np.maximum(1.0, np.abs(a_pos))
    assert np.max(np.abs(a_neg - np.conj(a_pos)) / scale) < 1e-13
    assert np.max(np.abs(a_pos.real - a_neg.real) / scale) < 1e-13
    assert np.max(np.abs(a_pos.imag + a_neg.imag) / scale) < 1e-13


@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.name)
def test_martingale_identity(model):
    # e^{-rt} E[e^{L_t}] = exp(-t*(A(i) + r)) must be 1
    for t in (0.5, 1.0, 2.0):
        value = np.exp(-t * (model.symbol(1j) + model.r))
        assert abs(value - 1.0) < 1e-10


def test_bs_drift_value():
    assert BS.b == pytest.approx(0.01 - 0.02, abs=1e-15)


def test_nig_drift_formula():
    expected = 0.03 - 0.52 * (math.sqrt(12.26**2 - 5.77**2)
                              - math.sqrt(12.26**2 - (-5.77 + 1.0) ** 2))
    assert NIG_T1.b == pytest.approx(expected, abs=1e-14)


def test_merton_symbol_against_high_precision_reevaluation():
    # independent arbitrary-precision evaluation of the same closed formula
    mpmath = pytest.importorskip("mpmath")
    mpmath.mp.dps = 50
    sig, lam, al, be, r = map(mpmath.mpf, ("0.15", "3", "-0.04", "0.2", "0.03"))
    b = r - sig**2 / 2 - lam * (mpmath.e ** (al + be**2 / 2) - 1)
    z = mpmath.mpf(1)
    expected = (sig**2 * z**2 / 2 + 1j * z * b
                - lam * (mpmath.e ** (-1j * al * z - be**2 * z**2 / 2) - 1))
    got = MERTON.symbol(1.0)
    assert abs(got - complex(expected)) < 1e-14 * abs(complex(expected))


def test_characteristic_function_at_time_zero():
    for model in ALL_MODELS:
        assert model.characteristic_function(0.0, 13.7) == pytest.approx(1.0)


def test_bs_characteristic_function_closed_form():
    t, u = 1.0, 1.0
    expected = np.exp(1j * u * BS.b * t - 0.5 * u**2 * BS.sigma**2 * t)
    assert abs(BS.characteristic_function(t, u) - expected) < 1e-15


def test_merton_characteristic_function_closed_form():
    u = np.linspace(-50.0, 50.0, 201)
    for t in (0.1, 0.5, 1.0, 2.0):
        got = MERTON.characteristic_function(t, u)
        jump = np.exp(1j * u * MERTON.alpha - 0.5 * MERTON.beta**2 * u**2) - 1.0
        expected = np.exp(t * (1j * u * MERTON.b - 0.5 * MERTON.sigma**2 * u**2
                               + MERTON.lam * jump))
        assert np.max(np.abs(got - expected)) < 1e-12


def test_characteristic_function_bounded_by_one():
    u = np.linspace(-80.0, 80.0, 401)
    for model in ALL_MODELS:
        assert np.max(np.abs(model.characteristic_function(1.5, u))) <= 1 + 1e-12


@pytest.mark.parametrize("model,lo,hi", [
    (BS, -math.inf, math.inf),
    (MERTON, -math.inf, math.inf),
    (CGMY_T1, -27.24, 23.78),
    (NIG_T1, -18.03, 6.49),
], ids=lambda v: getattr(v, "name", str(v)))
def test_damping_strips(model, lo, hi):
    strip = model.damping_strip()
    assert strip.lo == pytest.approx(lo) and strip.hi == pytest.approx(hi)


def _cgmy_damped_density(model, eta, y):
    # e^{-eta y} F(dy)/dy with the damping folded into the exponent
    temper = model.M * y if y > 0 else model.G * abs(y)
    return model.C * math.exp(-eta * y - temper) / abs(y) ** (1 + model.Y)


def _nig_damped_density(model, eta, y):
    # k1e(z) = K1(z) e^z keeps the Bessel tail representable
    z = model.alpha * abs(y)
    return (model.delta * model.alpha / math.pi * k1e(z) / abs(y)
            * math.exp(model.beta * y - z - eta * y))


@pytest.mark.parametrize("model,density", [
    (CGMY_T1, _cgmy_damped_density), (NIG_T1, _nig_damped_density),
], ids=["CGMY", "NIG"])
def test_strip_edges_match_exponential_moments(model, density):
    # inside the strip by 0.5 the moment integral converges; outside by 0.5
    # the partial integrals blow up
    strip = model.damping_strip()

    def both_tails(eta, ub):
        return quad(lambda y: density(model, eta, y), 1.0, ub, limit=400)[0] \
            + quad(lambda y: density(model, eta, y), -ub, -1.0, limit=400)[0]

    for eta in (strip.lo + 0.5, strip.hi - 0.5):
        inner = both_tails(eta, 200.0)
        assert math.isfinite(inner) and inner < 1e6
    for eta in (strip.lo - 0.5, strip.hi + 0.5):
        assert both_tails(eta, 300.0) > 1e6 * both_tails(eta, 50.0)


def test_growth_bound_quadratic_when_diffusive():
    xi = np.logspace(0, 5, 60)
    for model in (BS, MERTON, CGMY(C=0.5, G=23.78, M=27.24, Y=1.1,
                                   sigma=0.5, r=0.03)):
        ratio = np.abs(model.symbol(xi)) / (1.0 + xi) ** 2
        stabilized = ratio[xi >= 1e3]
        assert 0.9 < stabilized[-1] / stabilized[0] < 1.1
        assert np.max(ratio) < 10.0 * stabilized[-1]


def test_growth_subquadratic_for_pure_jump():
    xi = np.logspace(2, 5, 30)
    for model in (CGMY_T1, NIG_T1):
        ratio = np.abs(model.symbol(xi)) / (1.0 + xi) ** 2
        assert ratio[-1] < 0.1 * ratio[0]


def test_out_of_strip_evaluation_raises_with_named_bound():
    with pytest.raises(StripError, match=r"-27.24"):
        CGMY_T1.symbol(1.0 - 30j)
    with pytest.raises(StripError, match=r"6.49"):
        NIG_T1.symbol(0.5 - 7j)


def test_cgmy_martingale_drift_needs_m_above_one():
    model = CGMY(C=0.5, G=23.78, M=0.5, Y=1.1, r=0.03)
    with pytest.raises(StripError, match="M > 1"):
        model.martingale_drift()


def test_nig_martingale_drift_needs_moment():
    model = NIG(alpha=2.0, beta=1.5, delta=0.5, r=0.0)
    with pytest.raises(StripError, match=r"\(beta\+1\)"):
        model.martingale_drift()


@pytest.mark.parametrize("bad", [
    lambda: BlackScholes(sigma=0.0, r=0.01),
    lambda: BlackScholes(sigma=0.2, r=-0.01),
    lambda: Merton(sigma=0.15, lam=0.0, alpha=0.0, beta=0.2),
    lambda: Merton(sigma=0.15, lam=1.0, alpha=0.0, beta=0.0),
    lambda: CGMY(C=0.0, G=1.0, M=2.0, Y=1.5),
    lambda: CGMY(C=0.5, G=1.0, M=2.0, Y=1.0),
    lambda: CGMY(C=0.5, G=1.0, M=2.0, Y=2.0),
    lambda: CGMY(C=0.5, G=-1.0, M=2.0, Y=1.5),
    lambda: NIG(alpha=1.0, beta=1.5, delta=0.5),
    lambda: NIG(alpha=0.0, beta=0.0, delta=0.5),
    lambda: NIG(alpha=1.0, beta=0.0, delta=0.0),
])
def test_invalid_parameters_rejected(bad):
    with pytest.raises(ValueError):
        bad()


def test_drift_offset_breaks_martingale_only():
    shifted = Merton(sigma=0.15, lam=3.0, alpha=-0.04, beta=0.2, r=0.03,
                     drift_offset=0.1)
    assert shifted.b == pytest.approx(MERTON.b + 0.1)
    value = np.exp(-1.0 * (shifted.symbol(1j) + shifted.r))
    assert abs(value - 1.0) > 1e-3
