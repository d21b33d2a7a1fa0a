import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import norm

from levyfem import (BlackScholes, BsPriceAux, Grid, HatBasis, Merton, NIG,
                     Payoff, QhsNormalAux, QuadratureConfig, SplineBasis,
                     StripError, default_eta, initial_coefficients, make_aux,
                     payoff_hat, rhs_bs, rhs_qhs, synthesize)
from levyfem.localization import qhs_provider

MERTON = Merton(sigma=0.15, lam=3.0, alpha=-0.04, beta=0.2, r=0.03)
NIG_T1 = NIG(alpha=12.26, beta=-5.77, delta=0.52, r=0.03)
QUAD = QuadratureConfig(abs_tol=1e-9, rel_tol=1e-9)


# -- payoff transform -----------------------------------------------------------

def test_payoff_hat_at_zero_frequency():
    assert payoff_hat(Payoff("call", 1.0, -1.5), 0.0) == pytest.approx(4 / 3)
    assert payoff_hat(Payoff("put", 1.0, 0.5), 0.0) == pytest.approx(4 / 3)


def test_payoff_hat_against_damped_quadrature():
    payoff = Payoff("call", 1.0, -2.0)
    rng = np.random.default_rng(12)
    damped = lambda x: math.exp(-2 * x) * (math.exp(x) - 1)
    for xi in rng.uniform(-40.0, 40.0, 50):
        re = quad(damped, 0.0, 80.0, weight="cos", wvar=xi,
                  limit=400, epsabs=1e-13)[0]
        im = quad(damped, 0.0, 80.0, weight="sin", wvar=xi,
                  limit=400, epsabs=1e-13)[0]
        assert abs(re + 1j * im - payoff_hat(payoff, xi)) < 1e-10


def test_payoff_hat_put_against_damped_quadrature():
    payoff = Payoff("put", 2.0, 0.7)
    for xi in (-11.3, 0.0, 4.2):
        re = quad(lambda x: math.exp(0.7 * x) * (2.0 - math.exp(x)) * math.cos(xi * x),
                  -80.0, math.log(2.0), limit=400, epsabs=1e-13)[0]
        im = quad(lambda x: math.exp(0.7 * x) * (2.0 - math.exp(x)) * math.sin(xi * x),
                  -80.0, math.log(2.0), limit=400, epsabs=1e-13)[0]
        assert abs(re + 1j * im - payoff_hat(payoff, xi)) < 1e-10


@pytest.mark.parametrize("kind,eta", [
    ("call", -0.5), ("call", 0.0), ("call", 0.3),
    ("put", -0.2), ("put", 0.0), ("put", -1.5),
])
def test_forbidden_damping_rejected(kind, eta):
    with pytest.raises(ValueError):
        Payoff(kind, 1.0, eta)


def test_default_eta_clipping():
    assert default_eta("call", MERTON) == -1.5
    assert default_eta("put", MERTON) == 0.5
    tight = NIG(alpha=1.3, beta=0.0, delta=0.5, r=0.0)  # strip (-1.3, 1.3)
    assert default_eta("call", tight) == pytest.approx(-1.2)
    with pytest.raises(StripError, match="eta < -1"):
        default_eta("call", NIG(alpha=1.05, beta=0.0, delta=0.5, r=0.0))


# -- auxiliary functions ----------------------------------------------------------

def test_qhs_call_asymptotics():
    aux = QhsNormalAux(payoff=Payoff("call", 1.0, -1.5), r=0.03, sigma_psi=0.25)
    assert aux.value(0.0, -8.0) == pytest.approx(0.0, abs=1e-12)
    assert aux.value(0.0, 5.0) == pytest.approx(math.exp(5.0) - 1.0, rel=1e-10)


def test_qhs_put_at_zero():
    aux = QhsNormalAux(payoff=Payoff("put", 1.0, 0.5), r=0.03, sigma_psi=0.25)
    for t in (0.2, 1.0, 2.7):
        assert aux.value(t, 0.0) == pytest.approx((math.exp(-0.03 * t) - 1) / 2)


def test_bs_price_aux_and_put_call_parity():
    call = BsPriceAux(payoff=Payoff("call", 1.0, -1.5), r=0.01, sigma_bs=0.2)
    put = BsPriceAux(payoff=Payoff("put", 1.0, 0.5), r=0.01, sigma_bs=0.2)
    # published BS value: sigma=0.2, r=0.01, T=1, S=K=1
    assert call.value(1.0, 0.0) == pytest.approx(0.0843332, abs=5e-7)
    for t in (0.25, 1.0, 2.0):
        for x in (-0.3, 0.0, 0.4):
            gap = call.value(t, x) - put.value(t, x) \
                - (math.exp(x) - math.exp(-0.01 * t))
            assert abs(gap) < 1e-12
    assert call.value(0.0, 0.3) == pytest.approx(math.exp(0.3) - 1.0)


def test_make_aux_defaults():
    payoff = Payoff("call", 1.0, -1.5)
    aux = make_aux("bs_price", payoff, MERTON)
    assert aux.sigma_bs == MERTON.sigma
    aux2 = make_aux("bs_price", payoff, NIG_T1)
    assert aux2.sigma_bs == 0.15
    aux3 = make_aux("qhs_normal", payoff, MERTON)
    assert aux3.sigma_psi == 0.25
    with pytest.raises(ValueError):
        make_aux("unknown", payoff, MERTON)


# -- spatial oracle for the Merton right-hand side ---------------------------------

def _gauss_panels(lo, hi, panels, order=12):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1] - edges[0])
    pts = (mid[:, None] + half * nodes[None, :]).ravel()
    wts = np.tile(weights * half, panels)
    return pts, wts


def _psi_derivatives(aux, t):
    """Analytic psi, psi_x, psi_xx, psi_t for both auxiliary variants (calls)."""
    k, r = aux.payoff.strike, aux.r
    if isinstance(aux, QhsNormalAux):
        s = aux.sigma_psi

        def bundle(x):
            cdf = norm.cdf(x / s)
            pdf = norm.pdf(x / s) / s
            fwd = np.exp(x) - k * math.exp(-r * t)
            psi = fwd * cdf
            psi_x = np.exp(x) * cdf + fwd * pdf
            psi_xx = np.exp(x) * cdf + 2 * np.exp(x) * pdf \
                + fwd * (-x / s**2) * pdf
            psi_t = r * k * math.exp(-r * t) * cdf
            return psi, psi_x, psi_xx, psi_t
    else:
        sb = aux.sigma_bs

        def bundle(x):
            vol = sb * math.sqrt(t)
            d1 = (x - math.log(k) + (r + sb**2 / 2) * t) / vol
            d2 = d1 - vol
            psi = np.exp(x) * norm.cdf(d1) - k * math.exp(-r * t) * norm.cdf(d2)
            psi_x = np.exp(x) * norm.cdf(d1)
            psi_xx = psi_x + np.exp(x) * norm.pdf(d1) / vol
            b_bs = r - sb**2 / 2
            psi_t = 0.5 * sb**2 * psi_xx + b_bs * psi_x - r * psi
            return psi, psi_x, psi_xx, psi_t
    return bundle


def merton_rhs_spatial_oracle(model, family, aux, t):
    """-(d_t psi + A psi + r psi, phi_j) with the operator applied through the
    integro-differential form and the Merton density materialized."""
    lam, aj, bj = model.lam, model.alpha, model.beta
    r = model.r
    m1 = quad(lambda y: y * norm.pdf(y, aj, bj), -1, 1)[0]
    b_trunc = model.b + lam * m1
    bundle = _psi_derivatives(aux, t)

    y_small, w_small = _gauss_panels(-1.0, 1.0, 60)
    w_small = w_small * lam * norm.pdf(y_small, aj, bj)
    y_left, w_left = _gauss_panels(aj - 14 * bj, -1.0, 40)
    y_right, w_right = _gauss_panels(1.0, aj + 14 * bj, 40)
    y_large = np.concatenate([y_left, y_right])
    w_large = np.concatenate([w_left, w_right]) \
        * lam * norm.pdf(y_large, aj, bj)

    def source(x):
        psi, psi_x, psi_xx, psi_t = bundle(x)
        shift_small = bundle(x[:, None] + y_small[None, :])[0]
        small = (shift_small - psi[:, None]
                 - y_small[None, :] * psi_x[:, None]) @ w_small
        shift_large = bundle(x[:, None] + y_large[None, :])[0]
        large = (shift_large - psi[:, None]) @ w_large
        gen = -0.5 * model.sigma**2 * psi_xx - b_trunc * psi_x - small - large
        return -(psi_t + gen + r * psi)

    out = np.empty(family.grid.n)
    rad = family.support_radius
    for j, xj in enumerate(family.grid.nodes):
        pts, wts = _gauss_panels(xj - rad, xj + rad, 40)
        out[j] = float((source(pts) * family.phi0(pts - xj)) @ wts)
    return out


@pytest.fixture(scope="module")
def spline9():
    return SplineBasis(Grid.for_splines(-5, 5, 9))


def test_rhs_qhs_matches_spatial_oracle(spline9):
    payoff = Payoff("call", 1.0, -1.5)
    aux = QhsNormalAux(payoff=payoff, r=MERTON.r, sigma_psi=0.25)
    fa, fb = rhs_qhs(aux, MERTON, spline9, QUAD)
    t = 0.8
    got = fa - payoff.strike * math.exp(-MERTON.r * t) * fb
    want = merton_rhs_spatial_oracle(MERTON, spline9, aux, t)
    assert np.max(np.abs(got - want)) < 1e-5


def test_rhs_bs_matches_spatial_oracle(spline9):
    payoff = Payoff("call", 1.0, -1.5)
    aux = BsPriceAux(payoff=payoff, r=MERTON.r, sigma_bs=0.15)
    t = 1.0
    got = rhs_bs(aux, MERTON, spline9, t, QUAD)
    want = merton_rhs_spatial_oracle(MERTON, spline9, aux, t)
    assert np.max(np.abs(got - want)) < 1e-5


def test_rhs_bs_vanishes_when_model_is_bs(spline9):
    bs = BlackScholes(sigma=0.2, r=0.01)
    aux = BsPriceAux(payoff=Payoff("call", 1.0, -1.5), r=bs.r, sigma_bs=0.2)
    for t in (0.0, 0.5, 2.0):
        vals = rhs_bs(aux, bs, spline9, t, QUAD)
        assert np.max(np.abs(vals)) == 0.0


def test_rhs_qhs_time_reconstruction_matches_per_time_integrals(spline9):
    # F(t) = F_a - K e^{-rt} F_b equals the slow evaluation with e^{-rt}
    # folded into the integrand
    payoff = Payoff("call", 1.0, -1.5)
    aux = QhsNormalAux(payoff=payoff, r=MERTON.r, sigma_psi=0.25)
    provider = qhs_provider(aux, MERTON, spline9, QUAD)
    fa, fb = rhs_qhs(aux, MERTON, spline9, QUAD)
    rng = np.random.default_rng(3)
    for t in rng.uniform(0.0, 2.0, 10):
        slow = fa - payoff.strike * math.exp(-MERTON.r * t) * fb
        assert np.max(np.abs(provider(float(t)) - slow)) < 1e-14


def test_rhs_qhs_constant_in_time_when_r_zero():
    model = Merton(sigma=0.15, lam=3.0, alpha=-0.04, beta=0.2, r=0.0)
    fam = SplineBasis(Grid.for_splines(-5, 5, 9))
    payoff = Payoff("call", 1.0, -1.5)
    aux = QhsNormalAux(payoff=payoff, r=0.0, sigma_psi=0.25)
    provider = qhs_provider(aux, model, fam, QUAD)
    assert np.max(np.abs(provider(0.3) - provider(1.7))) == 0.0


def test_contour_shift_invariance(spline9):
    aux_a = QhsNormalAux(payoff=Payoff("call", 1.0, -1.5), r=MERTON.r)
    aux_b = QhsNormalAux(payoff=Payoff("call", 1.0, -2.0), r=MERTON.r)
    t = 0.5
    fa = qhs_provider(aux_a, MERTON, spline9, QUAD)(t)
    fb = qhs_provider(aux_b, MERTON, spline9, QUAD)(t)
    assert np.max(np.abs(fa - fb)) < 1e-8


@pytest.mark.parametrize("model", [MERTON, NIG_T1], ids=lambda m: m.name)
def test_rhs_decays_toward_boundaries(model):
    fam = SplineBasis(Grid.for_splines(-5, 5, 33))
    payoff = Payoff("call", 1.0, default_eta("call", model))
    aux = QhsNormalAux(payoff=payoff, r=model.r, sigma_psi=0.25)
    f = qhs_provider(aux, model, fam, QUAD)(0.5)
    peak = np.max(np.abs(f))
    assert abs(f[0]) < 1e-3 * peak
    assert abs(f[-1]) < 1e-3 * peak
    aux_bs = BsPriceAux(payoff=payoff, r=model.r,
                        sigma_bs=getattr(model, "sigma", 0.0) or 0.15)
    fbs = rhs_bs(aux_bs, model, fam, 0.5,
                 QuadratureConfig(abs_tol=1e-8, rel_tol=1e-8))
    peak = np.max(np.abs(fbs))
    assert abs(fbs[0]) < 1e-3 * peak and abs(fbs[-1]) < 1e-3 * peak


# -- initial coefficients -----------------------------------------------------------

def test_initial_coefficients_nodal_for_hats():
    fam = HatBasis(Grid.for_hats(-5, 5, 65))
    payoff = Payoff("call", 1.0, -1.5)
    aux = QhsNormalAux(payoff=payoff, r=0.03, sigma_psi=0.25)
    alpha = initial_coefficients(payoff, aux, fam, QUAD)
    gpsi = payoff.value(fam.grid.nodes) - aux.value(0.0, fam.grid.nodes)
    assert np.max(np.abs(alpha - gpsi)) < 10.0 * fam.h**2


def test_initial_coefficients_vanish_for_bs_price_aux(spline9):
    payoff = Payoff("call", 1.0, -1.5)
    aux = BsPriceAux(payoff=payoff, r=0.03, sigma_bs=0.2)
    alpha = initial_coefficients(payoff, aux, spline9, QUAD)
    assert np.max(np.abs(alpha)) < 1e-9


def test_initial_coefficients_small_psi_width_regression():
    fam = SplineBasis(Grid.for_splines(-5, 5, 33))
    payoff = Payoff("call", 1.0, -1.5)
    aux = QhsNormalAux(payoff=payoff, r=0.03, sigma_psi=1e-3)
    alpha = initial_coefficients(payoff, aux, fam, QUAD)
    # g_psi collapses onto the kink as sigma_psi -> 0
    assert np.max(np.abs(alpha)) < 0.05


def test_projection_refinement_reduces_l2_distance():
    payoff = Payoff("call", 1.0, -1.5)
    dists = []
    xs = np.linspace(-4.0, 4.0, 100)
    for n in (17, 65):
        fam = SplineBasis(Grid.for_splines(-5, 5, n))
        aux = QhsNormalAux(payoff=payoff, r=0.03, sigma_psi=0.25)
        alpha = initial_coefficients(payoff, aux, fam, QUAD)
        gpsi = payoff.value(xs) - aux.value(0.0, xs)
        err = synthesize(fam, alpha, xs) - gpsi
        dists.append(math.sqrt(np.mean(err**2)))
    assert dists[1] < dists[0]
