from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from qsurvival import intervals as iv
from qsurvival.errors import QuadratureError

# Frozen high-precision oracle values (mpmath, 30 digits).
ZETA_3_5 = 1.12673386731705664642781249185
HURWITZ_3_5_11 = 0.00111598287770102558771599370552
MEAN_DPL_3_5 = 2.38119629872353898682796450649
VAR_DPL_3_5 = 3.6040564050054522618656809652
E_COS_CPL_2_5 = 0.102621953330339819886789977865
E_EXP_HN = 0.302112414295392205928496695582
E_INV_DEXP_0_3 = 0.257994172355557687804003732808

ALL_LAWS = [
    iv.DiscreteExponential(0.5),
    iv.DiscretePowerLaw(3.5),
    iv.DiscretePowerLaw(2.5),
    iv.DiscreteDelta(2),
    iv.Poisson(1.5),
    iv.ContinuousExponential(2.0),
    iv.ContinuousPowerLaw(2.5),
    iv.ContinuousPowerLaw(3.5, tau_ch=0.5),
    iv.ContinuousDelta(0.25),
    iv.HalfNormal(1.3, tau_hn=0.4),
]


def test_parameter_domains():
    bad = [
        lambda: iv.DiscreteExponential(0.0),
        lambda: iv.DiscreteExponential(1.0),
        lambda: iv.DiscretePowerLaw(2.0),
        lambda: iv.DiscreteDelta(0),
        lambda: iv.Poisson(0.0),
        lambda: iv.ContinuousExponential(0.0),
        lambda: iv.ContinuousPowerLaw(1.0),
        lambda: iv.ContinuousPowerLaw(2.0, tau_ch=0.0),
        lambda: iv.ContinuousDelta(0.0),
        lambda: iv.HalfNormal(0.0),
        lambda: iv.HalfNormal(1.0, tau_hn=-1.0),
    ]
    for make in bad:
        with pytest.raises(ValueError):
            make()


def test_zeta_helpers():
    assert iv.zeta(2.0) == pytest.approx(math.pi**2 / 6, rel=1e-14, abs=1e-12)
    assert iv.zeta(3.5) == pytest.approx(ZETA_3_5, abs=1e-12)
    assert iv.hurwitz_zeta(3.5, 11) == pytest.approx(HURWITZ_3_5_11, rel=1e-12)
    for s in (2.1, 2.5, 3.0, 4.7, 10.0):
        for q in (1, 2, 7, 1000):
            assert iv.hurwitz_zeta(s, q) == pytest.approx(special.zeta(s, q), rel=1e-12)


def test_closed_form_moments_against_scipy():
    r = 0.3
    geo = stats.geom(r)
    law = iv.DiscreteExponential(r)
    assert law.mean() == pytest.approx(2 * geo.mean(), rel=1e-14)
    assert law.variance() == pytest.approx(4 * geo.var(), rel=1e-14)
    law = iv.Poisson(1.5)
    assert (law.mean(), law.variance()) == (pytest.approx(5.0), pytest.approx(6.0))
    law = iv.ContinuousExponential(2.0)
    assert law.mean() == pytest.approx(stats.expon(scale=0.5).mean())
    assert law.variance() == pytest.approx(stats.expon(scale=0.5).var())
    law = iv.ContinuousPowerLaw(2.5, tau_ch=1.0)
    par = stats.pareto(2.5)
    assert law.mean() == pytest.approx(par.mean(), rel=1e-14)
    assert law.variance() == pytest.approx(par.var(), rel=1e-12)
    law = iv.HalfNormal(1.0)
    assert law.mean() == pytest.approx(math.sqrt(2 / math.pi))
    assert law.variance() == pytest.approx(1 - 2 / math.pi)
    hn = stats.halfnorm(loc=0.4, scale=1.3)
    law = iv.HalfNormal(1.3, tau_hn=0.4)
    assert law.mean() == pytest.approx(hn.mean(), rel=1e-14)
    assert law.variance() == pytest.approx(hn.var(), rel=1e-12)
    law = iv.DiscretePowerLaw(3.5)
    assert law.mean() == pytest.approx(MEAN_DPL_3_5, rel=1e-12)
    assert law.variance() == pytest.approx(VAR_DPL_3_5, rel=1e-11)
    assert iv.ContinuousDelta(0.7).variance() == 0.0
    assert iv.ContinuousDelta(0.7).mean() == 0.7


def test_infinite_variance_marker():
    assert iv.DiscretePowerLaw(2.5).variance() is iv.Divergent.INFINITE
    assert iv.DiscretePowerLaw(3.0).variance() is iv.Divergent.INFINITE
    assert iv.ContinuousPowerLaw(1.5).variance() is iv.Divergent.INFINITE
    assert iv.ContinuousPowerLaw(2.0).variance() is iv.Divergent.INFINITE
    assert isinstance(iv.ContinuousPowerLaw(2.01).variance(), float)


def test_mass_examples():
    assert iv.DiscreteExponential(0.5).mass_or_density(2) == pytest.approx(0.5)
    assert iv.DiscretePowerLaw(3.5).mass_or_density(2) == pytest.approx(1 / ZETA_3_5, rel=1e-13)
    for law in ALL_LAWS:
        if law.discrete:
            assert law.mass_or_density(3) == 0.0
            assert law.mass_or_density(-2) == 0.0
    assert iv.ContinuousPowerLaw(2.5).mass_or_density(0.5) == 0.0
    assert iv.HalfNormal(1.0, tau_hn=1.0).mass_or_density(0.9) == 0.0
    np.testing.assert_allclose(
        iv.HalfNormal(1.3, 0.4).mass_or_density(np.array([0.5, 2.0])),
        stats.halfnorm(loc=0.4, scale=1.3).pdf([0.5, 2.0]),
        rtol=1e-14,
    )


@pytest.mark.parametrize("law", ALL_LAWS, ids=lambda l: f"{l.kind}")
def test_normalisation_and_mean_via_expect(law):
    assert iv.expect(law, lambda t: np.ones_like(t)) == pytest.approx(1.0, abs=1e-10)
    assert iv.expect(law, lambda t: t) == pytest.approx(law.mean(), rel=1e-8)


def test_expect_oscillatory_and_smooth_functions():
    assert iv.expect(iv.ContinuousPowerLaw(2.5), np.cos, period=2 * math.pi) == pytest.approx(E_COS_CPL_2_5, abs=1e-9)
    # without a period the quantile map squeezes infinitely many oscillations near u = 0
    with pytest.raises(QuadratureError):
        iv.expect(iv.ContinuousPowerLaw(2.5), np.cos)
    assert iv.expect(iv.HalfNormal(1.3, 0.4), lambda t: np.exp(-t)) == pytest.approx(E_EXP_HN, rel=1e-9)
    assert iv.expect(iv.DiscreteExponential(0.3), lambda t: 1 / t) == pytest.approx(E_INV_DEXP_0_3, rel=1e-11)
    assert iv.expect(iv.DiscreteDelta(6), lambda t: t**2) == 36.0


def test_expect_indicator_reproduces_masses():
    law = iv.Poisson(2.0)
    for tau in (2, 4, 10):
        val = iv.expect(law, lambda t, tau=tau: (t == tau).astype(float), period=2.0)
        # the mass beyond the truncation point (at most TAIL_MASS) is weighted by a running mean
        assert val == pytest.approx(law.mass_or_density(tau), abs=1e-12)
    law = iv.ContinuousExponential(1.5)
    val = iv.expect(law, lambda t: (t <= 1.0).astype(float))
    assert val == pytest.approx(1 - math.exp(-1.5), rel=1e-9)


def test_expect_reports_quadrature_failure():
    law = iv.ContinuousExponential(1.0)
    with pytest.raises(QuadratureError):
        iv.expect(law, lambda t: np.sin(1e7 * t))


def test_lattice_cutoff_leaves_requested_mass():
    law = iv.DiscretePowerLaw(2.5)
    J = law.cutoff(1e-8)
    assert law._tail_j(J) <= 1e-8 < law._tail_j(J - 1)


def test_records_round_trip_and_reject_unknown_keys():
    for law in ALL_LAWS:
        assert iv.law_from_record(law.to_record()) == law
    with pytest.raises(ValueError):
        iv.law_from_record({"kind": "poisson", "lam": 1.0, "mu": 2.0})
    with pytest.raises(ValueError):
        iv.law_from_record({"kind": "lognormal"})
    assert set(iv.LAW_KINDS) == {
        "discrete_exponential",
        "discrete_power_law",
        "discrete_delta",
        "poisson",
        "continuous_exponential",
        "continuous_power_law",
        "continuous_delta",
        "half_normal",
    }


@pytest.mark.parametrize("law", ALL_LAWS, ids=lambda l: f"{l.kind}")
def test_sampling_is_deterministic_and_in_support(law):
    a = law.sample(np.random.default_rng(11), 5000)
    b = law.sample(np.random.default_rng(11), 5000)
    np.testing.assert_array_equal(a, b)
    assert np.all(a >= law.support_min)
    if law.discrete:
        assert np.all(a % 2 == 0) or isinstance(law, iv.DiscreteDelta)
    scalar = law.sample(np.random.default_rng(1))
    assert np.ndim(scalar) == 0


def test_discrete_power_law_tail_sampler_matches_tail_masses():
    law = iv.DiscretePowerLaw(2.5)
    rng = np.random.default_rng(3)
    J = 50
    j = law._sample_tail(rng, 200_000, J)
    assert j.min() >= J + 1
    # conditional tail probabilities P(j = J+1), P(j = J+2), P(j > J+2)
    tail = law._tail_j(J)
    p = np.array([law._mass_j(np.array([J + 1.0]))[0], law._mass_j(np.array([J + 2.0]))[0]]) / tail
    obs = np.array([np.mean(j == J + 1), np.mean(j == J + 2)])
    assert np.all(np.abs(obs - p) < 4 * np.sqrt(p * (1 - p) / j.size))


@settings(max_examples=30, deadline=None)
@given(r=st.floats(0.05, 0.95), lam=st.floats(0.1, 8.0), s=st.floats(2.2, 6.0))
def test_lattice_laws_normalise(r, lam, s):
    for law in (iv.DiscreteExponential(r), iv.Poisson(lam), iv.DiscretePowerLaw(s)):
        assert iv.expect(law, lambda t: np.ones_like(t)) == pytest.approx(1.0, abs=1e-10)
        assert iv.expect(law, lambda t: t) == pytest.approx(law.mean(), rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(alpha=st.floats(1.2, 6.0), tau_ch=st.floats(0.1, 5.0), u=st.floats(0.0, 0.999999))
def test_continuous_power_law_quantile_inverts_cdf(alpha, tau_ch, u):
    law = iv.ContinuousPowerLaw(alpha, tau_ch)
    assert float(law.cdf(law.quantile(u))) == pytest.approx(u, abs=1e-12)
