import math

import numpy as np
import pytest
from scipy import stats

from harq_fso.channel import (
    MODERATE_TURBULENCE, ChannelModel, LinkParams, PointingParams, TurbulenceParams, average_snr, instantaneous_snr,
    path_loss_gain, sample_fade, sample_fade_components, sample_fades, table1_channel,
)
from harq_fso.errors import DomainError
from harq_fso.special_functions import gg_pe_fade_cdf


def test_path_loss_gain_values():
    assert path_loss_gain(0.0, 123.0) == 1.0
    assert path_loss_gain(0.1, 1.0) == pytest.approx(0.9048374180, abs=1e-10)
    assert path_loss_gain(0.1, 10.0) == pytest.approx(0.3678794412, abs=1e-10)
    with pytest.raises(DomainError):
        path_loss_gain(-0.1, 1.0)
    with pytest.raises(DomainError):
        path_loss_gain(0.1, -1.0)


def test_average_snr_forms():
    unit = ChannelModel(pointing=PointingParams(xi2=16.0), link=LinkParams(h_l=1.0, sigma_n=1.0))
    assert average_snr(unit, large_xi2=True) == 1.0
    assert average_snr(unit) == pytest.approx(16.0 / 17.0, abs=1e-10)


def test_average_snr_table_like_case():
    model = ChannelModel(pointing=PointingParams(xi2=16.0, A0=0.5), link=LinkParams(h_l=math.exp(-0.1), sigma_n=1e-7))
    # independent re-derivation
    expected = (0.5 * math.exp(-0.1)) ** 2 * 16.0 / ((1e-7) ** 2 * 17.0)
    assert average_snr(model) == pytest.approx(expected, rel=1e-14)


def test_average_snr_large_xi2_close():
    model = ChannelModel(pointing=PointingParams(xi2=100.0))
    assert abs(average_snr(model) / average_snr(model, large_xi2=True) - 1.0) < 0.01


def test_with_average_snr_db_round_trip():
    model = table1_channel().with_average_snr_db(47.0)
    assert 10 * math.log10(average_snr(model, large_xi2=True)) == pytest.approx(47.0, abs=1e-12)
    exact = table1_channel().with_average_snr_db(47.0, large_xi2=False)
    assert 10 * math.log10(average_snr(exact)) == pytest.approx(47.0, abs=1e-12)


def test_instantaneous_snr():
    assert instantaneous_snr(0.0, 0.7, 1e-7) == 0.0
    assert instantaneous_snr(1.0, 1.0, 1.0) == 1.0
    assert instantaneous_snr(0.35, 0.02, 1e-7) == pytest.approx(4.9e9, rel=1e-12)


def test_parameter_validation():
    with pytest.raises(DomainError):
        TurbulenceParams(0.0, 1.0)
    with pytest.raises(DomainError):
        PointingParams(xi2=-1.0)
    with pytest.raises(DomainError):
        PointingParams(A0=1.5)
    with pytest.raises(DomainError):
        LinkParams(h_l=0.0)
    with pytest.raises(DomainError):
        LinkParams(sigma_n=0.0)


def test_table1_channel():
    m = table1_channel()
    assert (m.alpha, m.beta, m.xi2) == (2.296, 1.822, 16.0)
    assert m.link.h_l == pytest.approx(math.exp(-0.1))
    assert m.link.sigma_n == 1e-7
    assert m.pointing.r == 0.10 and m.pointing.sigma_s == 0.30


def test_sample_means():
    model = ChannelModel(pointing=PointingParams(xi2=16.0, A0=0.8))
    rng = np.random.default_rng(11)
    n = 2_000_000
    hs, hg = sample_fade_components(rng, model, n)
    assert abs(hs.mean() - 1.0) <= 4 * hs.std() / math.sqrt(n)
    target = 0.8 * 16.0 / 17.0
    assert abs(hg.mean() - target) <= 4 * hg.std() / math.sqrt(n)
    assert hg.max() <= 0.8
    assert hg.min() > 0


def test_fades_positive_and_scalar_draw():
    model = table1_channel()
    rng = np.random.default_rng(5)
    h = sample_fades(rng, model, 1000)
    assert np.all(h > 0)
    assert isinstance(sample_fade(rng, model), float)


def test_empirical_distribution_ks():
    model = table1_channel()
    rng = np.random.default_rng(2024)
    n = 1_000_000
    u = np.sort(sample_fades(rng, model, n) / (model.pointing.A0 * model.link.h_l))
    # KS against the closed-form CDF evaluated on a fine grid and interpolated
    grid = np.quantile(u, np.linspace(0.0005, 0.9995, 400))
    cdf = np.array([gg_pe_fade_cdf(x, model.alpha, model.beta, model.xi2) for x in grid])
    emp = np.searchsorted(u, grid, side="right") / n
    d = np.max(np.abs(emp - cdf))
    assert d < stats.kstwo.ppf(0.99, n)


def test_default_model_is_moderate():
    assert ChannelModel().turbulence == MODERATE_TURBULENCE
