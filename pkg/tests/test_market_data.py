import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ccportfolio import presets
from ccportfolio.errors import (
    CsvFormatError,
    DegenerateSample,
    InputError,
    MisalignedSeries,
    NonPositivePrice,
)
from ccportfolio.market_data import (
    MomentEstimates,
    PriceSeries,
    ReturnMatrix,
    compute_returns,
    estimate_moments,
    read_prices_csv,
)
from reference import MU0, SIGMA


def series(asset, prices, start=1):
    return PriceSeries.from_pairs(asset, [(f"2020-01-{start + k:02d}", p) for k, p in enumerate(prices)])


def test_two_observations_give_one_return():
    r = compute_returns([series("A", [100, 110])])
    assert r.returns.shape == (1, 1)
    assert r.returns[0, 0] == pytest.approx(10.0)


def test_constant_prices_have_zero_returns():
    r = compute_returns([series("A", [5.0] * 6)])
    assert np.all(r.returns == 0.0)


def test_up_then_down():
    r = compute_returns([series("A", [100, 110, 99])])
    np.testing.assert_allclose(r.returns[0], [10.0, -10.0])


def test_k_step_resampling():
    r = compute_returns([series("A", [100, 50, 110, 20, 99])], period=2)
    np.testing.assert_allclose(r.returns[0], [10.0, -10.0])


def test_quarterly_keeps_last_observation_of_quarter():
    s = PriceSeries.from_pairs(
        "A", [("2020-01-15", 1.0), ("2020-03-31", 100.0), ("2020-05-01", 7.0), ("2020-06-30", 120.0)]
    )
    r = compute_returns([s], period="quarterly")
    np.testing.assert_allclose(r.returns[0], [20.0])


def test_single_asset_moments():
    m = estimate_moments(ReturnMatrix(("A",), np.array([[1.0, 3.0]])))
    np.testing.assert_allclose(m.mu0, [2.0])
    np.testing.assert_allclose(m.sigma, [[1.0]])


def test_duplicate_assets_share_all_covariance_entries():
    r = np.array([[1.0, -2.0, 4.0, 0.5], [1.0, -2.0, 4.0, 0.5]])
    m = estimate_moments(ReturnMatrix(("A", "B"), r))
    assert m.sigma[0, 0] == m.sigma[1, 1] == m.sigma[0, 1] == m.sigma[1, 0]


def test_bundled_fixture_reproduces_nominal_inputs():
    prices = read_prices_csv(str(presets.fixture_path()))
    m = estimate_moments(compute_returns(prices, "quarterly"))
    assert m.assets == presets.ASSETS
    np.testing.assert_allclose(m.mu0, MU0, atol=5e-4)
    np.testing.assert_allclose(m.sigma, SIGMA, atol=5e-4)


def test_misaligned_series():
    with pytest.raises(MisalignedSeries):
        compute_returns([series("A", [1, 2, 3]), series("B", [1, 2, 3], start=2)])


def test_single_common_point_is_degenerate():
    with pytest.raises(DegenerateSample):
        compute_returns([series("A", [1.0, 2.0])], period=5)


def test_bad_period():
    with pytest.raises(InputError):
        compute_returns([series("A", [1, 2, 3])], period=0)
    with pytest.raises(InputError):
        compute_returns([series("A", [1, 2, 3])], period="weekly")


def test_price_series_invariants():
    with pytest.raises(InputError):
        series("A", [1.0])
    with pytest.raises(NonPositivePrice):
        series("A", [1.0, 0.0])
    with pytest.raises(InputError):
        PriceSeries.from_pairs("A", [("2020-01-02", 1.0), ("2020-01-01", 2.0)])


def test_csv_reader_errors_carry_line_numbers():
    with pytest.raises(CsvFormatError) as err:
        read_prices_csv(io.StringIO("date,asset,price\n2020-01-01,A,1\n2020-01-02,A,x\n"))
    assert err.value.line == 3
    with pytest.raises(CsvFormatError) as err:
        read_prices_csv(io.StringIO("date,asset,price\n01/02/2020,A,1\n"))
    assert err.value.line == 2
    with pytest.raises(CsvFormatError) as err:
        read_prices_csv(io.StringIO("day,ticker,close\n"))
    assert err.value.line == 1
    with pytest.raises(NonPositivePrice):
        read_prices_csv(io.StringIO("date,asset,price\n2020-01-01,A,-1\n"))


def test_empty_csv():
    with pytest.raises(DegenerateSample):
        read_prices_csv(io.StringIO(""))
    with pytest.raises(DegenerateSample):
        read_prices_csv(io.StringIO("date,asset,price\n"))


def test_moments_json_round_trip():
    m = presets.paper_moments()
    doc = json.loads(m.to_json())
    assert set(doc) == {"assets", "mu0", "sigma"}
    back = MomentEstimates.from_json(m.to_json())
    np.testing.assert_array_equal(back.sigma, m.sigma)
    np.testing.assert_array_equal(back.mu0, m.mu0)


def test_moment_invariants():
    with pytest.raises(InputError):
        MomentEstimates(np.zeros(2), np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(InputError):
        MomentEstimates(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))


returns = arrays(
    float, st.tuples(st.integers(1, 4), st.integers(2, 12)), elements=st.floats(-50, 50, allow_nan=False)
)


@settings(max_examples=60, deadline=None)
@given(returns)
def test_covariance_is_symmetric_psd(r):
    m = estimate_moments(ReturnMatrix(tuple(f"a{i}" for i in range(r.shape[0])), r))
    np.testing.assert_array_equal(m.sigma, m.sigma.T)
    assert np.linalg.eigvalsh(m.sigma).min() >= -1e-9 * max(1.0, np.abs(m.sigma).max())


@settings(max_examples=60, deadline=None)
@given(returns, st.floats(-20, 20), st.floats(0.1, 5))
def test_shift_and_scale(r, c, lam):
    ids = tuple(f"a{i}" for i in range(r.shape[0]))
    base = estimate_moments(ReturnMatrix(ids, r))
    shifted = r.copy()
    shifted[0] += c
    m = estimate_moments(ReturnMatrix(ids, shifted))
    assert m.mu0[0] == pytest.approx(base.mu0[0] + c, abs=1e-10)
    np.testing.assert_allclose(m.sigma, base.sigma, atol=1e-8)
    s = estimate_moments(ReturnMatrix(ids, lam * r))
    np.testing.assert_allclose(s.mu0, lam * base.mu0, atol=1e-9)
    np.testing.assert_allclose(s.sigma, lam**2 * base.sigma, rtol=1e-9, atol=1e-8)
