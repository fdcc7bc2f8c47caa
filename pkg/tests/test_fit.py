import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddsqubit.rb import fit


def test_exact_recovery():
    m = np.array([1, 2, 5, 10, 20, 50, 100, 200, 400], float)
    y = 0.5 * 0.99 ** m + 0.5
    r = fit.fit_decay(m, y, np.full(m.size, 1e-3))
    assert (r.A, r.p, r.B) == pytest.approx((0.5, 0.99, 0.5), abs=1e-9)
    assert r.chi2_red < 1e-12


def test_epg_from_recovered_p():
    assert fit.epg_from_p(0.998576) == pytest.approx(3.8e-4, rel=1e-3)
    assert fit.p_from_epg(fit.epg_from_p(0.998576)) == pytest.approx(0.998576, rel=1e-14)


@given(st.floats(1e-5, 1e-2))
def test_epc_close_to_ng_epg(epg):
    p = fit.p_from_epg(epg)
    assert fit.epc_from_p(p) == pytest.approx(fit.N_G * epg, rel=5 * epg + 1e-9)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 0.6), st.floats(0.95, 0.9999), st.floats(0.3, 0.6), st.integers(0, 1000))
def test_noisy_recovery_within_error_bars(A, p, B, seed):
    rng = np.random.default_rng(seed)
    m = np.unique(np.geomspace(1, 3 / (1 - p), 15).astype(int)).astype(float)
    s = np.full(m.size, 2e-3)
    y = fit.model(m, A, p, B) + rng.normal(0, 2e-3, m.size)
    r = fit.fit_decay(m, y, s)
    assert abs(r.p - p) < 6 * r.sigmas[1] + 1e-9


def test_flat_data_flags_no_decay():
    r = fit.fit_decay([1, 2, 3, 4], [0.93] * 4, [1e-3] * 4)
    assert r.p == 1.0 and "no_decay" in r.flags and r.epg == 0.0


@pytest.mark.parametrize("lengths, survivals, errors", [
    ([1, 1, 2], [0.9, 0.9, 0.8], [0.01] * 3),
    ([1, 2, 3], [0.9, np.nan, 0.8], [0.01] * 3),
    ([1, 2, 3], [0.9, 0.85, 0.8], [0.01, 0.0, 0.01]),
])
def test_fit_error_carries_data(lengths, survivals, errors):
    with pytest.raises(fit.FitError) as exc:
        fit.fit_decay(lengths, survivals, errors)
    assert exc.value.lengths == [float(v) for v in lengths]
