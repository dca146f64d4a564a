import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twrsel.core import ConfigurationError, RngStream
from twrsel.phy import ChannelSet, corrupt_csi, relay_metrics, sample_channels
from twrsel.selection import maxmin_as, maxmin_rs, select


def _fixed():
    h = np.array([[1.0, 0.1], [0.2, 0.2], [0.9, 0.9]], dtype=complex)
    g = np.array([[1.0, 1.0], [3.0, 3.0], [0.9, 0.0]], dtype=complex)
    return ChannelSet((2, 2, 2), h, g)


def test_maxmin_rs_example():
    # Gamma = min(||h||^2, ||g||^2) = (1.01, 0.08, 0.81)
    dec = select("pr-maxmin-rs", _fixed())
    assert dec.relay == 0
    assert dec.metric == pytest.approx(1.01)
    assert dec.antenna is None
    assert dec.csi_view == "true"


def test_maxmin_as_example():
    # per-antenna minima: relay 0 (1.0, 0.01), relay 1 (0.04, 0.04), relay 2 (0.81, 0)
    dec = select("maxmin-as", _fixed())
    assert (dec.relay, dec.antenna) == (0, 0)
    assert dec.metric == pytest.approx(1.0)


def test_ties_go_to_lowest_index():
    h = np.ones((3, 1), dtype=complex)
    ch = ChannelSet((1, 1, 1), h, h.copy())
    assert select("pr-maxmin-rs", ch).relay == 0
    assert select("maxmin-as", ch).relay == 0


def test_unknown_scheme():
    with pytest.raises(ConfigurationError):
        select("best-relay", _fixed())


def test_padding_never_selected():
    h = np.zeros((2, 3), dtype=complex)
    h[0, 0] = 0.1
    h[1, :] = 0.05
    ch = ChannelSet((1, 3), h, h.copy())
    dec = maxmin_as(ch)
    assert (dec.relay, dec.antenna) == (0, 0)


@settings(deadline=None, max_examples=30)
@given(st.lists(st.integers(1, 4), min_size=1, max_size=4), st.integers(0, 10_000))
def test_batched_selection_matches_loop(layout, seed):
    ch = sample_channels(layout, RngStream(seed), 25)
    m = relay_metrics(ch)
    rs = maxmin_rs(m)
    as_ = maxmin_as(m)
    for i in range(25):
        gam = [min(np.sum(np.abs(ch.h[i, k]) ** 2), np.sum(np.abs(ch.g[i, k]) ** 2)) for k in range(len(layout))]
        assert rs.relay[i] == int(np.argmax(gam))
        best = max((min(abs(ch.h[i, k, l]) ** 2, abs(ch.g[i, k, l]) ** 2), k, l)
                   for k in range(len(layout)) for l in range(layout[k]))
        assert as_.metric[i] == pytest.approx(best[0])
        assert min(abs(ch.h[i, as_.relay[i], as_.antenna[i]]) ** 2,
                   abs(ch.g[i, as_.relay[i], as_.antenna[i]]) ** 2) == pytest.approx(best[0])


def test_selection_uses_estimated_csi():
    ch = sample_channels((1, 1, 1, 1), RngStream(3), 2000)
    noisy = corrupt_csi(ch, 1.0, RngStream(4))
    a = select("pr-maxmin-rs", ch).relay
    b = select("pr-maxmin-rs", noisy).relay
    assert select("pr-maxmin-rs", noisy).csi_view == "estimated"
    assert np.mean(a != b) > 0.2
    ref = maxmin_rs(relay_metrics(noisy, use_estimates=True)).relay
    np.testing.assert_array_equal(b, ref)
