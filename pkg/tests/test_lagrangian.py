import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twistflow import hermitian as hm, lagrangian as lg
from twistflow.bundles import make_preset
from twistflow.errors import BundleMismatch

seeds = st.integers(0, 2**31 - 1)


@pytest.fixture(scope="module")
def atiyah():
    return make_preset("atiyah_f2", {"beta": 1.0}, grid_n=32)


def test_psi():
    x = np.array([-2.0, -1e-4, 0.0, 1e-4, 3.0])
    expect = np.where(x == 0, 0.5, (np.exp(x) - x - 1) / np.where(x == 0, 1, x) ** 2)
    assert np.allclose(lg.psi(x), expect, rtol=1e-9)
    assert lg.psi(np.array([0.0]))[0] == 0.5
    assert np.all(np.diff(lg.psi(np.linspace(-5, 5, 101))) > 0)


@pytest.mark.parametrize("amp", [0.1, 0.4])
def test_conformal_oracle(amp):
    # line bundle, reference HE metric, k = e^u h with u = a cos(2 pi s) on the square torus:
    # L = int |dbar u|^2 sigma = pi^2 a^2 / 2
    b = make_preset("line_bundle", {"d": 1}, grid_n=32)
    h = hm.reference_metric(b)
    s, _ = b.geom.st
    k = hm.conformal_metric(h, amp * np.cos(2 * np.pi * s))
    expect = np.pi**2 * amp**2 / 2
    assert lg.lagrangian_closed(h, k) == pytest.approx(expect, rel=1e-12)
    assert lg.lagrangian_path(hm.geodesic_path(h, k, 33)) == pytest.approx(expect, rel=1e-9)


@given(s1=seeds, s2=seeds)
def test_q1_antisymmetric(atiyah, s1, s2):
    h, k = hm.random_metric(atiyah, s1, 0.5), hm.random_metric(atiyah, s2, 0.5)
    assert np.max(np.abs(lg.q1_field(h, k).values + lg.q1_field(k, h).values)) < 1e-12


@settings(max_examples=6)
@given(s1=seeds, s2=seeds)
def test_closed_form_matches_path(atiyah, s1, s2):
    h, k = hm.random_metric(atiyah, s1, 0.4), hm.random_metric(atiyah, s2, 0.4)
    closed = lg.lagrangian_closed(h, k)
    assert lg.lagrangian_path(hm.geodesic_path(h, k, 33)) == pytest.approx(closed, rel=1e-6, abs=1e-8)
    assert lg.lagrangian_path(hm.linear_path(h, k, 33)) == pytest.approx(closed, rel=1e-5, abs=1e-7)
    assert lg.lagrangian_closed(k, h) == pytest.approx(-closed, rel=1e-6, abs=1e-8)


def test_zero_on_diagonal_and_scaling(atiyah):
    h = hm.random_metric(atiyah, 3, 0.4)
    assert abs(lg.lagrangian_closed(h, h)) < 1e-14
    k = hm.MetricState(atiyah, 2.5 * h.reduced)
    assert abs(lg.lagrangian_closed(h, k)) < 1e-10


def test_derivative_check(atiyah):
    h, k = hm.random_metric(atiyah, 5, 0.4), hm.random_metric(atiyah, 6, 0.4)
    for path in (hm.geodesic_path(h, k, 3), hm.linear_path(h, k, 3)):
        fd, formula = lg.lagrangian_derivative_check(path, 0.3)
        assert fd == pytest.approx(formula, rel=1e-6)
    with pytest.raises(ValueError):
        lg.lagrangian_derivative_check(hm.geodesic_path(h, k, 3), 1.0)
    cus = hm.custom_path([h, hm.geodesic_point(h, k, 0.5), k])
    with pytest.raises(ValueError):
        lg.path_point(cus, 0.5)


def test_decomposition(atiyah):
    h, k = hm.random_metric(atiyah, 7, 0.4), hm.random_metric(atiyah, 8, 0.4)
    parts = lg.lagrangian_decomposition(h, k, atiyah.declared_subbundles[0])
    assert parts["residual"] < 1e-8
    assert lg.C_TERM_SIGN == -1.0
    # the C-term is what closes the identity
    naive = parts["sub"] + parts["quotient"] + (parts["c_norm_h"] - parts["c_norm_k"])
    assert abs(naive - parts["total"]) > 1e-3


def test_l2_norm(atiyah):
    h = hm.random_metric(atiyah, 9, 0.4)
    assert lg.l2_norm_sq(atiyah, h, np.broadcast_to(np.eye(2), (32, 32, 2, 2))) == pytest.approx(2.0)


def test_bundle_mismatch(atiyah):
    other = make_preset("atiyah_f2", {"beta": 1.0}, grid_n=32)
    with pytest.raises(BundleMismatch):
        lg.q1_field(hm.reference_metric(atiyah), hm.reference_metric(other))
    with pytest.raises(BundleMismatch):
        lg.lagrangian_closed(hm.reference_metric(atiyah), hm.reference_metric(other))


def test_closed_form_on_flow_evolved_metric():
    from twistflow.flow import FlowConfig, run_flow

    b = make_preset("atiyah_f2", {"beta": 1.0}, grid_n=32)
    h = hm.reference_metric(b)
    k = run_flow(b, h, FlowConfig(dt_max=0.1, t_final=2.0)).final
    closed = lg.lagrangian_closed(h, k)
    assert lg.lagrangian_path(hm.geodesic_path(h, k, 65)) == pytest.approx(closed, rel=1e-6)
    assert closed < 0
