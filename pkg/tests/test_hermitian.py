import numpy as np
import pytest
from hypothesis import given, strategies as st

from twistflow import hermitian as hm
from twistflow.bundles import MatrixField, bundle_dual, make_preset
from twistflow.errors import (BundleMismatch, DegenerateMetric, NotHermitian, Singular, SpectrumOutOfDomain,
                              UnsupportedParams)

seeds = st.integers(0, 2**31 - 1)
amps = st.floats(0.0, 1.0)


@pytest.fixture(scope="module")
def atiyah():
    return make_preset("atiyah_f2", {"beta": 1.0}, grid_n=16)


@pytest.fixture(scope="module")
def heis():
    return make_preset("heisenberg", {"r": 3, "p": 1}, grid_n=16)


def test_metric_validation(atiyah, heis):
    n = 16
    bad = np.zeros((n, n, 2, 2), dtype=complex)
    bad[..., 0, 1] = 1.0
    bad[..., 0, 0] = bad[..., 1, 1] = 2.0
    with pytest.raises(NotHermitian):
        hm.MetricState(atiyah, bad)
    with pytest.raises(DegenerateMetric):
        hm.MetricState(atiyah, np.zeros((n, n, 2, 2)))
    with pytest.raises(BundleMismatch):
        hm.MetricState(atiyah, np.ones((n, n, 1, 1)))
    off = np.broadcast_to(np.diag([1.0, 2.0, 3.0]), (n, n, 3, 3)).copy()
    with pytest.raises(UnsupportedParams):
        hm.MetricState(heis, off)


@given(seed=seeds, amp=amps)
def test_random_metric_is_positive_and_periodic(atiyah, seed, amp):
    h = hm.random_metric(atiyah, seed, amp)
    assert np.min(h.eigenvalues) > 0
    lam = np.log(h.eigenvalues)
    assert np.max(np.abs(lam)) <= amp + 1e-12
    assert h.seam_residual() < 1e-12


@given(seed=seeds)
def test_exp_log_roundtrip(atiyah, seed):
    h = hm.random_metric(atiyah, seed, 0.4)
    rng = np.random.default_rng(seed)
    x = h.unsymmetrize(hm.random_hermitian_field(atiyah, rng, 1.5))
    e = hm.functional_calculus(h, x, "exp")
    back = hm.functional_calculus(h, e, "log")
    assert np.allclose(back.values, x, atol=1e-10)
    root = hm.functional_calculus(h, e, ("power", 0.5)).values
    assert np.allclose(root @ root, e.values, atol=1e-10)
    # the result is again h-Hermitian
    assert np.allclose(h.adjoint(e.values), e.values, atol=1e-10)


def test_functional_calculus_domain(atiyah):
    h = hm.reference_metric(atiyah)
    neg = -np.broadcast_to(np.eye(2), (16, 16, 2, 2))
    with pytest.raises(SpectrumOutOfDomain):
        hm.functional_calculus(h, neg, "log")
    assert np.allclose(hm.functional_calculus(h, neg, np.abs).values, np.eye(2))
    skew = np.zeros((16, 16, 2, 2), dtype=complex)
    skew[..., 0, 1] = 1.0
    with pytest.raises(NotHermitian):
        hm.functional_calculus(h, skew, "exp")


@given(s1=seeds, s2=seeds)
def test_transitivity_witness(atiyah, s1, s2):
    h, k = hm.random_metric(atiyah, s1, 0.5), hm.random_metric(atiyah, s2, 0.5)
    a = hm.transitivity_witness(h, k)
    assert np.allclose(hm.gauge_act(a, k).reduced, h.reduced, atol=1e-10)


def test_gauge_act_singular(atiyah):
    h = hm.reference_metric(atiyah)
    with pytest.raises(Singular):
        hm.gauge_act(MatrixField(np.zeros((16, 16, 2, 2))), h)


@given(s1=seeds, s2=seeds)
def test_endo_form_dictionary(atiyah, s1, s2):
    h, k = hm.random_metric(atiyah, s1, 0.5), hm.random_metric(atiyah, s2, 0.5)
    f = hm.endo_between(h, k)
    assert np.allclose(hm.form_from_endo(h, f).reduced, k.reduced, atol=1e-12)
    assert np.allclose(hm.metric_from_endo(h, f).reduced, k.reduced, atol=1e-12)
    assert np.all(hm.h_eigenvalues(h, f) > 0)
    assert hm.inner_product(h, k, k) > 0
    assert hm.inner_product(h, h, k) == pytest.approx(hm.inner_product(h, k, h))


def test_form_from_endo_rejects_non_hermitian(atiyah):
    h = hm.reference_metric(atiyah)
    x = np.zeros((16, 16, 2, 2), dtype=complex)
    x[..., 0, 1] = 1.0
    with pytest.raises(NotHermitian):
        hm.form_from_endo(h, x)


@given(s1=seeds, s2=seeds, t=st.floats(0.1, 0.9))
def test_geodesic_properties(atiyah, s1, s2, t):
    h, k = hm.random_metric(atiyah, s1, 0.5), hm.random_metric(atiyah, s2, 0.5)
    assert np.allclose(hm.geodesic_point(h, k, 1.0).reduced, k.reduced, atol=1e-12)
    m = hm.geodesic_point(h, k, t)
    # f^{h, h_t} = exp(t log f^{h,k})
    ft = hm.functional_calculus(h, hm.endo_between(h, k), ("power", t)).values
    assert np.allclose(hm.endo_between(h, m), ft, atol=1e-10)


def test_paths(atiyah):
    h, k = hm.random_metric(atiyah, 1, 0.5), hm.random_metric(atiyah, 2, 0.5)
    g = hm.geodesic_path(h, k, 5)
    assert g.samples[0] is h and g.samples[-1] is k
    lin = hm.linear_path(h, k, 5)
    assert np.allclose(lin.samples[2].reduced, 0.5 * (h.reduced + k.reduced))
    r = g.reverse()
    assert r.h is k and np.allclose(r.tangents[0], -g.tangents[-1])
    cat = hm.concat_paths(g, hm.geodesic_path(k, h, 5))
    assert len(cat.nodes) == 9 and cat.parts
    cus = hm.custom_path([hm.geodesic_point(h, k, t) for t in np.linspace(0, 1, 41)])
    assert np.allclose(cus.tangents[20], g.tangents[0], atol=1e-3)
    with pytest.raises(ValueError):
        hm.geodesic_path(h, k, 4)


def test_conformal_and_induced(atiyah):
    h = hm.random_metric(atiyah, 5, 0.3)
    s, _ = atiyah.geom.st
    c = hm.conformal_metric(h, np.sin(2 * np.pi * s))
    assert np.allclose(c.reduced, np.exp(np.sin(2 * np.pi * s))[..., None, None] * h.reduced)
    d = hm.dual_metric(h, bundle_dual(atiyah))
    assert np.allclose(np.swapaxes(d.reduced, -1, -2) @ h.reduced, np.eye(2), atol=1e-12)


def test_bundle_mismatch(atiyah):
    other = make_preset("atiyah_f2", {"beta": 1.0}, grid_n=16)
    with pytest.raises(BundleMismatch):
        hm.endo_between(hm.reference_metric(atiyah), hm.reference_metric(other))
