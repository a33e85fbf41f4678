import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twistflow import hermitian as hm, subobjects as so
from twistflow.bundles import MatrixField, bundle_dsum, coordinate_inclusion, make_preset
from twistflow.chern import degree
from twistflow.errors import NotInjective, NoWitnesses

seeds = st.integers(0, 2**31 - 1)


@pytest.fixture(scope="module")
def atiyah():
    return make_preset("atiyah_f2", {"beta": 1.0}, grid_n=64)


@settings(max_examples=8)
@given(seed=seeds)
def test_gauss_codazzi(atiyah, seed):
    incl = atiyah.declared_subbundles[0]
    assert so.gauss_codazzi_residual(atiyah, incl, hm.random_metric(atiyah, seed, 0.5)) < 1e-8


def test_gauss_codazzi_rank3():
    e = make_preset("atiyah_f2", {"beta": 0.5}, grid_n=64)
    b = bundle_dsum(e, make_preset("line_bundle", {"d": 0}, grid_n=64))
    incl = coordinate_inclusion(3, [0, 2], 64, 0.0)
    assert so.gauss_codazzi_residual(b, incl, hm.random_metric(b, 4, 0.3)) < 1e-8


@given(seed=seeds)
def test_split_structure_is_exact(seed):
    b = make_preset("extension", {"d1": 1, "d2": 1, "beta": 0.5}, grid_n=16)
    h = hm.random_metric(b, seed, 0.5)
    sp = so.induced_structures(b, b.declared_subbundles[0], h)
    assert sp.exactness_residual() < 1e-12
    # phi is h-orthogonal to the sub-bundle
    cross = np.swapaxes(sp.inclusion, -1, -2) @ h.reduced @ sp.splitting_from_quotient.values
    assert np.max(np.abs(cross)) < 1e-12


def test_second_form_oracle():
    # at h = id the second fundamental form is the constant extension class: ||C||^2 = 2 |beta|^2 Vol
    b = make_preset("atiyah_f2", {"beta": 0.7}, tau=0.2 + 1.3j, grid_n=16)
    sp = so.induced_structures(b, b.declared_subbundles[0], hm.reference_metric(b))
    assert so.second_form_norm_sq(sp) == pytest.approx(2 * 0.49 * 1.3)
    assert np.allclose(sp.second_form_C.values, 0.7)


def test_verdicts():
    n = 16
    dsum = make_preset("direct_sum", {"degrees": [1, -1]}, grid_n=n)
    v = so.slope_verdict(dsum, hm.reference_metric(dsum))
    assert v.verdict == "unstable-witnessed"
    assert dict(v.witness_slopes)["L(1)"] == pytest.approx(1.0)
    at = make_preset("atiyah_f2", {"beta": 1.0}, grid_n=n)
    assert so.slope_verdict(at, hm.random_metric(at, 2, 0.4)).verdict == "strictly-semistable-witnessed"
    line = make_preset("line_bundle", {"d": 3}, grid_n=n)
    assert so.slope_verdict(line, hm.reference_metric(line)).verdict == "stable-among-witnesses"
    heis = make_preset("heisenberg", {"r": 3, "p": 1}, grid_n=n)
    with pytest.raises(NoWitnesses):
        so.slope_verdict(heis, hm.reference_metric(heis))
    assert "witness_slopes" in v.as_dict()


def test_quotient_slope_and_degrees():
    b = make_preset("direct_sum", {"degrees": [2, -1]}, grid_n=32)
    h = hm.random_metric(b, 3, 0.3)
    incl = b.declared_subbundles[0]
    assert so.quotient_slope(b, incl, h) == pytest.approx(-1.0, abs=1e-9)
    proj = so.orthogonal_projector(b, incl, h)
    assert so.projector_degree(b, h, proj) == pytest.approx(2.0, abs=1e-9)
    assert max(so.weakly_holo_residual(b, h, proj)) < 1e-10


def test_projector_degree_subtracts_second_form():
    # in the Atiyah bundle the sub-line has degree 0 although Tr(pi K) integrates to 2 pi * 2 Vol / (2 pi)
    b = make_preset("atiyah_f2", {"beta": 1.0}, grid_n=32)
    h = hm.reference_metric(b)
    proj = so.orthogonal_projector(b, b.declared_subbundles[0], h)
    assert so.projector_degree(b, h, proj) == pytest.approx(0.0, abs=1e-12)
    bad = np.zeros((32, 32, 2, 2))
    bad[..., 1, 1] = 1.0  # the quotient line is not a holomorphic sub-bundle
    assert so.weakly_holo_residual(b, h, bad)[2] > 0.5


def test_not_injective():
    b = make_preset("atiyah_f2", {"beta": 1.0}, grid_n=8)
    inc = b.declared_subbundles[0]
    from dataclasses import replace
    bad = replace(inc, inclusion_field=MatrixField(np.zeros((8, 8, 2, 1)), covariance="hom"))
    with pytest.raises(NotInjective):
        so.induced_structures(b, bad, hm.reference_metric(b))


def test_sub_degree_matches_hint():
    b = make_preset("extension", {"d1": -1, "d2": -1, "beta": 0.3}, grid_n=32)
    h = hm.random_metric(b, 8, 0.3)
    incl = b.declared_subbundles[0]
    sp = so.induced_structures(b, incl, h)
    assert degree(sp.sub_bundle, sp.sub_metric) == pytest.approx(incl.sub_degree_hint, abs=1e-9)


@pytest.mark.parametrize("u", [-0.7, 0.3, 1.2])
def test_second_form_scales_with_constant_metric(u):
    b = make_preset("atiyah_f2", {"beta": 1.0}, grid_n=8)
    diag = np.broadcast_to(np.diag([np.exp(u), np.exp(-u)]), (8, 8, 2, 2)).copy()
    sp0 = so.induced_structures(b, b.declared_subbundles[0], hm.reference_metric(b))
    sp = so.induced_structures(b, b.declared_subbundles[0], hm.MetricState(b, diag))
    assert so.second_form_norm_sq(sp) == pytest.approx(np.exp(2 * u) * so.second_form_norm_sq(sp0))
