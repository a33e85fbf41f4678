import numpy as np
import pytest

from twistflow.bundles import (MatrixField, bundle_dsum, bundle_dual, bundle_end, bundle_tensor, clock_shift,
                               coordinate_inclusion, grid_block_diag, grid_kron, make_preset,
                               reference_seam_residual, restrict, seam_residual)
from twistflow.errors import ShapeMismatch, TwistMismatch, UnknownPreset, UnsupportedParams


def test_matrix_field_ops():
    a = MatrixField.identity(2, 8)
    b = a * 3.0
    assert np.allclose((a + b).trace(), 8.0)
    assert np.allclose((b @ b).values[0, 0], 9 * np.eye(2))
    assert (b - a).sup_norm() == pytest.approx(2.0)
    assert a.grid_n == 8 and a.shape == (2, 2)
    with pytest.raises(ShapeMismatch):
        MatrixField(np.zeros((8, 8, 2)))


@pytest.mark.parametrize("kind,params,err", [
    ("torus_knot", {}, UnknownPreset),
    ("extension", {"d1": 1, "d2": 0, "beta": 1.0}, UnsupportedParams),
    ("atiyah_f2", {"beta": 0.0}, UnsupportedParams),
    ("heisenberg", {"r": 4, "p": 2}, UnsupportedParams),
    ("heisenberg", {"r": 9, "p": 1}, UnsupportedParams),
    ("direct_sum", {"degrees": [0] * 9}, UnsupportedParams),
    ("line_bundle", {}, UnsupportedParams),
    ("line_bundle", {"d": 1, "e": 2}, UnsupportedParams),
])
def test_preset_errors(kind, params, err):
    with pytest.raises(err):
        make_preset(kind, params, grid_n=8)


@pytest.mark.parametrize("kind,params,dim", [
    ("line_bundle", {"d": 3}, 1),
    ("direct_sum", {"degrees": [1, -1]}, 2),
    ("direct_sum", {"degrees": [1, 1]}, 4),
    ("atiyah_f2", {"beta": 1.0}, 4),
    ("heisenberg", {"r": 3, "p": 1}, 1),
])
def test_commutant_dimension(kind, params, dim):
    b = make_preset(kind, params, grid_n=8)
    assert b.commutant_dim == dim
    basis = b.commutant_basis
    gram = np.einsum("aij,bij->ab", basis.conj(), basis)
    assert np.allclose(gram, np.eye(dim))


def test_clock_shift_relation():
    for r, p in [(2, 1), (3, 2), (5, 2)]:
        s, c = clock_shift(r, p)
        assert np.allclose(c @ s, np.exp(2j * np.pi * p / r) * s @ c)


def test_declared_witnesses():
    dsum = make_preset("direct_sum", {"degrees": [1, -1]}, grid_n=8)
    assert [w.columns for w in dsum.declared_subbundles] == [(0,), (1,)]
    atiyah = make_preset("atiyah_f2", {"beta": 1.0}, grid_n=8)
    assert [w.columns for w in atiyah.declared_subbundles] == [(0,)]
    assert make_preset("heisenberg", {"r": 2, "p": 1}, grid_n=8).declared_subbundles == ()


def test_dual_tensor_dsum_data():
    e = make_preset("atiyah_f2", {"beta": 1.0}, grid_n=8)
    l2 = make_preset("line_bundle", {"d": 2}, grid_n=8)
    d = bundle_dual(l2)
    assert d.degrees == (-2,)
    t = bundle_tensor(e, l2)
    assert t.rank == 2 and t.degrees == (2, 2)
    assert np.allclose(t.deformation.values, e.deformation.values)
    s = bundle_dsum(e, e)
    assert s.rank == 4 and len(s.declared_subbundles) == 2
    end = bundle_end(make_preset("heisenberg", {"r": 3, "p": 1}, grid_n=8))
    assert end.rank == 9 and abs(end.twist.epsilon - 1) < 1e-12


def test_dsum_needs_same_twist():
    h = make_preset("heisenberg", {"r": 2, "p": 1}, grid_n=8)
    l0 = make_preset("line_bundle", {"d": 0}, grid_n=8)
    with pytest.raises(TwistMismatch):
        bundle_dsum(h, l0)


def test_grid_helpers():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(4, 4, 2, 2))
    y = rng.normal(size=(4, 4, 3, 3))
    k = grid_kron(x, y)
    assert np.allclose(k[1, 2], np.kron(x[1, 2], y[1, 2]))
    bd = grid_block_diag(x, y)
    assert np.allclose(bd[0, 0, :2, :2], x[0, 0]) and np.allclose(bd[0, 0, 2:, 2:], y[0, 0])
    assert not np.any(bd[..., :2, 2:])


def test_restrict_and_inclusion():
    e = make_preset("extension", {"d1": 1, "d2": 1, "beta": 0.5}, grid_n=8)
    s = restrict(e, [0])
    q = restrict(e, [1])
    assert s.rank == 1 and q.rank == 1 and not np.any(s.deformation.values)
    inc = coordinate_inclusion(2, [0], 8, 1.0)
    assert inc.sub_rank == 1 and inc.inclusion_field.shape == (2, 1)
    h = make_preset("heisenberg", {"r": 2, "p": 1}, grid_n=8)
    with pytest.raises(UnsupportedParams):
        restrict(h, [0])


def test_seam_residuals():
    h = make_preset("heisenberg", {"r": 3, "p": 1}, grid_n=8)
    e12 = np.zeros((8, 8, 3, 3), dtype=complex)
    e12[..., 0, 1] = 1.0
    assert seam_residual(MatrixField(e12), h) > 1.0
    assert seam_residual(MatrixField.identity(3, 8), h) < 1e-12
    assert seam_residual(MatrixField(np.ones((8, 8, 1, 1)), covariance="scalar"), h) == 0.0
    for kind, params in [("line_bundle", {"d": 2}), ("direct_sum", {"degrees": [1, -2]}),
                         ("heisenberg", {"r": 3, "p": 1})]:
        assert reference_seam_residual(make_preset(kind, params, tau=0.3 + 1.1j, grid_n=16)) < 1e-12


def test_multiplier_shapes():
    b = make_preset("direct_sum", {"degrees": [1, -1]}, grid_n=8)
    a1, at = b.multipliers
    assert a1.shape == (2, 2) and at.values.shape == (8, 8, 2, 2)
    with pytest.raises(ValueError):
        b.multiplier("2", b.geom.z)
