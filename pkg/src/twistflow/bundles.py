"""Twisted holomorphic bundles on the torus in factor-of-automorphy form.

Every bundle here has multipliers of the shape

    a_1(z)   = M_1,
    a_tau(z) = M_tau * diag(exp(-pi i d_j tau - 2 pi i d_j z)),

with constant unitary ``M_1``, ``M_tau`` commuting with ``diag(d)``.  The
per-index degrees ``d_j`` fix a reference metric ``H_ref = diag(h_{d_j})``
with ``h_d(z) = exp(-2 pi d Im(z)^2 / Im(tau))``, and every metric is stored as
``H = H_ref F`` with ``F`` strictly periodic.  ``F``, endomorphisms and the
Dolbeault deformation ``A`` all live in the commutant of the multipliers, which
is what makes their grid values periodic (see :func:`commutant`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.linalg import block_diag, null_space

from .errors import BundleMismatch, ShapeMismatch, TwistMismatch, UnknownPreset, UnsupportedParams
from .torus import BIDEGREES, TorusGeometry, make_torus
from .twist import TRIVIAL_TWIST, TwistDescriptor, root_of_unity, twist_compose

MAX_PRESET_RANK = 8


@dataclass(frozen=True, eq=False)
class MatrixField:
    """Grid of p x q complex matrices, values shaped (N, N, p, q)."""

    values: np.ndarray
    bidegree: tuple[int, int] = (0, 0)
    covariance: str = "end"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.ndim != 4:
            raise ShapeMismatch(f"matrix field needs shape (N, N, p, q), got {vals.shape}")
        if tuple(self.bidegree) not in BIDEGREES:
            raise ValueError(f"unknown bidegree {self.bidegree!r}")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "bidegree", tuple(self.bidegree))

    @property
    def shape(self):
        return self.values.shape[2:]

    @property
    def grid_n(self) -> int:
        return self.values.shape[0]

    def _like(self, values, bidegree=None):
        return MatrixField(values, self.bidegree if bidegree is None else bidegree, self.covariance)

    def __add__(self, other: "MatrixField") -> "MatrixField":
        return self._like(self.values + other.values)

    def __sub__(self, other: "MatrixField") -> "MatrixField":
        return self._like(self.values - other.values)

    def __mul__(self, c) -> "MatrixField":
        return self._like(self.values * c)

    __rmul__ = __mul__

    def __matmul__(self, other: "MatrixField") -> "MatrixField":
        return self._like(self.values @ other.values)

    def trace(self) -> np.ndarray:
        return np.trace(self.values, axis1=-2, axis2=-1)

    def sup_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.values, ord=2, axis=(-2, -1))))

    @classmethod
    def constant(cls, mat, grid_n: int, bidegree=(0, 0), covariance="end") -> "MatrixField":
        mat = np.asarray(mat, dtype=complex)
        return cls(np.broadcast_to(mat, (grid_n, grid_n) + mat.shape).copy(), bidegree, covariance)

    @classmethod
    def identity(cls, r: int, grid_n: int) -> "MatrixField":
        return cls.constant(np.eye(r), grid_n)


@dataclass(frozen=True)
class InclusionSpec:
    """Coordinate sub-bundle spanned by ``columns`` of the working frame."""

    sub_rank: int
    inclusion_field: MatrixField
    sub_degree_hint: float
    columns: tuple[int, ...]
    label: str = ""


def coordinate_inclusion(rank: int, columns, grid_n: int, degree_hint: float, label: str = "") -> InclusionSpec:
    cols = tuple(int(c) for c in columns)
    emb = np.eye(rank)[:, list(cols)]
    return InclusionSpec(len(cols), MatrixField.constant(emb, grid_n, covariance="hom"), float(degree_hint), cols, label)


def line_factor(d, z, tau: complex) -> np.ndarray:
    """Scalar automorphy factor of L_d along tau: exp(-pi i d tau - 2 pi i d z)."""
    return np.exp(-1j * np.pi * d * tau - 2j * np.pi * d * z)


def reference_line_metric(d, z, tau: complex) -> np.ndarray:
    return np.exp(-2 * np.pi * d * np.imag(z) ** 2 / tau.imag)


@dataclass(frozen=True, eq=False)
class BundleSpec:
    geom: TorusGeometry
    rank: int
    mult_matrices: tuple[np.ndarray, np.ndarray]
    degrees: tuple[int, ...]
    deformation: MatrixField
    twist: TwistDescriptor = TRIVIAL_TWIST
    reference_metric_id: str = "gaussian"
    declared_subbundles: tuple[InclusionSpec, ...] = ()
    name: str = ""

    def __post_init__(self):
        r = int(self.rank)
        m1, mt = (np.asarray(m, dtype=complex) for m in self.mult_matrices)
        if m1.shape != (r, r) or mt.shape != (r, r) or len(self.degrees) != r:
            raise ShapeMismatch(f"multiplier data inconsistent with rank {r}")
        n = self.geom.grid_n
        if self.deformation.values.shape != (n, n, r, r):
            raise ShapeMismatch(f"deformation must have shape {(n, n, r, r)}")
        dmat = np.diag(np.asarray(self.degrees, dtype=float))
        for m in (m1, mt):
            if not np.allclose(m @ m.conj().T, np.eye(r), atol=1e-12):
                raise UnsupportedParams("multiplier matrices must be unitary")
            if not np.allclose(m @ dmat, dmat @ m, atol=1e-12):
                raise UnsupportedParams("multiplier matrices must preserve the degree splitting")
        object.__setattr__(self, "mult_matrices", (m1, mt))
        object.__setattr__(self, "degrees", tuple(int(d) for d in self.degrees))

    # automorphy data
    def multiplier(self, which: str, z) -> np.ndarray:
        """a_1(z) or a_tau(z) evaluated at arbitrary points; shape z.shape + (r, r)."""
        z = np.asarray(z, dtype=complex)
        m1, mt = self.mult_matrices
        if which == "1":
            return np.broadcast_to(m1, z.shape + m1.shape).copy()
        if which == "tau":
            fac = np.stack([line_factor(d, z, self.geom.tau) for d in self.degrees], axis=-1)
            return mt * fac[..., None, :]
        raise ValueError(f"generator must be '1' or 'tau', got {which!r}")

    @property
    def multipliers(self) -> tuple[MatrixField, MatrixField]:
        z = self.geom.z
        return (MatrixField(self.multiplier("1", z), covariance="multiplier"),
                MatrixField(self.multiplier("tau", z), covariance="multiplier"))

    # reference metric
    def reference_diag(self, z=None) -> np.ndarray:
        z = self.geom.z if z is None else np.asarray(z)
        return np.stack([reference_line_metric(d, z, self.geom.tau) for d in self.degrees], axis=-1)

    @cached_property
    def ref_curvature_coef(self) -> np.ndarray:
        """Constant (1,1) coefficients pi d_j / Im(tau) of the reference curvature."""
        return np.pi * np.asarray(self.degrees, dtype=float) / self.geom.tau.imag

    @cached_property
    def ref_connection_coef(self) -> np.ndarray:
        """d log h_{d_j} = 2 pi i d_j t on the grid, shape (N, N, r). Not periodic."""
        _, t = self.geom.st
        return 2j * np.pi * t[..., None] * np.asarray(self.degrees, dtype=float)

    # commutant
    @cached_property
    def commutant_basis(self) -> np.ndarray:
        return commutant(self)

    @cached_property
    def commutant_dim(self) -> int:
        return self.commutant_basis.shape[0]

    def project_commutant(self, values: np.ndarray) -> np.ndarray:
        basis = self.commutant_basis
        r = self.rank
        if basis.shape[0] == r * r:
            return values
        coef = np.einsum("bij,...ij->...b", basis.conj(), values)
        return np.einsum("...b,bij->...ij", coef, basis)

    def commutant_defect(self, values: np.ndarray) -> float:
        return float(np.max(np.abs(values - self.project_commutant(values)))) if values.size else 0.0

    @property
    def trivial_deformation(self) -> bool:
        return not np.any(self.deformation.values)

    def with_b(self, b_coeff: float) -> "BundleSpec":
        return replace(self, twist=self.twist.with_b(b_coeff))


def commutant(bundle: BundleSpec) -> np.ndarray:
    """Orthonormal (Frobenius) basis of matrices commuting with M_1, M_tau and diag(d).

    These are exactly the constant-coefficient endomorphisms that the
    multipliers leave invariant, so fields valued in this subspace are
    strictly periodic.  The subspace is a *-algebra, hence its orthogonal
    projector commutes with the conjugate transpose.
    """
    r = bundle.rank
    gens = list(bundle.mult_matrices) + [np.diag(np.asarray(bundle.degrees, dtype=complex))]
    eye = np.eye(r)
    rows = [np.kron(g, eye) - np.kron(eye, g.T) for g in gens]
    ns = null_space(np.vstack(rows), rcond=1e-10)
    return ns.T.reshape(-1, r, r)


def _zero_deformation(r: int, n: int) -> MatrixField:
    return MatrixField(np.zeros((n, n, r, r), dtype=complex), (0, 1))


def _line_bundle(geom, d: int, b: float) -> BundleSpec:
    return BundleSpec(geom, 1, (np.eye(1), np.eye(1)), (int(d),), _zero_deformation(1, geom.grid_n),
                      TwistDescriptor(1.0, b), f"gaussian(d={d})", (), f"line_bundle(d={d})")


def _direct_sum(geom, degrees, b: float) -> BundleSpec:
    degrees = tuple(int(d) for d in degrees)
    r = len(degrees)
    if r < 1:
        raise UnsupportedParams("direct_sum needs at least one degree")
    n = geom.grid_n
    subs = tuple(coordinate_inclusion(r, [j], n, d + b * geom.volume / (2 * np.pi), f"L({d})")
                 for j, d in enumerate(degrees)) if r > 1 else ()
    return BundleSpec(geom, r, (np.eye(r), np.eye(r)), degrees, _zero_deformation(r, n),
                      TwistDescriptor(1.0, b), f"gaussian(d={list(degrees)})", subs, f"direct_sum(degrees={list(degrees)})")


def _extension(geom, d1: int, d2: int, beta, b: float, name=None) -> BundleSpec:
    if d1 != d2:
        raise UnsupportedParams(
            "extension classes with d1 != d2 have no constant harmonic representative; only d1 == d2 is supported")
    try:
        beta = complex(beta)
    except TypeError as exc:
        raise UnsupportedParams("extension class beta must be a constant (harmonic) number") from exc
    n = geom.grid_n
    a = np.zeros((2, 2), dtype=complex)
    a[0, 1] = beta
    sub = coordinate_inclusion(2, [0], n, d1 + b * geom.volume / (2 * np.pi), f"L({d1})")
    return BundleSpec(geom, 2, (np.eye(2), np.eye(2)), (int(d1), int(d2)),
                      MatrixField.constant(a, n, (0, 1)), TwistDescriptor(1.0, b),
                      f"gaussian(d={[d1, d2]})", (sub,), name or f"extension(d1={d1},d2={d2},beta={beta})")


def clock_shift(r: int, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Shift S (e_j -> e_{j+1}) and clock C^p; C^p S = e^{2 pi i p / r} S C^p."""
    shift = np.roll(np.eye(r), 1, axis=0).astype(complex)
    clock = np.diag(np.exp(2j * np.pi * np.arange(r) / r))
    return shift, np.linalg.matrix_power(clock, p)


def _heisenberg(geom, r: int, p: int, b: float) -> BundleSpec:
    r, p = int(r), int(p)
    if r < 2 or r > MAX_PRESET_RANK:
        raise UnsupportedParams(f"heisenberg rank must be in [2, {MAX_PRESET_RANK}], got {r}")
    if math.gcd(p, r) != 1:
        raise UnsupportedParams(f"heisenberg needs gcd(p, r) = 1, got p={p}, r={r}")
    shift, clock = clock_shift(r, p)
    return BundleSpec(geom, r, (shift, clock), (0,) * r, _zero_deformation(r, geom.grid_n),
                      TwistDescriptor(root_of_unity(p, r), b), "flat", (), f"heisenberg(r={r},p={p})")


PRESET_KINDS = ("line_bundle", "direct_sum", "extension", "atiyah_f2", "heisenberg")


def make_preset(kind: str, params: dict | None = None, *, geom: TorusGeometry | None = None,
                tau: complex = 1j, grid_n: int = 64, b_coeff: float = 0.0) -> BundleSpec:
    """Build a preset bundle by name; see ``PRESET_KINDS`` for the catalog."""
    params = dict(params or {})
    geom = geom or make_torus(tau, grid_n)
    b = float(b_coeff)

    def take(*names):
        missing = [nm for nm in names if nm not in params]
        if missing:
            raise UnsupportedParams(f"{kind} is missing parameter(s) {missing}")
        extra = set(params) - set(names)
        if extra:
            raise UnsupportedParams(f"{kind} got unexpected parameter(s) {sorted(extra)}")
        return [params[nm] for nm in names]

    if kind == "line_bundle":
        (d,) = take("d")
        return _line_bundle(geom, int(d), b)
    if kind == "direct_sum":
        (degrees,) = take("degrees")
        if len(degrees) > MAX_PRESET_RANK:
            raise UnsupportedParams(f"rank above {MAX_PRESET_RANK} is not supported")
        return _direct_sum(geom, degrees, b)
    if kind == "extension":
        d1, d2, beta = take("d1", "d2", "beta")
        return _extension(geom, int(d1), int(d2), beta, b)
    if kind == "atiyah_f2":
        (beta,) = take("beta")
        if complex(beta) == 0:
            raise UnsupportedParams("atiyah_f2 needs a nonzero extension class")
        return _extension(geom, 0, 0, beta, b, name=f"atiyah_f2(beta={beta})")
    if kind == "heisenberg":
        r, p = take("r", "p")
        return _heisenberg(geom, r, p, b)
    raise UnknownPreset(f"unknown preset {kind!r}; known: {', '.join(PRESET_KINDS)}")


# bundle operations

def _same_geom(b1: BundleSpec, b2: BundleSpec):
    if b1.geom != b2.geom:
        raise BundleMismatch("bundles live on different tori or grids")


def grid_kron(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pointwise Kronecker product of two stacks of matrices."""
    out = np.einsum("...ij,...kl->...ikjl", x, y)
    s = out.shape
    return out.reshape(s[:-4] + (s[-4] * s[-3], s[-2] * s[-1]))


def grid_block_diag(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    p, q = x.shape[-2:]
    u, v = y.shape[-2:]
    out = np.zeros(x.shape[:-2] + (p + u, q + v), dtype=np.result_type(x, y))
    out[..., :p, :q] = x
    out[..., p:, q:] = y
    return out


def bundle_dual(b: BundleSpec) -> BundleSpec:
    """E^*: multipliers a^{-T}, deformation -A^T, twist inverted, reference metric inverted."""
    m1, mt = b.mult_matrices
    a = -np.swapaxes(b.deformation.values, -1, -2)
    return BundleSpec(b.geom, b.rank, (m1.conj(), mt.conj()), tuple(-d for d in b.degrees),
                      MatrixField(a, (0, 1)), twist_compose(b.twist, op="dual"),
                      f"dual({b.reference_metric_id})", (), f"dual({b.name})")


def bundle_dsum(b1: BundleSpec, b2: BundleSpec) -> BundleSpec:
    _same_geom(b1, b2)
    if not b1.twist.same_class(b2.twist):
        raise TwistMismatch(f"cannot add bundles with twists {b1.twist} and {b2.twist}")
    r1, r2 = b1.rank, b2.rank
    mults = tuple(block_diag(x, y) for x, y in zip(b1.mult_matrices, b2.mult_matrices))
    a = grid_block_diag(b1.deformation.values, b2.deformation.values)
    n = b1.geom.grid_n
    subs = (coordinate_inclusion(r1 + r2, range(r1), n, _degree_hint(b1), b1.name),
            coordinate_inclusion(r1 + r2, range(r1, r1 + r2), n, _degree_hint(b2), b2.name))
    return BundleSpec(b1.geom, r1 + r2, mults, b1.degrees + b2.degrees, MatrixField(a, (0, 1)), b1.twist,
                      f"dsum({b1.reference_metric_id},{b2.reference_metric_id})", subs,
                      f"dsum({b1.name},{b2.name})")


def bundle_tensor(b1: BundleSpec, b2: BundleSpec) -> BundleSpec:
    _same_geom(b1, b2)
    mults = tuple(np.kron(x, y) for x, y in zip(b1.mult_matrices, b2.mult_matrices))
    degrees = tuple(d1 + d2 for d1 in b1.degrees for d2 in b2.degrees)
    i1 = np.eye(b1.rank)
    i2 = np.eye(b2.rank)
    a = grid_kron(b1.deformation.values, i2) + grid_kron(i1, b2.deformation.values)
    return BundleSpec(b1.geom, b1.rank * b2.rank, mults, degrees, MatrixField(a, (0, 1)),
                      twist_compose(b1.twist, b2.twist, "tensor"),
                      f"tensor({b1.reference_metric_id},{b2.reference_metric_id})", (),
                      f"tensor({b1.name},{b2.name})")


def bundle_end(b: BundleSpec) -> BundleSpec:
    return bundle_tensor(bundle_dual(b), b)


def _degree_hint(b: BundleSpec) -> float:
    return float(sum(b.degrees)) + b.rank * b.twist.b_coeff * b.geom.volume / (2 * np.pi)


def restrict(bundle: BundleSpec, columns, name: str = "") -> BundleSpec:
    """Bundle carried by a set of frame coordinates (sub-bundle or quotient).

    The multipliers must preserve the span of ``columns`` and the deformation
    is compressed to the corresponding block.
    """
    cols = list(columns)
    comp = [j for j in range(bundle.rank) if j not in cols]
    for m in bundle.mult_matrices:
        if comp and np.max(np.abs(m[np.ix_(comp, cols)])) > 1e-12:
            raise UnsupportedParams("multipliers do not preserve the coordinate sub-bundle")
    a = bundle.deformation.values[..., cols, :][..., :, cols]
    mults = tuple(m[np.ix_(cols, cols)] for m in bundle.mult_matrices)
    return BundleSpec(bundle.geom, len(cols), mults, tuple(bundle.degrees[j] for j in cols),
                      MatrixField(a, (0, 1)), bundle.twist, bundle.reference_metric_id, (),
                      name or f"{bundle.name}[{cols}]")


def seam_residual(fld: MatrixField, bundle: BundleSpec) -> float:
    """Sup defect of T(z + lambda) = a_lambda(z) T(z) a_lambda(z)^{-1} over both seams.

    Grid values are periodic, so T(z + lambda) is read off by index wraparound,
    which for a field on the fundamental domain is just T(z) itself.
    """
    vals = fld.values
    n = bundle.geom.grid_n
    if fld.covariance == "scalar":
        if vals.shape[:2] != (n, n):
            raise ShapeMismatch("scalar field does not match the grid")
        return 0.0
    if vals.shape != (n, n, bundle.rank, bundle.rank):
        raise ShapeMismatch(f"field shape {vals.shape} does not match bundle rank {bundle.rank}")
    z = bundle.geom.z
    worst = 0.0
    for which in ("1", "tau"):
        a = bundle.multiplier(which, z)
        moved = a @ vals @ np.linalg.inv(a)
        # index j + N wraps to j, so the translated sample is vals itself
        worst = max(worst, float(np.max(np.abs(vals - moved))))
    return worst


def reference_seam_residual(bundle: BundleSpec) -> float:
    """Relative defect of H_ref(z + lambda) = a^{-*} H_ref(z) a^{-1}, evaluated analytically."""
    z = bundle.geom.z
    worst = 0.0
    for which, lam in (("1", 1.0), ("tau", bundle.geom.tau)):
        a = bundle.multiplier(which, z)
        h = bundle.reference_diag(z)
        hz = np.einsum("...i,ij->...ij", h, np.eye(bundle.rank))
        ainv = np.linalg.inv(a)
        rhs = np.swapaxes(ainv.conj(), -1, -2) @ hz @ ainv
        lhs = np.einsum("...i,ij->...ij", bundle.reference_diag(z + lam), np.eye(bundle.rank))
        scale = np.max(np.abs(rhs), axis=(-2, -1))
        worst = max(worst, float(np.max(np.max(np.abs(lhs - rhs), axis=(-2, -1)) / scale)))
    return worst
