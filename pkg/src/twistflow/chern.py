"""Chern connection, curvature, mean curvature and the numbers built from them.

With the Dolbeault operator dbar + A dzbar and metric H, the Chern connection
has (1,0) coefficient

    Gamma = H^{-1} d_z H - H^{-1} A^dagger H,

and the curvature coefficient against dz^dzbar is

    R = d_z A - d_zbar Gamma + [Gamma, A].

Splitting H = H_ref F, Gamma = Gamma_ref + Gamma_per where Gamma_ref is the
diagonal, non-periodic d log h_ref and Gamma_per is periodic; Gamma_ref is
central in the commutant, so it only contributes the constant pi d_j / Im(tau)
to R.  The B-field B = i b sigma = -(b/2) dz^dzbar is then subtracted.
Mean curvature is K = i Lambda R = 2 R (coefficient form).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bundles import BundleSpec, MatrixField, reference_line_metric
from .errors import BadDegree, NotWeakHE
from .hermitian import MetricState, conformal_metric, dagger, endo_norm_sq
from .torus import d_z, d_zbar, grid_mean, integrate_density, solve_laplace
from .twist import TwistDescriptor


def connection_per(bundle: BundleSpec, h: MetricState) -> np.ndarray:
    """Periodic part F^{-1} dF - F^{-1} A^dagger F of the Chern connection."""
    f = h.reduced
    finv = h.inverse
    a = bundle.deformation.values
    return finv @ d_z(f, bundle.geom) - finv @ dagger(a) @ f


def chern_connection(bundle: BundleSpec, h: MetricState) -> MatrixField:
    """Total (1,0) coefficient Gamma_ref + Gamma_per on the grid."""
    gref = bundle.ref_connection_coef[..., :, None] * np.eye(bundle.rank)
    return MatrixField(gref + connection_per(bundle, h), (1, 0), covariance="connection")


@dataclass(frozen=True, eq=False)
class CurvatureField:
    value: MatrixField
    b_applied: TwistDescriptor

    @property
    def coef(self) -> np.ndarray:
        return self.value.values


def curvature_coef(bundle: BundleSpec, h: MetricState, gamma: np.ndarray | None = None) -> np.ndarray:
    """B-corrected curvature coefficient against dz^dzbar, shape (N, N, r, r)."""
    geom = bundle.geom
    a = bundle.deformation.values
    g = connection_per(bundle, h) if gamma is None else gamma
    r = d_z(a, geom) - d_zbar(g, geom) + g @ a - a @ g
    shift = bundle.ref_curvature_coef + 0.5 * bundle.twist.b_coeff
    idx = np.arange(bundle.rank)
    r[..., idx, idx] += shift
    return r


def curvature(bundle: BundleSpec, h: MetricState) -> CurvatureField:
    return CurvatureField(MatrixField(curvature_coef(bundle, h), (1, 1)), bundle.twist)


def mean_curvature(bundle: BundleSpec, h: MetricState) -> MatrixField:
    """K = i Lambda R, an h-Hermitian endomorphism field."""
    return MatrixField(2.0 * curvature_coef(bundle, h))


def degree(bundle: BundleSpec, h: MetricState, kmat: np.ndarray | None = None) -> float:
    """deg = integral of (i / 2 pi) Tr R = (1 / 2 pi) integral of Tr K sigma."""
    k = mean_curvature(bundle, h).values if kmat is None else kmat
    return float(np.real(integrate_density(np.trace(k, axis1=-2, axis2=-1), bundle.geom))) / (2 * np.pi)


def einstein_constant(bundle: BundleSpec, deg: float) -> float:
    return 2 * np.pi * deg / (bundle.rank * bundle.geom.volume)


def analytic_einstein_constant(bundle: BundleSpec) -> float:
    """c from the degrees and B alone (the degree is metric independent)."""
    deg = sum(bundle.degrees) + bundle.rank * bundle.twist.b_coeff * bundle.geom.volume / (2 * np.pi)
    return einstein_constant(bundle, deg)


def he_defect(bundle: BundleSpec, h: MetricState, kmat: np.ndarray | None = None):
    """(K - c id, c) on the grid."""
    k = mean_curvature(bundle, h).values if kmat is None else kmat
    c = einstein_constant(bundle, degree(bundle, h, k))
    return k - c * np.eye(bundle.rank), c


def trace_sq(x: np.ndarray) -> np.ndarray:
    """Pointwise Tr(X^2), real for h-Hermitian X."""
    return np.real(np.einsum("...ij,...ji->...", x, x))


@dataclass(frozen=True)
class BundleReport:
    degree: float
    slope: float
    einstein_constant: float
    he_residual_sup: float
    he_residual_l2: float

    def as_dict(self) -> dict:
        return dict(degree=self.degree, slope=self.slope, einstein_constant=self.einstein_constant,
                    he_residual_sup=self.he_residual_sup, he_residual_l2=self.he_residual_l2)


def bundle_report(bundle: BundleSpec, h: MetricState) -> BundleReport:
    k = mean_curvature(bundle, h).values
    deg = degree(bundle, h, k)
    c = einstein_constant(bundle, deg)
    dk = k - c * np.eye(bundle.rank)
    sq = trace_sq(dk)
    return BundleReport(deg, deg / bundle.rank, c, float(np.max(sq)),
                        float(np.sqrt(max(integrate_density(sq, bundle.geom), 0.0))))


def chern_form_poly(x, k: int) -> complex:
    """Degree-k part of det(I - X / (2 pi i)), i.e. e_k(eigenvalues) * (-1 / (2 pi i))^k."""
    x = np.atleast_2d(np.asarray(x, dtype=complex))
    r = x.shape[0]
    if not 1 <= k <= r:
        raise BadDegree(f"k must lie in [1, {r}], got {k}")
    coeffs = np.poly(x)  # det(tI - X) = sum (-1)^j e_j t^{r-j}
    e_k = (-1) ** k * coeffs[k]
    return complex(e_k * (-1.0 / (2j * np.pi)) ** k)


def conformal_normalize(bundle: BundleSpec, h: MetricState, weak_tol: float = 1e-6) -> MetricState:
    """Turn a weak HE metric into an HE one by a conformal factor (one Poisson solve)."""
    k = mean_curvature(bundle, h).values
    r = bundle.rank
    phi = np.real(np.trace(k, axis1=-2, axis2=-1)) / r
    off = k - phi[..., None, None] * np.eye(r)
    if float(np.max(np.linalg.norm(off, ord=2, axis=(-2, -1)))) > weak_tol:
        raise NotWeakHE("mean curvature is not pointwise a multiple of the identity")
    c = float(grid_mean(phi))
    u = np.real(solve_laplace(c - phi, bundle.geom))
    return conformal_metric(h, u)


def mean_curvature_variation(bundle: BundleSpec, h: MetricState, f: np.ndarray) -> np.ndarray:
    """Linearization of K at h in the direction h -> h(1 + s f).

    Equals i Lambda dbar_E D'(f) = -2 (d_zbar y + [A, y]) with y = d_z f + [Gamma, f].
    """
    geom = bundle.geom
    g = connection_per(bundle, h)
    a = bundle.deformation.values
    y = d_z(f, geom) + g @ f - f @ g
    return -2.0 * (d_zbar(y, geom) + a @ y - y @ a)


def reference_curvature_fd(d: int, geom, step: float = 1e-2) -> np.ndarray:
    """Finite-difference oracle for -d_zbar d_z log h_d at the grid points.

    Uses the five-point Laplacian in Cartesian coordinates on the analytic
    reference metric; -d_z d_zbar = -Laplacian / 4.
    """
    z = geom.z
    tau = geom.tau

    def logh(w):
        return np.log(reference_line_metric(d, w, tau))

    lap = (logh(z + step) + logh(z - step) + logh(z + 1j * step) + logh(z - 1j * step) - 4 * logh(z)) / step**2
    return -0.25 * lap
