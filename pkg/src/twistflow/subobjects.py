"""Sub-bundles, quotients and their second fundamental forms.

Sub-bundles are coordinate sub-bundles S = span(e_j, j in columns) that the
Dolbeault operator preserves; the quotient Q is realized inside E as the
h-orthogonal complement through the splitting phi.  In reduced form:

    h^S = F[cols, cols],   phi = e_comp - f (h^S)^{-1} F[cols, comp],   h^Q = phi^dagger F phi,
    pi = (h^S)^{-1} f^dagger F        (h-orthogonal projection onto S),
    A  = p (D' f)       in A^{1,0}(Hom(S, Q)),
    C  = pi (dbar_E phi) in A^{0,1}(Hom(Q, S)).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bundles import BundleSpec, InclusionSpec, MatrixField, restrict
from .chern import connection_per, curvature_coef, degree, mean_curvature
from .errors import NoWitnesses, NotInjective
from .hermitian import MetricState, dagger, endo_norm_sq
from .torus import d_z, d_zbar, integrate_density


@dataclass(frozen=True, eq=False)
class SplitStructure:
    sub_bundle: BundleSpec
    quotient_bundle: BundleSpec
    sub_metric: MetricState
    quotient_metric: MetricState
    inclusion: np.ndarray  # f, r x r_S
    quotient_map: np.ndarray  # p, r_Q x r
    projection_to_sub: MatrixField  # pi, r_S x r
    splitting_from_quotient: MatrixField  # phi, r x r_Q
    second_form_A: MatrixField  # (1,0), Hom(S, Q)
    second_form_C: MatrixField  # (0,1), Hom(Q, S)

    @property
    def c_adjoint(self) -> np.ndarray:
        """c^* = (h^Q)^{-1} c^dagger h^S, the metric adjoint of C as a Hom(S, Q) coefficient."""
        c = self.second_form_C.values
        return self.quotient_metric.inverse @ dagger(c) @ self.sub_metric.reduced

    def exactness_residual(self) -> float:
        """max of |pi f - id_S| and |p phi - id_Q|."""
        pi = self.projection_to_sub.values
        phi = self.splitting_from_quotient.values
        e1 = np.max(np.abs(pi @ self.inclusion - np.eye(self.inclusion.shape[1])))
        e2 = np.max(np.abs(self.quotient_map @ phi - np.eye(phi.shape[-1])))
        return float(max(e1, e2))


def _check_injective(incl: InclusionSpec):
    sv = np.linalg.svd(incl.inclusion_field.values, compute_uv=False)
    if np.any(sv[..., -1] < 1e-10) or sv.shape[-1] != incl.sub_rank:
        raise NotInjective("inclusion drops rank somewhere on the grid")


def induced_structures(bundle: BundleSpec, incl: InclusionSpec, h: MetricState) -> SplitStructure:
    _check_injective(incl)
    cols = list(incl.columns)
    comp = [j for j in range(bundle.rank) if j not in cols]
    sub = restrict(bundle, cols, f"S[{incl.label or cols}]")
    quo = restrict(bundle, comp, f"Q[{incl.label or cols}]")
    geom = bundle.geom
    fmat = h.reduced
    f = np.eye(bundle.rank)[:, cols]
    p = np.eye(bundle.rank)[comp, :]

    hs = MetricState(sub, fmat[..., cols, :][..., :, cols])
    cross = fmat[..., cols, :][..., :, comp]
    phi = np.eye(bundle.rank)[:, comp] - f @ hs.inverse @ cross
    hq = MetricState(quo, dagger(phi) @ fmat @ phi)
    pi = hs.inverse @ f.T @ fmat

    a_full = bundle.deformation.values
    g = connection_per(bundle, h)
    gs = connection_per(sub, hs)
    second_a = p @ (g @ f - f @ gs)
    dphi = d_zbar(phi, geom) + a_full @ phi - phi @ quo.deformation.values
    second_c = pi @ dphi
    return SplitStructure(sub, quo, hs, hq, f, p, MatrixField(pi, covariance="hom"),
                          MatrixField(phi, covariance="hom"), MatrixField(second_a, (1, 0), "hom"),
                          MatrixField(second_c, (0, 1), "hom"))


def gauss_codazzi_blocks(bundle: BundleSpec, incl: InclusionSpec, h: MetricState):
    """(curvature in the adapted frame [f, phi], block reconstruction from S, Q and C).

    With C = c dzbar and C^* = c^* dz, in dz^dzbar coefficients:
    C^C^* = -c c^*, C^*^C = c^* c, D'C = d_z c + Gamma_S c - c Gamma_Q and
    D''C^* = -(d_zbar c^* + A_Q c^* - c^* A_S).
    """
    sp = induced_structures(bundle, incl, h)
    geom = bundle.geom
    phi = sp.splitting_from_quotient.values
    frame = np.concatenate([np.broadcast_to(sp.inclusion, phi.shape[:2] + sp.inclusion.shape), phi], axis=-1)
    direct = np.linalg.solve(frame, curvature_coef(bundle, h) @ frame)

    c = sp.second_form_C.values
    cs = sp.c_adjoint
    gs = connection_per(sp.sub_bundle, sp.sub_metric)
    gq = connection_per(sp.quotient_bundle, sp.quotient_metric)
    a_s = sp.sub_bundle.deformation.values
    a_q = sp.quotient_bundle.deformation.values
    b11 = curvature_coef(sp.sub_bundle, sp.sub_metric) + c @ cs  # R_S - C^C^*
    b12 = d_z(c, geom) + gs @ c - c @ gq  # D'C
    b21 = d_zbar(cs, geom) + a_q @ cs - cs @ a_s  # -D''C^*
    b22 = curvature_coef(sp.quotient_bundle, sp.quotient_metric) - cs @ c  # R_Q - C^*^C
    top = np.concatenate([b11, b12], axis=-1)
    bottom = np.concatenate([b21, b22], axis=-1)
    return direct, np.concatenate([top, bottom], axis=-2)


def gauss_codazzi_residual(bundle: BundleSpec, incl: InclusionSpec, h: MetricState) -> float:
    direct, blocks = gauss_codazzi_blocks(bundle, incl, h)
    return float(np.max(np.abs(direct - blocks)))


def second_form_norm_sq(sp: SplitStructure) -> float:
    """||C||^2 = 2 * integral of Tr(c c^*) sigma (the dz^dzbar pairing made positive)."""
    c = sp.second_form_C.values
    dens = np.real(np.trace(c @ sp.c_adjoint, axis1=-2, axis2=-1))
    return 2.0 * float(np.real(integrate_density(dens, sp.sub_bundle.geom)))


# stability against declared witnesses

@dataclass(frozen=True)
class StabilityVerdict:
    verdict: str
    bundle_slope: float
    witness_slopes: tuple[tuple[str, float], ...]

    def as_dict(self) -> dict:
        return dict(verdict=self.verdict, bundle_slope=self.bundle_slope,
                    witness_slopes=[{"witness": w, "slope": s} for w, s in self.witness_slopes])


def slope_verdict(bundle: BundleSpec, h: MetricState, tol: float = 1e-8) -> StabilityVerdict:
    mu = degree(bundle, h) / bundle.rank
    witnesses = bundle.declared_subbundles
    if bundle.rank == 1:
        return StabilityVerdict("stable-among-witnesses", mu, ())
    if not witnesses:
        raise NoWitnesses(f"{bundle.name} declares no sub-bundles to test against")
    slopes = []
    for incl in witnesses:
        sp = induced_structures(bundle, incl, h)
        slopes.append((incl.label or str(incl.columns), degree(sp.sub_bundle, sp.sub_metric) / incl.sub_rank))
    worst = max(s for _, s in slopes)
    if worst > mu + tol:
        verdict = "unstable-witnessed"
    elif worst > mu - tol:
        verdict = "strictly-semistable-witnessed"
    else:
        verdict = "stable-among-witnesses"
    return StabilityVerdict(verdict, mu, tuple(slopes))


def quotient_slope(bundle: BundleSpec, incl: InclusionSpec, h: MetricState) -> float:
    sp = induced_structures(bundle, incl, h)
    return degree(sp.quotient_bundle, sp.quotient_metric) / sp.quotient_bundle.rank


# weakly holomorphic sub-bundles

def dbar_endo(bundle: BundleSpec, x: np.ndarray) -> np.ndarray:
    """Coefficient of dbar_E X = (d_zbar X + [A, X]) dzbar."""
    a = bundle.deformation.values
    return d_zbar(x, bundle.geom) + a @ x - x @ a


def weakly_holo_residual(bundle: BundleSpec, h: MetricState, proj) -> tuple[float, float, float]:
    """Sup norms of pi - pi^*, pi - pi^2 and (id - pi) dbar_E(pi)."""
    p = proj.values if isinstance(proj, MatrixField) else np.asarray(proj)
    eye = np.eye(bundle.rank)

    def sup(x):
        return float(np.max(np.linalg.norm(x, ord=2, axis=(-2, -1))))

    return sup(p - h.adjoint(p)), sup(p - p @ p), sup((eye - p) @ dbar_endo(bundle, p))


def projector_degree(bundle: BundleSpec, h: MetricState, proj) -> float:
    """Chern-Weil degree of the image of an h-orthogonal projector.

    deg = (1/2 pi) int Tr(pi K) sigma - (1/pi) int |dbar_E pi|_h^2 sigma.
    """
    p = proj.values if isinstance(proj, MatrixField) else np.asarray(proj)
    k = mean_curvature(bundle, h).values
    geom = bundle.geom
    tr = np.real(np.trace(p @ k, axis1=-2, axis2=-1))
    dp = dbar_endo(bundle, p)
    return float(integrate_density(tr, geom)) / (2 * np.pi) - float(integrate_density(endo_norm_sq(h, dp), geom)) / np.pi


def orthogonal_projector(bundle: BundleSpec, incl: InclusionSpec, h: MetricState) -> np.ndarray:
    """Grid of f pi, the h-orthogonal projector of E onto the sub-bundle."""
    sp = induced_structures(bundle, incl, h)
    return sp.inclusion @ sp.projection_to_sub.values
