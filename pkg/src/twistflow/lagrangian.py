"""Donaldson Lagrangian: path evaluator, closed eigenvalue form and its identities.

Orientation: for a path h_t from h to k with tangent f_t = f^{h_t, h_t'},

    L(h, k) = int_0^1 int_X Tr((K_t - c) f_t) sigma dt
            = int_0^1 int_X Tr(f_t K_t) sigma dt - c int_X q1(k, h) sigma,

since int_0^1 Tr f_t dt = log det f^{h,k} = q1(k, h).  With this sign the flow
decreases L(h_0, h_t) at rate ||K - c||^2.
"""
from __future__ import annotations

import numpy as np
from scipy.integrate import simpson

from .chern import degree, einstein_constant, mean_curvature
from .errors import BundleMismatch
from .hermitian import MetricPath, MetricState, dagger, geodesic_point, hermitian_part
from .subobjects import dbar_endo, induced_structures, second_form_norm_sq
from .torus import ScalarField, integrate_density

# Sign of the second-fundamental-form term in the Lagrangian splitting along
# 0 -> S -> E -> Q -> 0 with equal slopes:
#   L(h, k) = L_S + L_Q + C_TERM_SIGN * (||C_h||^2 - ||C_k||^2).
# Calibrated once on the rank-2 extension with two non-constant metrics.
C_TERM_SIGN = -1.0


def _einstein(bundle, h) -> float:
    return einstein_constant(bundle, degree(bundle, h))


def q1_field(h: MetricState, k: MetricState) -> ScalarField:
    """log det f^{k,h}, a periodic real function."""
    if h.bundle is not k.bundle:
        raise BundleMismatch("metrics belong to different bundles")
    m = k.inv_sqrt @ h.reduced @ k.inv_sqrt
    lam = np.linalg.eigvalsh(hermitian_part(m))
    return ScalarField(h.geom, np.sum(np.log(lam), axis=-1))


def _trace_pair(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("...ij,...ji->...", x, y))


def lagrangian_path(path: MetricPath, c: float | None = None) -> float:
    """Simpson rule in t of int Tr(f_t K_t) sigma, minus c int q1(k, h) sigma."""
    if path.parts:
        return sum(lagrangian_path(p, c) for p in path.parts)
    bundle = path.h.bundle
    geom = bundle.geom
    c = _einstein(bundle, path.h) if c is None else c
    vals = [integrate_density(_trace_pair(f, mean_curvature(bundle, m).values), geom)
            for m, f in zip(path.samples, path.tangents)]
    q2 = simpson(np.asarray(vals, dtype=float), x=path.nodes)
    q1 = float(np.real(integrate_density(q1_field(path.k, path.h).values, geom)))
    return float(q2 - c * q1)


def psi(x: np.ndarray) -> np.ndarray:
    """(e^x - x - 1) / x^2 with the removable singularity filled in (psi(0) = 1/2)."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-3
    xs = np.where(small, 1.0, x)
    big = np.expm1(xs) - xs
    out = big / xs**2
    ser = 0.5 + x / 6 + x**2 / 24 + x**3 / 120
    return np.where(small, ser, out)


def lagrangian_closed(h0: MetricState, h: MetricState, c: float | None = None) -> float:
    """L(h0, h) from the pointwise spectrum of s = log f^{h0,h}.

    L = int Tr((K(h0) - c) s) sigma + 2 int sum_ab |Y_ab|^2 psi(lam_a - lam_b) sigma,
    where Y is dbar_E s written in an h0-orthonormal eigenframe of s.
    """
    if h0.bundle is not h.bundle:
        raise BundleMismatch("metrics belong to different bundles")
    bundle = h0.bundle
    geom = bundle.geom
    c = _einstein(bundle, h0) if c is None else c
    g, gi = h0.sqrt, h0.inv_sqrt
    lam, u = np.linalg.eigh(hermitian_part(gi @ h.reduced @ gi))
    lam = np.log(lam)
    x = (u * lam[..., None, :]) @ dagger(u)
    s = gi @ x @ g
    k0 = mean_curvature(bundle, h0).values - c * np.eye(bundle.rank)
    first = integrate_density(_trace_pair(k0, s), geom)
    y = dagger(u) @ g @ dbar_endo(bundle, s) @ gi @ u
    weights = psi(lam[..., :, None] - lam[..., None, :])
    second = 2.0 * integrate_density(np.sum(np.abs(y) ** 2 * weights, axis=(-2, -1)), geom)
    return float(np.real(first + second))


def path_point(path: MetricPath, t: float) -> tuple[MetricState, np.ndarray]:
    """(h_t, f^{h_t, h_t'}) at an arbitrary parameter for geodesic and linear paths."""
    if path.kind == "geodesic":
        return geodesic_point(path.h, path.k, t), path.tangents[0]
    if path.kind == "linear":
        m = MetricState(path.h.bundle, (1 - t) * path.h.reduced + t * path.k.reduced)
        return m, m.inverse @ (path.k.reduced - path.h.reduced)
    raise ValueError(f"off-node evaluation is not available for {path.kind!r} paths")


def lagrangian_derivative_check(path: MetricPath, t: float, eps: float = 1e-4,
                                c: float | None = None) -> tuple[float, float]:
    """(central difference of L(h, h_t) in t, int Tr((K_t - c) f_t) sigma)."""
    if not 0.0 < t < 1.0:
        raise ValueError("t must be interior to [0, 1]")
    bundle = path.h.bundle
    c = _einstein(bundle, path.h) if c is None else c
    hp, _ = path_point(path, t + eps)
    hm, _ = path_point(path, t - eps)
    fd = (lagrangian_closed(path.h, hp, c) - lagrangian_closed(path.h, hm, c)) / (2 * eps)
    ht, ft = path_point(path, t)
    kt = mean_curvature(bundle, ht).values - c * np.eye(bundle.rank)
    formula = float(integrate_density(_trace_pair(kt, ft), bundle.geom))
    return float(fd), formula


def lagrangian_decomposition(h: MetricState, k: MetricState, incl) -> dict:
    """Terms of L(h, k) = L_S + L_Q + sign * (||C_h||^2 - ||C_k||^2) for a sub-bundle of equal slope."""
    bundle = h.bundle
    c = _einstein(bundle, h)
    sh = induced_structures(bundle, incl, h)
    sk = induced_structures(bundle, incl, k)
    total = lagrangian_closed(h, k, c)
    ls = lagrangian_closed(sh.sub_metric, _rebind(sk.sub_metric, sh.sub_metric), c)
    lq = lagrangian_closed(sh.quotient_metric, _rebind(sk.quotient_metric, sh.quotient_metric), c)
    ch, ck = second_form_norm_sq(sh), second_form_norm_sq(sk)
    pred = ls + lq + C_TERM_SIGN * (ch - ck)
    return dict(total=total, sub=ls, quotient=lq, c_norm_h=ch, c_norm_k=ck,
                predicted=pred, residual=abs(total - pred))


def _rebind(m: MetricState, like: MetricState) -> MetricState:
    return MetricState(like.bundle, m.reduced)


def l2_norm_sq(bundle, h: MetricState, x: np.ndarray) -> float:
    """int Tr(X X^*) sigma for an endomorphism grid."""
    return float(integrate_density(_trace_pair(x, h.adjoint(x)), bundle.geom))
