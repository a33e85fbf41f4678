"""Hermitian metrics and forms, the form/endomorphism dictionary and metric paths.

Metrics and forms are stored reduced: a metric is ``H = H_ref F`` and a form is
``V = H_ref W``, with ``F`` and ``W`` periodic commutant-valued grids.  The
dictionary then reads f^{h,v} = H^{-1} V = F^{-1} W, and the metric adjoint of
an endomorphism X is F^{-1} X^dagger F; the reference factor never enters
because it is central in the commutant.

Convention: <xi, eta>_h = xi^dagger H eta.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .bundles import BundleSpec, MatrixField, grid_block_diag, grid_kron
from .errors import BundleMismatch, DegenerateMetric, NotHermitian, Singular, SpectrumOutOfDomain, UnsupportedParams
from .torus import integrate_density

HERMITIAN_TOL = 1e-12
MIN_EIG = 1e-12


def dagger(x: np.ndarray) -> np.ndarray:
    return np.swapaxes(x.conj(), -1, -2)


def hermitian_part(x: np.ndarray) -> np.ndarray:
    return 0.5 * (x + dagger(x))


def _rel_herm_defect(x: np.ndarray) -> float:
    scale = 1.0 + float(np.max(np.abs(x)))
    return float(np.max(np.abs(x - dagger(x)))) / scale


def eye_like(x: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.eye(x.shape[-1], dtype=complex), x.shape)


def apply_spectral(x: np.ndarray, fn) -> np.ndarray:
    """fn applied to a stack of Hermitian matrices through eigh."""
    lam, u = np.linalg.eigh(hermitian_part(x))
    return (u * fn(lam)[..., None, :]) @ dagger(u)


def _named_fn(fn):
    if callable(fn):
        return fn, None
    if fn == "exp":
        return np.exp, None
    if fn == "log":
        return np.log, "positive"
    if isinstance(fn, tuple) and fn[0] == "power":
        sig = float(fn[1])
        return (lambda lam: lam ** sig), "positive"
    raise ValueError(f"unsupported function {fn!r}; use 'exp', 'log', ('power', s) or a callable")


@dataclass(frozen=True, eq=False)
class MetricState:
    """Hermitian metric H = H_ref F on a bundle."""

    bundle: BundleSpec
    reduced: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        f = np.asarray(self.reduced, dtype=complex)
        r = self.bundle.rank
        n = self.bundle.geom.grid_n
        if f.shape != (n, n, r, r):
            raise BundleMismatch(f"metric grid has shape {f.shape}, bundle needs {(n, n, r, r)}")
        if self.validate:
            if _rel_herm_defect(f) > HERMITIAN_TOL:
                raise NotHermitian("metric matrices are not Hermitian")
            if self.bundle.commutant_defect(f) > 1e-10 * (1 + float(np.max(np.abs(f)))):
                raise UnsupportedParams("metric leaves the multiplier commutant, so it cannot be periodic")
        f = hermitian_part(f)
        object.__setattr__(self, "reduced", f)
        if self.validate and float(np.min(self.eigenvalues)) <= MIN_EIG:
            raise DegenerateMetric(f"metric has minimum eigenvalue {float(np.min(self.eigenvalues)):.3e}")

    @property
    def geom(self):
        return self.bundle.geom

    @property
    def rank(self) -> int:
        return self.bundle.rank

    @cached_property
    def _eigh(self):
        return np.linalg.eigh(self.reduced)

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._eigh[0]

    @cached_property
    def sqrt(self) -> np.ndarray:
        lam, u = self._eigh
        return (u * np.sqrt(lam)[..., None, :]) @ dagger(u)

    @cached_property
    def inv_sqrt(self) -> np.ndarray:
        lam, u = self._eigh
        return (u * (1.0 / np.sqrt(lam))[..., None, :]) @ dagger(u)

    @cached_property
    def inverse(self) -> np.ndarray:
        lam, u = self._eigh
        return (u * (1.0 / lam)[..., None, :]) @ dagger(u)

    @cached_property
    def exponent(self) -> np.ndarray:
        """S with H = H_ref exp(S)."""
        lam, u = self._eigh
        return (u * np.log(lam)[..., None, :]) @ dagger(u)

    @property
    def matrix(self) -> MatrixField:
        """Values of H itself in the working frame (not periodic unless all degrees vanish)."""
        href = self.bundle.reference_diag()
        return MatrixField(href[..., :, None] * self.reduced, covariance="metric")

    def adjoint(self, x: np.ndarray) -> np.ndarray:
        """Metric adjoint F^{-1} X^dagger F of an endomorphism grid."""
        return self.inverse @ dagger(x) @ self.reduced

    def symmetrize(self, x: np.ndarray) -> np.ndarray:
        """F^{1/2} X F^{-1/2}; Hermitian exactly when X is h-Hermitian."""
        return self.sqrt @ x @ self.inv_sqrt

    def unsymmetrize(self, y: np.ndarray) -> np.ndarray:
        return self.inv_sqrt @ y @ self.sqrt

    def seam_residual(self) -> float:
        """Relative defect of H(z + lambda) = a^{-*} H(z) a^{-1} using analytic H_ref."""
        b = self.bundle
        z = b.geom.z
        worst = 0.0
        for which, lam in (("1", 1.0), ("tau", b.geom.tau)):
            a = b.multiplier(which, z)
            ainv = np.linalg.inv(a)
            h = b.reference_diag(z)[..., :, None] * self.reduced
            rhs = dagger(ainv) @ h @ ainv
            lhs = b.reference_diag(z + lam)[..., :, None] * self.reduced
            scale = np.max(np.abs(rhs), axis=(-2, -1))
            worst = max(worst, float(np.max(np.max(np.abs(lhs - rhs), axis=(-2, -1)) / scale)))
        return worst


@dataclass(frozen=True, eq=False)
class HermitianFormField:
    bundle: BundleSpec
    reduced: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.reduced, dtype=complex)
        if _rel_herm_defect(w) > 1e-10:
            raise NotHermitian("form matrices are not Hermitian")
        object.__setattr__(self, "reduced", hermitian_part(w))

    @property
    def matrix(self) -> MatrixField:
        href = self.bundle.reference_diag()
        return MatrixField(href[..., :, None] * self.reduced, covariance="form")

    def __add__(self, other):
        return HermitianFormField(self.bundle, self.reduced + other.reduced)

    def __mul__(self, c: float):
        return HermitianFormField(self.bundle, self.reduced * float(c))

    __rmul__ = __mul__


def as_form(v) -> HermitianFormField:
    if isinstance(v, HermitianFormField):
        return v
    if isinstance(v, MetricState):
        return HermitianFormField(v.bundle, v.reduced)
    raise TypeError(f"expected a form or metric, got {type(v).__name__}")


def _check_bundle(*objs):
    b = objs[0].bundle
    for o in objs[1:]:
        if o.bundle is not b:
            raise BundleMismatch("objects belong to different bundles")


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, MatrixField) else np.asarray(f)


# constructors

def reference_metric(bundle: BundleSpec) -> MetricState:
    n, r = bundle.geom.grid_n, bundle.rank
    return MetricState(bundle, np.broadcast_to(np.eye(r, dtype=complex), (n, n, r, r)).copy())


def metric_from_exponent(bundle: BundleSpec, s) -> MetricState:
    """h_ref * exp(S) for a Hermitian commutant-valued S."""
    s = _values(s)
    if _rel_herm_defect(s) > 1e-10:
        raise NotHermitian("exponent must be Hermitian")
    return MetricState(bundle, apply_spectral(s, np.exp))


def conformal_metric(h: MetricState, u) -> MetricState:
    """e^u h for a real function u on the grid."""
    u = np.real(np.asarray(u))
    return MetricState(h.bundle, np.exp(u)[..., None, None] * h.reduced)


def band_limited_field(n: int, rng: np.random.Generator, modes: int = 2) -> np.ndarray:
    """Real random trigonometric polynomial with |frequencies| <= modes, sup-normalized to 1."""
    g = np.arange(n) / n
    s, t = np.meshgrid(g, g, indexing="ij")
    out = np.zeros((n, n))
    for j in range(-modes, modes + 1):
        for k in range(-modes, modes + 1):
            if j == 0 and k == 0:
                continue
            c = rng.normal() + 1j * rng.normal()
            out += np.real(c * np.exp(2j * np.pi * (j * s + k * t)))
    return out / np.max(np.abs(out))


def random_hermitian_field(bundle: BundleSpec, rng: np.random.Generator, amplitude: float,
                           modes: int = 2) -> np.ndarray:
    """Band-limited Hermitian commutant-valued field with sup spectral norm equal to amplitude."""
    n = bundle.geom.grid_n
    basis = bundle.commutant_basis
    x = np.zeros((n, n, bundle.rank, bundle.rank), dtype=complex)
    for b in basis:
        x += band_limited_field(n, rng, modes)[..., None, None] * b
        x += 1j * band_limited_field(n, rng, modes)[..., None, None] * b
    x = hermitian_part(x)
    norm = float(np.max(np.linalg.norm(x, ord=2, axis=(-2, -1))))
    return x * (amplitude / norm) if norm > 0 else x


def random_metric(bundle: BundleSpec, seed: int, amplitude: float = 0.5, modes: int = 2) -> MetricState:
    rng = np.random.default_rng(seed)
    return metric_from_exponent(bundle, random_hermitian_field(bundle, rng, amplitude, modes))


# dictionary

def endo_from_form(h: MetricState, v) -> MatrixField:
    """f^{h,v} = H^{-1} V."""
    v = as_form(v)
    _check_bundle(h, v)
    return MatrixField(h.inverse @ v.reduced)


def endo_between(h: MetricState, k: MetricState) -> np.ndarray:
    """Grid of f^{h,k} = H^{-1} K."""
    return endo_from_form(h, k).values


def form_from_endo(h: MetricState, f) -> HermitianFormField:
    """Form v with f^{h,v} = f; needs f to be h-Hermitian."""
    w = h.reduced @ _values(f)
    if _rel_herm_defect(w) > 1e-10:
        raise NotHermitian("endomorphism is not h-Hermitian")
    return HermitianFormField(h.bundle, w)


def metric_from_endo(h: MetricState, f) -> MetricState:
    return MetricState(h.bundle, h.reduced @ _values(f))


def functional_calculus(h: MetricState, f, fn) -> MatrixField:
    """Apply ``fn`` ('exp', 'log', ('power', s) or a callable) to an h-Hermitian field."""
    x = h.symmetrize(_values(f))
    if _rel_herm_defect(x) > 1e-10:
        raise NotHermitian("endomorphism is not h-Hermitian")
    func, domain = _named_fn(fn)
    lam, u = np.linalg.eigh(hermitian_part(x))
    if domain == "positive" and np.min(lam) <= 0:
        raise SpectrumOutOfDomain(f"spectrum reaches {float(np.min(lam)):.3e}; log/power need positive eigenvalues")
    y = (u * func(lam)[..., None, :]) @ dagger(u)
    return MatrixField(h.unsymmetrize(y))


def h_eigenvalues(h: MetricState, f) -> np.ndarray:
    return np.linalg.eigvalsh(hermitian_part(h.symmetrize(_values(f))))


def gauge_act(a, v):
    """Pull back a form (or metric) along an automorphism: V -> a^dagger V a."""
    av = _values(a)
    det = np.abs(np.linalg.det(av))
    scale = np.max(np.abs(av), axis=(-2, -1)) ** av.shape[-1]
    if np.any(det <= 1e-13 * np.maximum(scale, 1e-300)):
        raise Singular("gauge transformation is singular somewhere on the grid")
    w = dagger(av) @ v.reduced @ av
    if isinstance(v, MetricState):
        return MetricState(v.bundle, w)
    return HermitianFormField(v.bundle, w)


def transitivity_witness(h: MetricState, k: MetricState) -> MatrixField:
    """Automorphism a with gauge_act(a, k) = h, namely a = F_k^{-1/2} F_h^{1/2}."""
    _check_bundle(h, k)
    return MatrixField(k.inv_sqrt @ h.sqrt)


def inner_product(h: MetricState, v, w) -> float:
    """(v, w)_h = integral of Tr(f^{h,v} f^{h,w}) sigma."""
    v, w = as_form(v), as_form(w)
    _check_bundle(h, v, w)
    fv = h.inverse @ v.reduced
    fw = h.inverse @ w.reduced
    return float(np.real(integrate_density(np.einsum("...ij,...ji->...", fv, fw), h.geom)))


def endo_norm_sq(h: MetricState, x: np.ndarray) -> np.ndarray:
    """Pointwise |X|_h^2 = Tr(X X^*) as a real grid."""
    return np.real(np.einsum("...ij,...ji->...", x, h.adjoint(x)))


# paths

@dataclass(frozen=True, eq=False)
class MetricPath:
    h: MetricState
    k: MetricState
    kind: str
    nodes: np.ndarray
    samples: tuple[MetricState, ...]
    tangents: tuple[np.ndarray, ...]  # f^{h_t, h_t'} at each node
    parts: tuple = ()  # sub-paths when the tangent jumps at a joint

    def __post_init__(self):
        if len(self.samples) != len(self.nodes) or len(self.tangents) != len(self.nodes):
            raise ValueError("samples, tangents and nodes must have equal length")

    def reverse(self) -> "MetricPath":
        parts = tuple(p.reverse() for p in self.parts[::-1])
        return MetricPath(self.k, self.h, self.kind, 1.0 - self.nodes[::-1], self.samples[::-1],
                          tuple(-x for x in self.tangents[::-1]), parts)


def _check_nodes(nodes: int):
    if nodes < 3 or nodes % 2 == 0:
        raise ValueError(f"node count must be odd and >= 3, got {nodes}")


def geodesic_path(h: MetricState, k: MetricState, nodes: int = 33) -> MetricPath:
    """h_t = h exp(t S) with S = log f^{h,k}; the tangent is S at every node."""
    _check_bundle(h, k)
    _check_nodes(nodes)
    g, gi = h.sqrt, h.inv_sqrt
    lam, u = np.linalg.eigh(hermitian_part(gi @ k.reduced @ gi))
    if np.min(lam) <= 0:
        raise DegenerateMetric("endpoint metric is degenerate")
    loglam = np.log(lam)
    s = gi @ ((u * loglam[..., None, :]) @ dagger(u)) @ g
    ts = np.linspace(0.0, 1.0, nodes)
    samples = []
    for t in ts:
        if t == 0.0:
            samples.append(h)
        elif t == 1.0:
            samples.append(k)
        else:
            mid = (u * np.exp(t * loglam)[..., None, :]) @ dagger(u)
            samples.append(MetricState(h.bundle, g @ mid @ g))
    return MetricPath(h, k, "geodesic", ts, tuple(samples), tuple(s for _ in ts))


def linear_path(h: MetricState, k: MetricState, nodes: int = 33) -> MetricPath:
    _check_bundle(h, k)
    _check_nodes(nodes)
    ts = np.linspace(0.0, 1.0, nodes)
    diff = k.reduced - h.reduced
    samples, tangents = [], []
    for t in ts:
        m = h if t == 0.0 else k if t == 1.0 else MetricState(h.bundle, (1 - t) * h.reduced + t * k.reduced)
        samples.append(m)
        tangents.append(m.inverse @ diff)
    return MetricPath(h, k, "linear", ts, tuple(samples), tuple(tangents))


def custom_path(samples, nodes=None) -> MetricPath:
    """Path through given metrics; tangents by second-order differences in t."""
    samples = tuple(samples)
    _check_nodes(len(samples))
    ts = np.linspace(0.0, 1.0, len(samples)) if nodes is None else np.asarray(nodes, dtype=float)
    stack = np.stack([m.reduced for m in samples])
    deriv = np.gradient(stack, ts, axis=0, edge_order=2)
    tangents = tuple(m.inverse @ d for m, d in zip(samples, deriv))
    return MetricPath(samples[0], samples[-1], "custom", ts, samples, tangents)


def concat_paths(p1: MetricPath, p2: MetricPath) -> MetricPath:
    """p1 followed by p2, reparametrized to [0, 1].

    The tangent is discontinuous at the joint, so the pieces are kept in
    ``parts`` and integrated separately.
    """
    if len(p1.nodes) != len(p2.nodes):
        raise ValueError("concatenated paths need equal node counts")
    ts = np.concatenate([0.5 * p1.nodes, 0.5 + 0.5 * p2.nodes[1:]])
    samples = p1.samples + p2.samples[1:]
    tangents = tuple(2 * x for x in p1.tangents) + tuple(2 * x for x in p2.tangents[1:])
    return MetricPath(p1.h, p2.k, "concat", ts, samples, tangents, (p1, p2))


def geodesic_point(h: MetricState, k: MetricState, t: float) -> MetricState:
    """Point h exp(t log f^{h,k}) of the geodesic, for any real t."""
    g, gi = h.sqrt, h.inv_sqrt
    lam, u = np.linalg.eigh(hermitian_part(gi @ k.reduced @ gi))
    mid = (u * lam[..., None, :] ** t) @ dagger(u)
    return MetricState(h.bundle, g @ mid @ g)


# induced metrics on dual, direct sum and tensor product

def dual_metric(h: MetricState, dual_bundle: BundleSpec) -> MetricState:
    """H^* = conj(H)^{-1}; in reduced form F -> (F^{-1})^T."""
    return MetricState(dual_bundle, np.swapaxes(h.inverse, -1, -2))


def dsum_metric(h1: MetricState, h2: MetricState, bundle: BundleSpec) -> MetricState:
    return MetricState(bundle, grid_block_diag(h1.reduced, h2.reduced))


def tensor_metric(h1: MetricState, h2: MetricState, bundle: BundleSpec) -> MetricState:
    return MetricState(bundle, grid_kron(h1.reduced, h2.reduced))


def rebind(h: MetricState, bundle: BundleSpec) -> MetricState:
    """Same reduced metric viewed on another bundle with identical multipliers (e.g. a shifted B)."""
    return MetricState(bundle, h.reduced)
