"""Perturbed Hermite-Einstein equation and the Donaldson heat flow.

The flow is dh/dt = -h (K - c), i.e. f^{h, h'} = -(K - c).  It is integrated
geometrically: each step is F -> F exp(delta) with delta h-Hermitian, so the
metric never leaves the positive cone.  The default ``exponential`` scheme
filters the symmetrized increment with phi_1(dt P) = (1 - exp(-dt P)) / (dt P),
P = i Lambda dbar d, which is exact for the linear scalar part of the flow and
removes the parabolic step restriction; ``euler`` is the plain explicit update
and is capped by the spectral radius of P.

Every accepted step must keep m_K, s_K and L(h_0, h_t) non-increasing (up to a
relative 1e-9); a violating step is rejected and retried with half the step.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .bundles import BundleSpec, MatrixField
from .chern import connection_per, degree, einstein_constant, mean_curvature, trace_sq
from .errors import BadField, SpectralGapTooSmall, StallDetected, StepRejected
from .hermitian import MetricState, dagger, functional_calculus, hermitian_part
from .lagrangian import lagrangian_closed
from .torus import d_z, d_zbar, heat_filter, laplace, solve_laplace

log = logging.getLogger(__name__)

TRACE_COLUMNS = ("t", "m_K", "s_K", "L", "det_residual", "min_eig", "max_eig", "dt")
MONOTONE_RTOL = 1e-9
MIN_DT = 1e-12


@dataclass(frozen=True)
class FlowConfig:
    dt_initial: float = 0.01
    dt_max: float = 0.05
    t_final: float = 1.0
    cfl_safety: float = 0.9
    sl_normalize: bool = False
    record_every: int = 1
    scheme: str = "exponential"
    growth: float = 1.0
    target_m_K: float | None = None
    enforce_monotone: bool = True

    def __post_init__(self):
        if not self.dt_initial > 0:
            raise BadField(f"flow.dt_initial must be positive, got {self.dt_initial}")
        if self.dt_initial > self.dt_max:
            raise BadField("flow.dt_initial must not exceed flow.dt_max")
        if not self.t_final > 0:
            raise BadField(f"flow.t_final must be positive, got {self.t_final}")
        if not 0 < self.cfl_safety < 1:
            raise BadField("flow.cfl_safety must lie in (0, 1)")
        if self.record_every < 1:
            raise BadField("flow.record_every must be >= 1")
        if self.scheme not in ("exponential", "euler"):
            raise BadField(f"flow.scheme must be 'exponential' or 'euler', got {self.scheme!r}")
        if self.growth < 1:
            raise BadField("flow.growth must be >= 1")


@dataclass
class FlowTrace:
    rows: list
    final: MetricState
    h0: MetricState
    accepted: int = 0
    rejected: int = 0
    dt_schedule: list = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        j = TRACE_COLUMNS.index(name)
        return np.array([row[j] for row in self.rows], dtype=float)

    def violations(self, rtol: float = MONOTONE_RTOL) -> dict:
        """Count of rows where m_K, s_K or L increased beyond tolerance."""
        out = {}
        for name in ("m_K", "s_K", "L"):
            col = self.column(name)
            if len(col) < 2:
                out[name] = 0
                continue
            slack = rtol * (1 + np.abs(col[:-1]))
            out[name] = int(np.sum(np.diff(col) > slack))
        return out

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            for row in self.rows:
                w.writerow([format(float(v), ".17g") for v in row])


# perturbed equation

def _endo_log(h0: MetricState, f: np.ndarray) -> np.ndarray:
    return functional_calculus(h0, f, "log").values


def perturbed_residual(h0: MetricState, f, eps: float, c: float | None = None) -> MatrixField:
    """K^0(h0) + i Lambda dbar(f^{-1} D_0' f) + eps log f, for positive h0-Hermitian f."""
    bundle = h0.bundle
    f = f.values if isinstance(f, MatrixField) else np.asarray(f)
    geom = bundle.geom
    c = einstein_constant(bundle, degree(bundle, h0)) if c is None else c
    k0 = mean_curvature(bundle, h0).values - c * np.eye(bundle.rank)
    logf = _endo_log(h0, f) if eps else 0.0
    g = connection_per(bundle, h0)
    a = bundle.deformation.values
    y = np.linalg.solve(f, d_z(f, geom) + g @ f - f @ g)
    return MatrixField(k0 - 2.0 * (d_zbar(y, geom) + a @ y - y @ a) + eps * logf)


def construct_perturbed_solution(bundle: BundleSpec, h: MetricState) -> tuple[MetricState, MatrixField]:
    """(h0, f1) with L_1^{h0}(f1) = 0 and Tr K^0(h0) = 0, built in closed form.

    Steps: solve P phi = -Tr K^0(h) / r, set h1 = e^phi h, then
    h0 = h1 exp(K^0(h1)) and f1 = exp(-K^0(h1)) = f^{h0,h1}.
    """
    r = bundle.rank
    c = einstein_constant(bundle, degree(bundle, h))
    k0 = mean_curvature(bundle, h).values - c * np.eye(r)
    phi = np.real(solve_laplace(-np.real(np.trace(k0, axis1=-2, axis2=-1)) / r, bundle.geom))
    h1 = MetricState(bundle, np.exp(phi)[..., None, None] * h.reduced)
    k1 = mean_curvature(bundle, h1).values - c * np.eye(r)
    x = h1.symmetrize(k1)
    lam, u = np.linalg.eigh(hermitian_part(x))
    up = (u * np.exp(lam)[..., None, :]) @ dagger(u)
    dn = (u * np.exp(-lam)[..., None, :]) @ dagger(u)
    h0 = MetricState(bundle, h1.sqrt @ up @ h1.sqrt)
    f1 = h1.unsymmetrize(dn)
    return h0, MatrixField(f1)


# flow

def stiffness(bundle: BundleSpec) -> float:
    """Spectral radius of P on the grid."""
    return float(np.max(bundle.geom.laplace_symbol))


def flow_increment(bundle: BundleSpec, h: MetricState, dk: np.ndarray, dt: float, scheme: str) -> MetricState:
    """F exp(delta) with delta = -dt F^{-1/2} filter(F^{1/2} dK F^{-1/2}) F^{1/2}."""
    x = hermitian_part(h.symmetrize(dk))
    if scheme == "exponential":
        x = np.real_if_close(heat_filter(x, bundle.geom, dt), tol=1e6)
        x = hermitian_part(np.asarray(x, dtype=complex))
    lam, u = np.linalg.eigh(x)
    e = (u * np.exp(-dt * lam)[..., None, :]) @ dagger(u)
    return MetricState(bundle, h.sqrt @ e @ h.sqrt, validate=False)


def sl_project(anchor: MetricState, h: MetricState) -> MetricState:
    """Rescale so that det f^{anchor, h} = 1 pointwise."""
    det = np.real(np.linalg.det(anchor.inverse @ h.reduced))
    return MetricState(h.bundle, h.reduced / det[..., None, None] ** (1.0 / h.rank), validate=False)


def flow_step(bundle: BundleSpec, h: MetricState, dt: float, *, scheme: str = "exponential",
              sl_anchor: MetricState | None = None, guard: bool = False) -> MetricState:
    """One geometric step of dh/dt = -h (K - c).

    With ``guard`` the step raises StepRejected when m_K would increase.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    k = mean_curvature(bundle, h).values
    c = einstein_constant(bundle, degree(bundle, h, k))
    dk = k - c * np.eye(bundle.rank)
    out = flow_increment(bundle, h, dk, dt, scheme)
    if sl_anchor is not None:
        out = sl_project(sl_anchor, out)
    if guard:
        m0 = float(np.max(trace_sq(dk)))
        k1 = mean_curvature(bundle, out).values - c * np.eye(bundle.rank)
        m1 = float(np.max(trace_sq(k1)))
        if m1 > m0 + MONOTONE_RTOL * (1 + m0):
            raise StepRejected(f"m_K would increase from {m0:.6e} to {m1:.6e}")
    return MetricState(bundle, out.reduced)


@dataclass(frozen=True)
class _Diag:
    m_k: float
    s_k: float
    lag: float
    det_res: float
    min_eig: float
    max_eig: float
    dk: np.ndarray


def _diagnostics(bundle, h0, h, c) -> _Diag:
    k = mean_curvature(bundle, h).values
    dk = k - c * np.eye(bundle.rank)
    m_k = float(np.max(trace_sq(dk)))
    s_k = float(np.sqrt(max(float(np.max(trace_sq(k))), 0.0)))
    lag = lagrangian_closed(h0, h, c)
    det_res = float(np.max(np.abs(np.real(np.linalg.det(h0.inverse @ h.reduced)) - 1.0)))
    eig = h.eigenvalues
    return _Diag(m_k, s_k, lag, det_res, float(np.min(eig)), float(np.max(eig)), dk)


def _not_worse(new: float, old: float) -> bool:
    return new <= old + MONOTONE_RTOL * (1 + abs(old))


def run_flow(bundle: BundleSpec, h0: MetricState, cfg: FlowConfig) -> FlowTrace:
    """Integrate the flow from h0 up to cfg.t_final (or until m_K < cfg.target_m_K)."""
    c = einstein_constant(bundle, degree(bundle, h0))
    dt_cap = cfg.dt_max
    if cfg.scheme == "euler":
        dt_cap = min(dt_cap, cfg.cfl_safety * 2.0 / stiffness(bundle))
    dt = min(cfg.dt_initial, dt_cap)
    anchor = h0 if cfg.sl_normalize else None
    h = h0
    d = _diagnostics(bundle, h0, h, c)
    t = 0.0
    trace = FlowTrace([(t, d.m_k, d.s_k, d.lag, d.det_res, d.min_eig, d.max_eig, 0.0)], h, h0)
    eps_t = 1e-12 * max(1.0, cfg.t_final)
    while cfg.t_final - t > eps_t:
        if cfg.target_m_K is not None and d.m_k < cfg.target_m_K:
            break
        remaining = cfg.t_final - t
        step = remaining if remaining <= dt * (1 + 1e-9) else dt
        cand = flow_increment(bundle, h, d.dk, step, cfg.scheme)
        if anchor is not None:
            cand = sl_project(anchor, cand)
        nd = _diagnostics(bundle, h0, cand, c)
        ok = _not_worse(nd.m_k, d.m_k) and _not_worse(nd.s_k, d.s_k) and _not_worse(nd.lag, d.lag)
        if cfg.enforce_monotone and not ok:
            trace.rejected += 1
            dt = step / 2
            log.debug("step rejected at t=%g, dt -> %g", t, dt)
            if dt < MIN_DT:
                raise StallDetected(f"step size collapsed below {MIN_DT} at t={t}")
            continue
        if float(np.min(nd.min_eig)) <= 0:
            raise StallDetected(f"metric degenerated at t={t}")
        h = MetricState(bundle, cand.reduced, validate=False)
        d = nd
        t += step
        trace.accepted += 1
        trace.dt_schedule.append(step)
        done = cfg.t_final - t <= eps_t or (cfg.target_m_K is not None and d.m_k < cfg.target_m_K)
        if trace.accepted % cfg.record_every == 0 or done:
            trace.rows.append((t, d.m_k, d.s_k, d.lag, d.det_res, d.min_eig, d.max_eig, step))
        dt = min(step * cfg.growth, dt_cap) if step == dt else dt
    trace.final = MetricState(bundle, h.reduced)
    return trace


def metric_distance(h: MetricState, k: MetricState) -> float:
    """Sup over the grid of the spectral norm of log f^{h,k}."""
    lam = np.linalg.eigvalsh(hermitian_part(h.inv_sqrt @ k.reduced @ h.inv_sqrt))
    return float(np.max(np.abs(np.log(lam))))


def condition_number(h: MetricState) -> float:
    """Largest pointwise condition number of f^{h_ref, h}."""
    eig = h.eigenvalues
    return float(np.max(eig[..., -1] / eig[..., 0]))


def extract_destabilizer(h: MetricState, bundle: BundleSpec | None = None, min_gap: float = 1e-6) -> MatrixField:
    """Spectral projector of f^{h_ref, h} onto its lower eigenvalue cluster.

    Along the flow the metric contracts on the directions of largest slope, so
    those carry the smallest eigenvalues.  The cluster split is placed at the
    eigenvalue gap that is widest in the worst grid point.
    """
    bundle = h.bundle if bundle is None else bundle
    if bundle.rank < 2:
        raise SpectralGapTooSmall("a line bundle has no proper destabilizing sub-bundle")
    lam, u = np.linalg.eigh(hermitian_part(h.exponent))
    gaps = np.min(np.diff(lam, axis=-1), axis=(0, 1))
    j = int(np.argmax(gaps))
    if gaps[j] < min_gap:
        raise SpectralGapTooSmall(f"largest uniform eigenvalue gap is {gaps[j]:.3e}")
    low = u[..., : j + 1]
    return MatrixField(low @ dagger(low))
