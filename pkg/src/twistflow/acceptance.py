"""Acceptance criteria as plain functions returning a :class:`CriterionResult`.

Shared by the test suite and by ``twistflow suite``.  All runs use the
default torus (tau = i, N = 64) unless a geometry is passed in.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import chern, flow, hermitian as hm, lagrangian as lg, subobjects as so
from .bundles import (MatrixField, bundle_dsum, bundle_dual, bundle_end, bundle_tensor, grid_block_diag,
                      grid_kron, make_preset)
from .torus import integrate_density, laplace, make_torus
from .twist import root_of_unity, validate_twist


@dataclass
class CriterionResult:
    cid: int
    title: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        detail = ", ".join(f"{k}={_fmt(v)}" for k, v in self.metrics.items())
        return f"[{status}] criterion {self.cid:2d} {self.title}: {detail} ({self.seconds:.1f}s)"

    def as_dict(self) -> dict:
        return dict(id=self.cid, title=self.title, status="pass" if self.passed else "fail",
                    metrics=self.metrics, seconds=self.seconds)


def _fmt(v):
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.3e}"
    return str(v)


def _geom(geom):
    return geom or make_torus(1j, 64)


def _corpus(geom):
    return {
        "L(1)": make_preset("line_bundle", {"d": 1}, geom=geom),
        "L(-2)": make_preset("line_bundle", {"d": -2}, geom=geom),
        "L(1)+L(-1)": make_preset("direct_sum", {"degrees": [1, -1]}, geom=geom),
        "F2": make_preset("atiyah_f2", {"beta": 1.0}, geom=geom),
        "Ext(1,1)": make_preset("extension", {"d1": 1, "d2": 1, "beta": 0.5}, geom=geom),
        "Heis(3,1)": make_preset("heisenberg", {"r": 3, "p": 1}, geom=geom),
    }


def c01_cocycle(geom=None) -> CriterionResult:
    geom = _geom(geom)
    bundles = list(_corpus(geom).values())
    bundles += [make_preset("line_bundle", {"d": d}, geom=geom) for d in (-1, 0, 2)]
    bundles += [make_preset("heisenberg", {"r": 2, "p": 1}, geom=geom),
                make_preset("heisenberg", {"r": 5, "p": 2}, geom=geom)]
    worst = max(validate_twist(b).defect for b in bundles)
    heis = validate_twist(make_preset("heisenberg", {"r": 3, "p": 1}, geom=geom))
    eps_err = abs(heis.epsilon - root_of_unity(1, 3))
    ok = worst < 1e-10 and eps_err < 1e-14 and heis.passed
    return CriterionResult(1, "cocycle validation", ok, dict(max_defect=worst, heisenberg_eps_error=eps_err))


def c02_curvature_oracle(geom=None) -> CriterionResult:
    geom = _geom(geom)
    curv_err = deg_err = fd_err = 0.0
    for d in range(-2, 3):
        b = make_preset("line_bundle", {"d": d}, geom=geom)
        h = hm.reference_metric(b)
        target = np.pi * d / geom.tau.imag
        curv_err = max(curv_err, float(np.max(np.abs(chern.curvature(b, h).coef[..., 0, 0] - target))))
        fd_err = max(fd_err, float(np.max(np.abs(chern.reference_curvature_fd(d, geom) - target))))
        deg_err = max(deg_err, abs(chern.degree(b, h) - d))
    ok = curv_err < 1e-9 and fd_err < 1e-9 and deg_err < 1e-8
    return CriterionResult(2, "curvature oracle", ok, dict(curvature_err=curv_err, fd_oracle_err=fd_err,
                                                           degree_err=deg_err))


def c03_he_identity(geom=None) -> CriterionResult:
    geom = _geom(geom)
    res = c_err = 0.0
    for d in range(-2, 3):
        b = make_preset("line_bundle", {"d": d}, geom=geom)
        rep = chern.bundle_report(b, hm.reference_metric(b))
        res = max(res, rep.he_residual_sup)
        c_err = max(c_err, abs(rep.einstein_constant - 2 * np.pi * d / geom.volume))
    return CriterionResult(3, "HE identity on line bundles", res < 1e-10 and c_err < 1e-9,
                           dict(he_residual_sup=res, einstein_err=c_err))


def c04_functoriality(geom=None, amplitude: float = 0.3) -> CriterionResult:
    geom = _geom(geom)
    l1 = make_preset("line_bundle", {"d": 1}, geom=geom)
    hl = hm.random_metric(l1, 101, amplitude)
    err_dual = err_sum = err_tensor = 0.0
    for j, b in enumerate(_corpus(geom).values()):
        h = hm.random_metric(b, 10 + j, amplitude)
        r = chern.curvature_coef(b, h)
        bd = bundle_dual(b)
        rd = chern.curvature_coef(bd, hm.dual_metric(h, bd))
        err_dual = max(err_dual, float(np.max(np.abs(rd + np.swapaxes(r, -1, -2)))))
        h2 = hm.random_metric(b, 50 + j, amplitude)
        bs = bundle_dsum(b, b)
        rs = chern.curvature_coef(bs, hm.dsum_metric(h, h2, bs))
        err_sum = max(err_sum, float(np.max(np.abs(rs - grid_block_diag(r, chern.curvature_coef(b, h2))))))
        bt = bundle_tensor(b, l1)
        rt = chern.curvature_coef(bt, hm.tensor_metric(h, hl, bt))
        expect = grid_kron(r, np.eye(1)) + grid_kron(np.eye(b.rank), chern.curvature_coef(l1, hl))
        err_tensor = max(err_tensor, float(np.max(np.abs(rt - expect))))
    ok = max(err_dual, err_sum, err_tensor) < 1e-9
    return CriterionResult(4, "functoriality of curvature", ok,
                           dict(dual_err=err_dual, dsum_err=err_sum, tensor_err=err_tensor))


def c05_b_shift(geom=None) -> CriterionResult:
    from .twist import b_shift_report

    geom = _geom(geom)
    deg_err = c_err = k_err = 0.0
    for j, b in enumerate(_corpus(geom).values()):
        h = hm.random_metric(b, 200 + j, 0.3)
        k0, c0 = chern.he_defect(b, h)
        d0 = chern.degree(b, h)
        for db in (1.0, -1.0):
            bb = b.with_b(b.twist.b_coeff + db)
            hb = hm.rebind(h, bb)
            k1, c1 = chern.he_defect(bb, hb)
            pred = b_shift_report(b, db)
            deg_err = max(deg_err, abs(chern.degree(bb, hb) - d0 - pred.delta_degree))
            c_err = max(c_err, abs(c1 - c0 - pred.delta_einstein))
            k_err = max(k_err, float(np.max(np.abs(k1 - k0))))
    ok = deg_err < 1e-9 and c_err < 1e-9 and k_err < 1e-10
    return CriterionResult(5, "B-shift invariance", ok, dict(degree_err=deg_err, einstein_err=c_err,
                                                             K_minus_c_change=k_err))


def c06_conformal(geom=None) -> CriterionResult:
    geom = _geom(geom)
    b = make_preset("line_bundle", {"d": 1}, geom=geom)
    s, _ = geom.st
    h = hm.conformal_metric(hm.reference_metric(b), 0.5 * np.cos(2 * np.pi * s))
    before = chern.bundle_report(b, h).he_residual_sup
    after = chern.bundle_report(b, chern.conformal_normalize(b, h)).he_residual_sup
    return CriterionResult(6, "conformal normalization", after < 1e-8, dict(residual_before=before,
                                                                            residual_after=after))


def c07_variation(geom=None) -> CriterionResult:
    geom = _geom(geom)
    b = make_preset("atiyah_f2", {"beta": 1.0}, geom=geom)
    h, k = hm.random_metric(b, 7, 0.4), hm.random_metric(b, 8, 0.4)
    path = hm.geodesic_path(h, k, 3)
    worst = 0.0
    eps = 1e-4
    for t in (0.25, 0.5, 0.75):
        fd = (chern.mean_curvature(b, hm.geodesic_point(h, k, t + eps)).values
              - chern.mean_curvature(b, hm.geodesic_point(h, k, t - eps)).values) / (2 * eps)
        an = chern.mean_curvature_variation(b, hm.geodesic_point(h, k, t), path.tangents[0])
        worst = max(worst, float(np.max(np.abs(fd - an)) / np.max(np.abs(an))))
    return CriterionResult(7, "variation formula", worst < 1e-5, dict(relative_err=worst))


def c08_gauss_codazzi(geom=None) -> CriterionResult:
    geom = _geom(geom)
    b = make_preset("atiyah_f2", {"beta": 1.0}, geom=geom)
    incl = b.declared_subbundles[0]
    r1 = so.gauss_codazzi_residual(b, incl, hm.reference_metric(b))
    r2 = so.gauss_codazzi_residual(b, incl, hm.random_metric(b, 9, 0.5))
    return CriterionResult(8, "Gauss-Codazzi", max(r1, r2) < 1e-8, dict(residual_id=r1, residual_random=r2))


def c09_lagrangian(geom=None, nodes: int = 65) -> CriterionResult:
    geom = _geom(geom)
    b = make_preset("atiyah_f2", {"beta": 1.0}, geom=geom)
    h, k, l = (hm.random_metric(b, s, 0.4) for s in (21, 22, 23))
    q = lambda x, y: lg.q1_field(x, y).values  # noqa: E731
    q_anti = float(np.max(np.abs(q(h, k) + q(k, h))))
    q_cocycle = float(np.max(np.abs(q(h, l) - q(h, k) - q(k, l))))
    g_hk = hm.geodesic_path(h, k, nodes)
    l_hk = lg.lagrangian_path(g_hk)
    l_kh = lg.lagrangian_path(hm.geodesic_path(k, h, nodes))
    anti = abs(l_hk + l_kh)
    anti_rev = abs(lg.lagrangian_path(g_hk.reverse()) + l_hk)
    l_kl = lg.lagrangian_path(hm.geodesic_path(k, l, nodes))
    l_hl = lg.lagrangian_path(hm.geodesic_path(h, l, nodes))
    l_cat = lg.lagrangian_path(hm.concat_paths(g_hk, hm.geodesic_path(k, l, nodes)))
    additivity = max(abs(l_hl - l_hk - l_kl), abs(l_cat - l_hl))
    l_lin = lg.lagrangian_path(hm.linear_path(h, k, nodes))
    path_indep = abs(l_hk - l_lin) / (1 + abs(l_hk))
    deriv = 0.0
    for p in (g_hk, hm.linear_path(h, k, 3)):
        fd, formula = lg.lagrangian_derivative_check(p, 0.4)
        deriv = max(deriv, abs(fd - formula) / max(abs(formula), 1e-12))
    closed = abs(lg.lagrangian_closed(h, k) - l_hk) / (1 + abs(l_hk))
    ok = (q_anti < 1e-12 and q_cocycle < 1e-12 and max(anti, anti_rev, additivity) < 1e-7
          and path_indep < 1e-6 and deriv < 1e-5 and closed < 1e-6)
    return CriterionResult(9, "Lagrangian structure", ok, dict(
        q1_antisymmetry=q_anti, q1_cocycle=q_cocycle, antisymmetry=max(anti, anti_rev), additivity=additivity,
        path_independence=path_indep, derivative=deriv, closed_vs_path=closed))


def random_positive_endo(h: hm.MetricState, rng: np.random.Generator, amplitude: float = 0.5) -> np.ndarray:
    """exp of a random h-Hermitian field: positive and h-Hermitian."""
    x = hm.random_hermitian_field(h.bundle, rng, amplitude)
    return h.unsymmetrize(hm.apply_spectral(x, np.exp))


def c10_perturbed(geom=None) -> CriterionResult:
    geom = _geom(geom)
    res = trk = 0.0
    for kind, params in (("atiyah_f2", {"beta": 1.0}), ("direct_sum", {"degrees": [1, -1]})):
        b = make_preset(kind, params, geom=geom)
        h0, f1 = flow.construct_perturbed_solution(b, hm.reference_metric(b))
        res = max(res, flow.perturbed_residual(h0, f1, 1.0).sup_norm())
        trk = max(trk, float(np.max(np.abs(np.trace(chern.he_defect(b, h0)[0], axis1=-2, axis2=-1)))))
    b = make_preset("atiyah_f2", {"beta": 1.0}, geom=geom)
    h0 = hm.random_metric(b, 31, 0.3)
    rng = np.random.default_rng(32)
    c = chern.einstein_constant(b, chern.degree(b, h0))
    tr0 = np.trace(chern.he_defect(b, h0)[0], axis1=-2, axis2=-1)
    tr_id = 0.0
    for j in range(10):
        f = random_positive_endo(h0, rng)
        eps = 0.25 * j
        lhs = np.trace(flow.perturbed_residual(h0, f, eps, c).values, axis1=-2, axis2=-1)
        trlog = np.trace(hm.functional_calculus(h0, f, "log").values, axis1=-2, axis2=-1)
        rhs = tr0 + laplace(trlog, geom) + eps * trlog
        tr_id = max(tr_id, float(np.max(np.abs(lhs - rhs))))
    ok = res < 1e-7 and trk < 1e-8 and tr_id < 1e-9
    return CriterionResult(10, "perturbed equation", ok, dict(residual_sup=res, trace_K0_sup=trk,
                                                              trace_identity=tr_id))


def c11_stable_flow(geom=None) -> CriterionResult:
    geom = _geom(geom)
    b = make_preset("line_bundle", {"d": 1}, geom=geom)
    h = hm.random_metric(b, 11, 0.5)
    tr = flow.run_flow(b, h, flow.FlowConfig(dt_initial=0.01, dt_max=0.1, t_final=20.0, growth=1.2))
    m_end = float(tr.column("m_K")[-1])
    viol = tr.violations()
    ok = m_end < 1e-6 and not any(viol.values())
    return CriterionResult(11, "stable flow converges", ok, dict(m_K_final=m_end, violations=sum(viol.values()),
                                                                 steps=tr.accepted))


def c12_semistable_flow(geom=None, t_final: float = 200.0) -> CriterionResult:
    geom = _geom(geom)
    b = make_preset("atiyah_f2", {"beta": 1.0}, geom=geom)
    tr = flow.run_flow(b, hm.reference_metric(b),
                       flow.FlowConfig(dt_initial=0.01, dt_max=0.5, t_final=t_final, growth=1.2))
    m_end = float(tr.column("m_K")[-1])
    kappa = flow.condition_number(tr.final)
    viol = tr.violations()["m_K"]
    ok = m_end < 1e-3 and kappa > 1e3 and viol == 0
    return CriterionResult(12, "approximate HE on semistable", ok, dict(m_K_final=m_end, condition_number=kappa,
                                                                        m_K_violations=viol))


def c13_unstable_floor(geom=None) -> CriterionResult:
    geom = _geom(geom)
    b = make_preset("direct_sum", {"degrees": [1, -1]}, geom=geom)
    tr = flow.run_flow(b, hm.reference_metric(b), flow.FlowConfig(dt_initial=0.01, dt_max=0.1, t_final=2.0))
    floor = 8 * np.pi**2 * geom.volume**-2
    dev = float(np.max(np.abs(tr.column("m_K") - floor)))
    proj = flow.extract_destabilizer(tr.final)
    res = so.weakly_holo_residual(b, tr.final, proj)
    mu_s = so.projector_degree(b, tr.final, proj) / float(np.real(np.trace(proj.values[0, 0])))
    mu_e = chern.degree(b, tr.final) / b.rank
    ok = dev < 1e-4 and max(res) < 1e-6 and mu_s > mu_e
    return CriterionResult(13, "unstable floor and destabilizer", ok, dict(
        floor_deviation=dev, max_weak_residual=max(res), slope_sub=mu_s, slope_E=mu_e))


def c14_decomposition(geom=None, nodes: int = 65) -> CriterionResult:
    geom = _geom(geom)
    b = make_preset("atiyah_f2", {"beta": 1.0}, geom=geom)
    h, k = hm.random_metric(b, 41, 0.4), hm.random_metric(b, 42, 0.4)
    parts = lg.lagrangian_decomposition(h, k, b.declared_subbundles[0])
    total = lg.lagrangian_path(hm.geodesic_path(h, k, nodes))
    err = abs(total - parts["predicted"])
    return CriterionResult(14, "Lagrangian decomposition", err < 1e-6, dict(
        residual=err, L=total, C_term_sign=lg.C_TERM_SIGN))


def c15_semigroup(geom=None) -> CriterionResult:
    geom = _geom(geom)
    b = make_preset("atiyah_f2", {"beta": 1.0}, geom=geom)
    h = hm.random_metric(b, 51, 0.3)
    cfg = dict(dt_initial=0.005, dt_max=0.005)
    one = flow.run_flow(b, h, flow.FlowConfig(t_final=0.5, **cfg))
    a = flow.run_flow(b, h, flow.FlowConfig(t_final=0.2, **cfg))
    two = flow.run_flow(b, a.final, flow.FlowConfig(t_final=0.3, **cfg))
    dist = flow.metric_distance(one.final, two.final)
    return CriterionResult(15, "semigroup property", dist < 1e-6, dict(sup_distance=dist,
                                                                       steps=one.accepted))


CRITERIA = {
    1: c01_cocycle, 2: c02_curvature_oracle, 3: c03_he_identity, 4: c04_functoriality, 5: c05_b_shift,
    6: c06_conformal, 7: c07_variation, 8: c08_gauss_codazzi, 9: c09_lagrangian, 10: c10_perturbed,
    11: c11_stable_flow, 12: c12_semistable_flow, 13: c13_unstable_floor, 14: c14_decomposition,
    15: c15_semigroup,
}


def run_criterion(cid: int, geom=None) -> CriterionResult:
    t0 = time.perf_counter()
    try:
        res = CRITERIA[cid](geom)
    except Exception as exc:  # a crash counts as a failure, with the reason kept
        res = CriterionResult(cid, CRITERIA[cid].__name__, False, dict(error=f"{type(exc).__name__}: {exc}"))
    res.seconds = time.perf_counter() - t0
    return res
