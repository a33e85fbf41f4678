import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twistflow import chern, flow, hermitian as hm
from twistflow.bundles import make_preset
from twistflow.errors import BadField, SpectralGapTooSmall, StepRejected
from twistflow.torus import laplace

seeds = st.integers(0, 2**31 - 1)


@pytest.fixture(scope="module")
def atiyah():
    return make_preset("atiyah_f2", {"beta": 1.0}, grid_n=32)


@pytest.mark.parametrize("kw", [dict(dt_initial=0.0), dict(dt_initial=0.1, dt_max=0.05), dict(t_final=-1.0),
                                dict(cfl_safety=1.5), dict(record_every=0), dict(scheme="rk4"),
                                dict(growth=0.5)])
def test_flow_config_rejects(kw):
    with pytest.raises(BadField):
        flow.FlowConfig(**kw)


def test_he_metric_is_fixed():
    b = make_preset("line_bundle", {"d": 2}, grid_n=16)
    h = hm.reference_metric(b)
    out = flow.flow_step(b, h, 0.1)
    assert np.allclose(out.reduced, h.reduced)


def test_scalar_flow_matches_heat_equation():
    # for a line bundle log F solves u' = -(P u + K_ref - c); one exponential step is exact
    b = make_preset("line_bundle", {"d": 1}, grid_n=32)
    s, t = b.geom.st
    u0 = 0.3 * np.cos(2 * np.pi * s) + 0.2 * np.sin(2 * np.pi * (s - t))
    h = hm.conformal_metric(hm.reference_metric(b), u0)
    dt = 0.37
    out = flow.flow_step(b, h, dt)
    spec = np.fft.fft2(u0)
    exact = np.real(np.fft.ifft2(spec * np.exp(-dt * b.geom.laplace_symbol)))
    assert np.allclose(np.log(np.real(out.reduced[..., 0, 0])), exact, atol=1e-12)


def test_step_guard():
    b = make_preset("line_bundle", {"d": 1}, grid_n=32)
    h = hm.random_metric(b, 1, 0.5)
    with pytest.raises(StepRejected):
        flow.flow_step(b, h, 0.5, scheme="euler", guard=True)
    flow.flow_step(b, h, 1e-4, scheme="euler", guard=True)
    with pytest.raises(ValueError):
        flow.flow_step(b, h, 0.0)


@settings(max_examples=5)
@given(seed=seeds)
def test_flow_monotone(atiyah, seed):
    tr = flow.run_flow(atiyah, hm.random_metric(atiyah, seed, 0.3),
                       flow.FlowConfig(dt_initial=0.01, dt_max=0.05, t_final=0.3))
    assert not any(tr.violations().values())
    assert tr.column("m_K")[-1] < tr.column("m_K")[0]
    assert tr.column("t")[-1] == pytest.approx(0.3)


def test_euler_scheme_respects_cfl():
    b = make_preset("line_bundle", {"d": 0}, grid_n=16)
    tr = flow.run_flow(b, hm.random_metric(b, 2, 0.2), flow.FlowConfig(dt_initial=0.01, dt_max=0.01,
                                                                        t_final=0.05, scheme="euler"))
    assert max(tr.dt_schedule) <= 0.9 * 2 / flow.stiffness(b) + 1e-15
    assert tr.rejected == 0


def test_violation_counting(atiyah):
    h = hm.reference_metric(atiyah)
    rows = [(0.0, 3.0, 2.0, 0.0, 0, 1, 1, 0), (0.1, 2.0, 2.0, -1.0, 0, 1, 1, 0.1),
            (0.2, 2.5, 1.0, -1.0 + 1e-12, 0, 1, 1, 0.1)]
    tr = flow.FlowTrace(rows, h, h)
    assert tr.violations() == {"m_K": 1, "s_K": 0, "L": 0}


def test_sl_normalization(atiyah):
    h0 = hm.random_metric(atiyah, 4, 0.3)
    tr = flow.run_flow(atiyah, h0, flow.FlowConfig(t_final=0.2, sl_normalize=True))
    assert np.max(tr.column("det_residual")) < 1e-12


def test_target_stops_early():
    b = make_preset("line_bundle", {"d": 1}, grid_n=16)
    tr = flow.run_flow(b, hm.random_metric(b, 3, 0.3),
                       flow.FlowConfig(dt_max=0.1, t_final=50.0, growth=1.5, target_m_K=1e-10))
    assert tr.column("m_K")[-1] < 1e-10 and tr.column("t")[-1] < 50.0


def test_trace_csv(tmp_path, atiyah):
    tr = flow.run_flow(atiyah, hm.reference_metric(atiyah), flow.FlowConfig(t_final=0.05, record_every=2))
    path = tmp_path / "trace.csv"
    tr.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(flow.TRACE_COLUMNS)
    assert len(lines) == len(tr.rows) + 1
    assert float(lines[-1].split(",")[0]) == pytest.approx(0.05)


def test_semigroup(atiyah):
    h = hm.random_metric(atiyah, 5, 0.3)
    cfg = dict(dt_initial=0.01, dt_max=0.01)
    one = flow.run_flow(atiyah, h, flow.FlowConfig(t_final=0.1, **cfg)).final
    a = flow.run_flow(atiyah, h, flow.FlowConfig(t_final=0.04, **cfg)).final
    two = flow.run_flow(atiyah, a, flow.FlowConfig(t_final=0.06, **cfg)).final
    assert flow.metric_distance(one, two) < 1e-10


@pytest.mark.parametrize("kind,params", [("atiyah_f2", {"beta": 1.0}), ("direct_sum", {"degrees": [1, -1]})])
def test_perturbed_construction(kind, params):
    b = make_preset(kind, params, grid_n=32)
    h0, f1 = flow.construct_perturbed_solution(b, hm.reference_metric(b))
    assert flow.perturbed_residual(h0, f1, 1.0).sup_norm() < 1e-7
    trk = np.trace(chern.he_defect(b, h0)[0], axis1=-2, axis2=-1)
    assert np.max(np.abs(trk)) < 1e-8


@settings(max_examples=8)
@given(seed=seeds, eps=st.floats(0.0, 3.0))
def test_perturbed_trace_identity(seed, eps):
    # Tr L_eps(f) = Tr K^0 + P Tr log f + eps Tr log f
    b = make_preset("atiyah_f2", {"beta": 1.0}, grid_n=64)
    h0 = hm.random_metric(b, seed, 0.3)
    x = hm.random_hermitian_field(b, np.random.default_rng(seed + 1), 0.5)
    f = h0.unsymmetrize(hm.apply_spectral(x, np.exp))
    c = chern.einstein_constant(b, chern.degree(b, h0))
    lhs = np.trace(flow.perturbed_residual(h0, f, eps, c).values, axis1=-2, axis2=-1)
    trlog = np.trace(hm.functional_calculus(h0, f, "log").values, axis1=-2, axis2=-1)
    rhs = np.trace(chern.he_defect(b, h0)[0], axis1=-2, axis2=-1) + laplace(trlog, b.geom) + eps * trlog
    assert np.max(np.abs(lhs - rhs)) < 1e-9


def test_destabilizer_errors():
    line = make_preset("line_bundle", {"d": 1}, grid_n=16)
    with pytest.raises(SpectralGapTooSmall):
        flow.extract_destabilizer(hm.reference_metric(line))
    dsum = make_preset("direct_sum", {"degrees": [1, -1]}, grid_n=16)
    with pytest.raises(SpectralGapTooSmall):
        flow.extract_destabilizer(hm.reference_metric(dsum))


def test_destabilizer_after_flow():
    b = make_preset("direct_sum", {"degrees": [1, -1]}, grid_n=16)
    tr = flow.run_flow(b, hm.reference_metric(b), flow.FlowConfig(dt_max=0.1, t_final=0.5))
    proj = flow.extract_destabilizer(tr.final).values
    assert np.allclose(proj, np.diag([1.0, 0.0]))
    assert flow.condition_number(tr.final) > 1.0
