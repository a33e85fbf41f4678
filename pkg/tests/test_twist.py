import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from twistflow.bundles import make_preset
from twistflow.twist import (TRIVIAL_TWIST, TwistDescriptor, b_shift_report, root_of_unity, twist_compose,
                             validate_twist)

phases = st.floats(0, 2 * math.pi).map(lambda a: cmath.exp(1j * a))
bs = st.floats(-3, 3)


def test_descriptor_needs_unit_phase():
    with pytest.raises(ValueError):
        TwistDescriptor(1.1)
    assert TRIVIAL_TWIST.is_trivial
    assert not TwistDescriptor(1.0, 0.5).is_trivial


@given(e1=phases, e2=phases, b1=bs, b2=bs)
def test_tensor_multiplies_phases_and_adds_b(e1, e2, b1, b2):
    t = twist_compose(TwistDescriptor(e1, b1), TwistDescriptor(e2, b2))
    assert abs(t.epsilon - e1 * e2) < 1e-12
    assert t.b_coeff == pytest.approx(b1 + b2)


@given(e=phases, b=bs)
def test_dual_is_tensor_inverse(e, b):
    a = TwistDescriptor(e, b)
    t = twist_compose(a, twist_compose(a, op="dual"))
    assert abs(t.epsilon - 1) < 1e-12 and abs(t.b_coeff) < 1e-12
    assert twist_compose(a, op="conjugate").same_class(twist_compose(a, op="dual"))


def test_compose_errors():
    with pytest.raises(TypeError):
        twist_compose(TRIVIAL_TWIST)
    with pytest.raises(ValueError):
        twist_compose(TRIVIAL_TWIST, op="wedge")


@given(r=st.integers(2, 8), p=st.integers(1, 7))
def test_heisenberg_phase(r, p):
    if math.gcd(p, r) != 1:
        return
    b = make_preset("heisenberg", {"r": r, "p": p}, grid_n=8)
    rep = validate_twist(b)
    assert rep.passed and rep.defect < 1e-10
    assert abs(rep.epsilon - root_of_unity(p, r)) < 1e-14


@pytest.mark.parametrize("kind,params", [("line_bundle", {"d": -2}), ("line_bundle", {"d": 2}),
                                         ("direct_sum", {"degrees": [2, -1, 0]}),
                                         ("extension", {"d1": -1, "d2": -1, "beta": 0.3}),
                                         ("atiyah_f2", {"beta": 2.0})])
def test_presets_validate(kind, params):
    rep = validate_twist(make_preset(kind, params, tau=0.4 + 0.9j, grid_n=16))
    assert rep.passed and rep.defect < 1e-10


def test_wrong_phase_is_detected():
    from dataclasses import replace
    b = make_preset("heisenberg", {"r": 3, "p": 1}, grid_n=8)
    bad = replace(b, twist=TwistDescriptor(1.0))
    rep = validate_twist(bad)
    assert not rep.passed and rep.defect > 1.0


@given(db=bs, r=st.integers(1, 3))
def test_b_shift_prediction(db, r):
    b = make_preset("direct_sum", {"degrees": [0] * r}, tau=1.5j, grid_n=8)
    rep = b_shift_report(b, db)
    assert rep.delta_degree == pytest.approx(r * db * 1.5 / (2 * math.pi))
    assert rep.delta_einstein == pytest.approx(db)
    assert rep.cancellation_residual < 1e-12
