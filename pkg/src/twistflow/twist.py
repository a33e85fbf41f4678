"""Twist data for the two-generator cover of the torus.

A twist is recorded by the projective phase ``epsilon`` relating the two
lattice multipliers,

    a_tau(z + 1) a_1(z) = epsilon * a_1(z + tau) a_tau(z),

together with a constant B-field ``B = i * b_coeff * sigma`` and the (here
identically zero) correction one-forms on the two seams.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch

_VALID_TOL = 1e-10


@dataclass(frozen=True)
class TwistDescriptor:
    epsilon: complex = 1.0 + 0j
    b_coeff: float = 0.0
    omega: tuple[complex, complex] = (0j, 0j)

    def __post_init__(self):
        eps = complex(self.epsilon)
        if abs(abs(eps) - 1.0) > 1e-14:
            raise ValueError(f"twist phase must have unit modulus, got |epsilon|={abs(eps)!r}")
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "b_coeff", float(self.b_coeff))
        object.__setattr__(self, "omega", tuple(complex(w) for w in self.omega))

    @property
    def is_trivial(self) -> bool:
        return abs(self.epsilon - 1.0) < 1e-14 and self.b_coeff == 0.0

    def same_class(self, other: "TwistDescriptor", tol: float = 1e-12) -> bool:
        return abs(self.epsilon - other.epsilon) < tol and abs(self.b_coeff - other.b_coeff) < tol

    def with_b(self, b_coeff: float) -> "TwistDescriptor":
        return TwistDescriptor(self.epsilon, b_coeff, self.omega)


TRIVIAL_TWIST = TwistDescriptor()


def root_of_unity(p: int, r: int) -> complex:
    return cmath.exp(2j * np.pi * p / r)


def twist_compose(a: TwistDescriptor, b: TwistDescriptor | None = None, op: str = "tensor") -> TwistDescriptor:
    """Twist of a tensor product, dual or complex conjugate.

    Conjugation and duality agree on this data: a unit phase has inverse equal
    to its conjugate and B is purely imaginary.
    """
    if op == "tensor":
        if b is None:
            raise TypeError("tensor needs two twists")
        eps = a.epsilon * b.epsilon
        eps /= abs(eps)
        omega = (a.omega[0] + b.omega[0], a.omega[1] + b.omega[1])
        return TwistDescriptor(eps, a.b_coeff + b.b_coeff, omega)
    if op in ("dual", "conjugate"):
        om = tuple(-w for w in a.omega) if op == "dual" else tuple(-np.conj(w) for w in a.omega)
        return TwistDescriptor(np.conj(a.epsilon), -a.b_coeff, om)
    raise ValueError(f"unknown twist operation {op!r}")


@dataclass(frozen=True)
class ValidationReport:
    defect: float
    epsilon: complex
    passed: bool
    tolerance: float = _VALID_TOL


def validate_twist(bundle) -> ValidationReport:
    """Sup over the grid of |a_tau(z+1) a_1(z) - epsilon a_1(z+tau) a_tau(z)| (spectral norm).

    The defect at each point is divided by the spectral norm of a_tau(z), which
    is 1 for constant multipliers but grows like exp(2 pi |d| Im z) for the
    degree factors.
    """
    m1, mt = bundle.mult_matrices
    if m1.shape != mt.shape or m1.shape != (bundle.rank, bundle.rank):
        raise ShapeMismatch(f"multiplier shapes {m1.shape} and {mt.shape} do not match rank {bundle.rank}")
    geom = bundle.geom
    z = geom.z
    tau = geom.tau
    eps = bundle.twist.epsilon
    lhs = bundle.multiplier("tau", z + 1.0) @ bundle.multiplier("1", z)
    rhs = eps * (bundle.multiplier("1", z + tau) @ bundle.multiplier("tau", z))
    scale = np.linalg.norm(bundle.multiplier("tau", z), ord=2, axis=(-2, -1))
    defect = float(np.max(np.linalg.norm(lhs - rhs, ord=2, axis=(-2, -1)) / scale))
    return ValidationReport(defect, eps, defect < _VALID_TOL)


@dataclass(frozen=True)
class ShiftReport:
    delta_b: float
    delta_degree: float
    delta_einstein: float
    delta_mean_curvature: float
    cancellation_residual: float


def b_shift_report(bundle, delta_b: float) -> ShiftReport:
    """Predicted changes of degree, Einstein constant and K under B -> B + i*delta_b*sigma.

    Tr(i*Delta B) integrates to -delta_b*Vol, so deg moves by r*delta_b*Vol/(2 pi)
    and both c and K move by delta_b.
    """
    r = bundle.rank
    vol = bundle.geom.volume
    d_deg = -(r / (2 * np.pi)) * (1j * 1j * delta_b * vol)
    d_deg = float(np.real(d_deg))
    d_c = d_deg * 2 * np.pi / (r * vol)
    d_k = float(delta_b)
    return ShiftReport(float(delta_b), d_deg, d_c, d_k, abs(d_k - d_c))
