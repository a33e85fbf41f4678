"""Flat complex torus C/(Z + tau Z) sampled on a periodic N x N grid.

Points of the fundamental domain are written z = s + t*tau with s, t in [0, 1);
grid index [j, k] holds the sample at s = j/N, t = k/N.  Forms are stored by
their coefficient against the fixed coframe dz, dzbar, dz^dzbar, and the Kahler
form is sigma = (i/2) dz^dzbar, so that integrating sigma gives Im(tau).

All differential operators are spectral.  The array-level helpers (``d_z``,
``d_zbar``, ``laplace_symbol``...) act on arrays whose two leading axes are the
grid, so matrix-valued fields of shape (N, N, p, q) go through unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import BadGrid, BidegreeOverflow, NonPositiveModulus, NonZeroMean, WrongBidegree

BIDEGREES = ((0, 0), (1, 0), (0, 1), (1, 1))


@dataclass(frozen=True)
class TorusGeometry:
    tau: complex
    grid_n: int

    def __post_init__(self):
        if not complex(self.tau).imag > 0:
            raise NonPositiveModulus(f"Im(tau) must be positive, got tau={self.tau!r}")
        n = self.grid_n
        if int(n) != n or n < 8 or n % 2:
            raise BadGrid(f"grid_n must be an even integer >= 8, got {n!r}")
        object.__setattr__(self, "tau", complex(self.tau))
        object.__setattr__(self, "grid_n", int(n))

    @property
    def volume(self) -> float:
        return self.tau.imag

    @cached_property
    def st(self) -> tuple[np.ndarray, np.ndarray]:
        """Lattice coordinates (s, t) on the grid, each of shape (N, N)."""
        g = np.arange(self.grid_n) / self.grid_n
        return np.meshgrid(g, g, indexing="ij")

    @cached_property
    def z(self) -> np.ndarray:
        s, t = self.st
        return s + t * self.tau

    @cached_property
    def _wavenumbers(self):
        n = self.grid_n
        m = np.fft.fftfreq(n, 1.0 / n)
        m1 = m.copy()
        m1[n // 2] = 0.0  # Nyquist mode has no odd derivative
        ks, kt = np.meshgrid(m1, m1, indexing="ij")
        return 2j * np.pi * ks, 2j * np.pi * kt

    @cached_property
    def dz_symbol(self) -> np.ndarray:
        ds, dt = self._wavenumbers
        tau, taub = self.tau, self.tau.conjugate()
        return (taub * ds - dt) / (taub - tau)

    @cached_property
    def dzbar_symbol(self) -> np.ndarray:
        ds, dt = self._wavenumbers
        tau, taub = self.tau, self.tau.conjugate()
        return (dt - tau * ds) / (taub - tau)

    @cached_property
    def laplace_symbol(self) -> np.ndarray:
        """Fourier symbol of i*Lambda*dbar*d = -2 d_z d_zbar (real, >= 0)."""
        return (-2.0 * self.dz_symbol * self.dzbar_symbol).real


def make_torus(tau: complex, grid_n: int) -> TorusGeometry:
    return TorusGeometry(tau, grid_n)


def _apply_symbol(values: np.ndarray, symbol: np.ndarray) -> np.ndarray:
    spec = np.fft.fft2(values, axes=(0, 1))
    shape = symbol.shape + (1,) * (values.ndim - 2)
    return np.fft.ifft2(spec * symbol.reshape(shape), axes=(0, 1))


def d_z(values: np.ndarray, geom: TorusGeometry) -> np.ndarray:
    return _apply_symbol(values, geom.dz_symbol)


def d_zbar(values: np.ndarray, geom: TorusGeometry) -> np.ndarray:
    return _apply_symbol(values, geom.dzbar_symbol)


def laplace(values: np.ndarray, geom: TorusGeometry) -> np.ndarray:
    """Apply i*Lambda*dbar*d entrywise."""
    return _apply_symbol(values, geom.laplace_symbol)


def heat_filter(values: np.ndarray, geom: TorusGeometry, dt: float) -> np.ndarray:
    """Apply phi_1(dt*P) = (1 - exp(-dt*P)) / (dt*P) entrywise (1 on the kernel)."""
    x = dt * geom.laplace_symbol
    with np.errstate(invalid="ignore", divide="ignore"):
        sym = np.where(x > 1e-12, -np.expm1(-x) / np.where(x > 1e-12, x, 1.0), 1.0 - x / 2)
    return _apply_symbol(values, sym)


def grid_mean(values: np.ndarray) -> np.ndarray:
    return values.mean(axis=(0, 1))


def integrate_density(values: np.ndarray, geom: TorusGeometry) -> np.ndarray:
    """Integral of ``values * sigma`` over the torus (spectrally exact)."""
    return geom.volume * grid_mean(values)


def solve_laplace(rhs: np.ndarray, geom: TorusGeometry) -> np.ndarray:
    """Zero-mean solution u of i*Lambda*dbar*d u = rhs; kernel modes of rhs are dropped."""
    spec = np.fft.fft2(rhs, axes=(0, 1))
    sym = geom.laplace_symbol
    inv = np.zeros_like(sym)
    mask = sym > 1e-12
    inv[mask] = 1.0 / sym[mask]
    shape = sym.shape + (1,) * (rhs.ndim - 2)
    return np.fft.ifft2(spec * inv.reshape(shape), axes=(0, 1))


@dataclass(frozen=True)
class ScalarField:
    """Scalar (p, q)-form: ``values`` is the coefficient against dz, dzbar or dz^dzbar."""

    geom: TorusGeometry
    values: np.ndarray
    bidegree: tuple[int, int] = (0, 0)

    def __post_init__(self):
        bd = tuple(self.bidegree)
        if bd not in BIDEGREES:
            raise WrongBidegree(f"unknown bidegree {self.bidegree!r}")
        n = self.geom.grid_n
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (n, n):
            raise BadGrid(f"expected values of shape {(n, n)}, got {vals.shape}")
        object.__setattr__(self, "bidegree", bd)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, geom: TorusGeometry, fn, bidegree=(0, 0)) -> "ScalarField":
        s, t = geom.st
        return cls(geom, fn(s, t), bidegree)

    def __add__(self, other: "ScalarField") -> "ScalarField":
        if other.bidegree != self.bidegree:
            raise WrongBidegree("cannot add forms of different bidegree")
        return ScalarField(self.geom, self.values + other.values, self.bidegree)

    def __mul__(self, c) -> "ScalarField":
        return ScalarField(self.geom, self.values * c, self.bidegree)

    __rmul__ = __mul__


def derivative(field: ScalarField, direction: str) -> ScalarField:
    """Apply d (``"holomorphic"``) or dbar (``"antiholomorphic"``) to a scalar form.

    The coefficient picks up a sign when dbar hits a (1,0)-form, since
    dbar(g dz) = -d_zbar(g) dz^dzbar.
    """
    p, q = field.bidegree
    if direction == "holomorphic":
        if p == 1:
            raise BidegreeOverflow(f"d of a ({p},{q})-form leaves the supported range")
        return ScalarField(field.geom, d_z(field.values, field.geom), (1, q))
    if direction == "antiholomorphic":
        if q == 1:
            raise BidegreeOverflow(f"dbar of a ({p},{q})-form leaves the supported range")
        sign = -1.0 if p == 1 else 1.0
        return ScalarField(field.geom, sign * d_zbar(field.values, field.geom), (p, 1))
    raise ValueError(f"direction must be 'holomorphic' or 'antiholomorphic', got {direction!r}")


def hodge_lambda(form: ScalarField) -> ScalarField:
    """Contraction with sigma: phi dz^dzbar = -2i phi sigma, so Lambda gives -2i phi."""
    if form.bidegree != (1, 1):
        raise WrongBidegree(f"Lambda needs a (1,1)-form, got {form.bidegree}")
    return ScalarField(form.geom, -2j * form.values, (0, 0))


def sigma_form(geom: TorusGeometry) -> ScalarField:
    """The Kahler form itself, (i/2) dz^dzbar."""
    n = geom.grid_n
    return ScalarField(geom, np.full((n, n), 0.5j), (1, 1))


def integrate(form: ScalarField) -> complex:
    """Integral over the torus; a (0,0) field is integrated against sigma."""
    if form.bidegree == (0, 0):
        return complex(integrate_density(form.values, form.geom))
    if form.bidegree == (1, 1):
        return complex(integrate_density(-2j * form.values, form.geom))
    raise WrongBidegree(f"only (0,0) and (1,1) forms integrate to numbers, got {form.bidegree}")


def poisson_solve(rhs: ScalarField, tol: float = 1e-9) -> ScalarField:
    """Zero-mean u with i*Lambda*dbar*d u = rhs."""
    if rhs.bidegree != (0, 0):
        raise WrongBidegree("Poisson right-hand side must be a function")
    scale = 1.0 + float(np.max(np.abs(rhs.values)))
    mean = grid_mean(rhs.values)
    if abs(mean) > tol * scale:
        raise NonZeroMean(f"right-hand side has mean {complex(mean):.3e}; no periodic solution")
    return ScalarField(rhs.geom, solve_laplace(rhs.values, rhs.geom), (0, 0))
