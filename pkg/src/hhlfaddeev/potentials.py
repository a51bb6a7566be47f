"""Heavy-light interaction shapes and their momentum-space kernels.

Coordinates are in units of the range xi_0, energies and magnitudes in
units of hbar^2 / (mu xi_0^2). The kernel is the plain Fourier transform
``V(k, k') = v0 * int dxi f(xi) exp(-i (k - k') xi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import ConfigurationError, UnsupportedOperationError

SHAPES = ("lorentz-cubed", "gaussian", "contact")
SHAPE_ALIASES = {"lorentz3": "lorentz-cubed", "gauss": "gaussian", "delta": "contact"}
CLI_NAMES = {"lorentz-cubed": "lorentz3", "gaussian": "gauss", "contact": "contact"}


def canonical_shape(name: str) -> str:
    shape = SHAPE_ALIASES.get(name, name)
    if shape not in SHAPES:
        raise ConfigurationError(f"unknown potential shape {name!r}")
    return shape


@dataclass(frozen=True)
class PotentialSpec:
    shape: str
    v0: float
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "shape", canonical_shape(self.shape))
        if not (math.isfinite(self.v0) and self.v0 < 0):
            raise ConfigurationError(f"v0 must be negative (attractive), got {self.v0!r}")
        if not self.label:
            object.__setattr__(self, "label", f"{CLI_NAMES[self.shape]}(v0={self.v0:.10g})")

    @property
    def is_rank_one(self) -> bool:
        """A constant kernel has exactly one nonzero Weinberg eigenvalue."""
        return self.shape == "contact"

    def with_magnitude(self, v0: float) -> "PotentialSpec":
        return PotentialSpec(self.shape, v0)


def _f_lorentz(xi):
    return 1.0 / (1.0 + np.square(xi)) ** 3


def _f_gauss(xi):
    return np.exp(-np.square(xi))


def shape_value(spec: PotentialSpec, xi):
    if spec.shape == "contact":
        raise UnsupportedOperationError("the contact shape has no pointwise value")
    f = _f_lorentz if spec.shape == "lorentz-cubed" else _f_gauss
    return f(xi)


def shape_transform(shape: str, q):
    """Fourier transform of the unit-magnitude shape at momentum transfer q."""
    q = np.abs(q)
    if shape == "gaussian":
        return math.sqrt(math.pi) * np.exp(-0.25 * q * q)
    if shape == "lorentz-cubed":
        return (math.pi / 8.0) * np.exp(-q) * (q * q + 3.0 * q + 3.0)
    if shape == "contact":
        return np.ones_like(q, dtype=float)
    raise ConfigurationError(f"unknown potential shape {shape!r}")


def momentum_kernel(spec: PotentialSpec, k, kp):
    """V(k, k') evaluated in closed form; broadcasts over array arguments."""
    k = np.asarray(k, dtype=float)
    kp = np.asarray(kp, dtype=float)
    return spec.v0 * shape_transform(spec.shape, k - kp)


def kernel_by_quadrature(spec: PotentialSpec, k: float, kp: float) -> float:
    """Brute-force Fourier integral of the coordinate-space potential."""
    if spec.shape == "contact":
        raise UnsupportedOperationError("no quadrature oracle for the contact shape")
    f = _f_lorentz if spec.shape == "lorentz-cubed" else _f_gauss
    q = abs(k - kp)
    # gaussian is below 1e-300 past xi = 27; the Lorentzian tail needs the Fourier rule
    cut = 27.0 if spec.shape == "gaussian" else 20.0
    opts = dict(epsabs=1e-14, epsrel=1e-12, limit=400)
    if q == 0.0:
        val = quad(f, 0.0, cut, **opts)[0]
        if spec.shape == "lorentz-cubed":
            val += quad(f, cut, np.inf, **opts)[0]
    else:
        val = quad(f, 0.0, cut, weight="cos", wvar=q, **opts)[0]
        if spec.shape == "lorentz-cubed":
            val += quad(lambda x: f(x + cut), 0.0, np.inf, weight="cos", wvar=q, epsabs=1e-15)[0] * math.cos(q * cut)
            val -= quad(lambda x: f(x + cut), 0.0, np.inf, weight="sin", wvar=q, epsabs=1e-15)[0] * math.sin(q * cut)
    return spec.v0 * 2.0 * val


def self_check(shapes=("lorentz-cubed", "gaussian"), tol: float = 1e-8) -> float:
    """Compare closed forms against quadrature on a 5x5 probe; return the worst error."""
    probe = np.array([-2.0, -0.5, 0.0, 0.5, 2.0])
    worst = 0.0
    for shape in shapes:
        spec = PotentialSpec(shape, -1.0)
        for k in probe:
            for kp in probe:
                err = abs(float(momentum_kernel(spec, k, kp)) - kernel_by_quadrature(spec, k, kp))
                worst = max(worst, err)
    if worst > tol:
        raise ArithmeticError(f"closed-form kernel disagrees with quadrature by {worst:.3e}")
    return worst
