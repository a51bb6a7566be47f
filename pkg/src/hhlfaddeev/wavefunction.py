"""Three-body wave functions rebuilt from the channel functions.

The Faddeev component is

    Phi(k, p) = +- (E_p - k^2/2)^-1 sum_nu g_nu(k, E_p) tau_nu(E_p) phi_nu(p)

and the total wave function adds its exchanged copy,

    psi(k23, p1) = Phi(-a_y k23/2 - a_x p1, k23 - p1/2)
                   +- Phi(a_y k23/2 - a_x p1, -k23 - p1/2).

Off the collocation points phi_nu(p) comes from one application of the
integral operator (Nystrom extension). Fields are sampled in scaled
momenta K = k / sqrt(2 |E_r|) on a uniform tensor grid with trapezoid
weights, so that states at different two-body energies share one frame.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericalError, ShapeError
from .faddeev import KernelAssembly, ThreeBodyState, symmetry_sign
from .twobody import TWO_PI, tau_values

DEFAULT_EXTENT = 6.0
DEFAULT_RESOLUTION = 96
NORM_TOL = 1e-6
SYMMETRY_TOL = 1e-8


class Reconstruction:
    """Cached evaluation of phi_nu and Phi for one solved state."""

    def __init__(self, state: ThreeBodyState):
        self.state = state
        problem = state.problem
        self.asm: KernelAssembly = problem.assemble(state.energy)
        self.sign = symmetry_sign(state.symmetry)
        self.c = problem.mass.c
        self.axay = problem.mass.axay
        self.ch = list(self.asm.channels)
        self._phi_cache: dict[float, np.ndarray] = {}

    def _system(self, p: float):
        E_p = self.state.energy - 0.5 * self.axay * p * p
        return self.state.problem.weinberg(E_p)

    def channel_functions(self, p) -> np.ndarray:
        """phi_nu(p) for every included channel; shape (n_channels, len(p))."""
        p = np.atleast_1d(np.asarray(p, dtype=float))
        todo = np.unique(p[[x not in self._phi_cache for x in p]]) if p.size else p
        if todo.size:
            asm, c = self.asm, self.c
            q = asm.points
            # column factors g_b(p + c q_j, E_{q_j}) phi_b(q_j) W_b(q_j)
            G_col = np.empty((len(self.ch), len(q), len(todo)))
            for j, sys_j in enumerate(asm.systems):
                G_col[:, j, :] = sys_j.extend(todo + c * q[j])[self.ch]
            G_col *= (asm.column_weights * self.state.phi)[:, :, None]
            for m, pm in enumerate(todo):
                G_row = self._system(pm).extend(q + c * pm)[self.ch]          # (n_ch, n_pts)
                D = self.state.energy - 0.5 * q * q - 0.5 * pm * pm - c * pm * q
                col = G_col[:, :, m].sum(axis=0) / (TWO_PI * D)
                self._phi_cache[float(pm)] = self.sign * (G_row @ col)
        return np.stack([self._phi_cache[float(x)] for x in p], axis=1)

    def component(self, k, p) -> np.ndarray:
        """Faddeev component Phi(k, p) on broadcast arrays of unscaled momenta."""
        k, p = np.broadcast_arrays(np.asarray(k, dtype=float), np.asarray(p, dtype=float))
        out = np.empty(k.shape)
        flat_k, flat_p, flat_out = k.ravel(), p.ravel(), out.reshape(-1)
        uniq, inverse = np.unique(flat_p, return_inverse=True)
        phis = self.channel_functions(uniq)
        for m, pm in enumerate(uniq):
            sel = np.flatnonzero(inverse == m)
            sys_p = self._system(pm)
            E_p = sys_p.energy
            kk = flat_k[sel]
            denom = E_p - 0.5 * kk * kk
            if np.any(denom >= 0):
                raise NumericalError("E_p - k^2/2 must stay negative for a bound state")
            g = sys_p.extend(kk)[self.ch]
            taus = tau_values(sys_p.etas[self.ch])
            flat_out[sel] = self.sign * ((taus * phis[:, m]) @ g) / denom
        return out

    def total(self, k23, p1) -> np.ndarray:
        """Total psi(k23, p1) on unscaled momenta."""
        mass = self.state.problem.mass
        ax, ay = mass.alpha_x, mass.alpha_y
        k23, p1 = np.broadcast_arrays(np.asarray(k23, dtype=float), np.asarray(p1, dtype=float))
        first = self.component(-0.5 * ay * k23 - ax * p1, k23 - 0.5 * p1)
        second = self.component(0.5 * ay * k23 - ax * p1, -k23 - 0.5 * p1)
        return first + self.sign * second

    def residual(self) -> float:
        """Relative mismatch between the Nystrom-extended phi and phi on the collocation points."""
        nys = self.channel_functions(self.asm.points)
        return float(np.linalg.norm(nys - self.state.phi) / np.linalg.norm(self.state.phi))


def faddeev_component(state: ThreeBodyState, k, p):
    return Reconstruction(state).component(k, p)


def total_psi(state: ThreeBodyState, K23, P1):
    """Total wave function at scaled momenta (K = k / sqrt(2|E_r|))."""
    kappa = math.sqrt(2.0 * abs(state.two_body_energy))
    return Reconstruction(state).total(np.asarray(K23) * kappa, np.asarray(P1) * kappa)


def trapezoid_weights(axis: np.ndarray) -> np.ndarray:
    h = axis[1] - axis[0]
    w = np.full(len(axis), h)
    w[0] = w[-1] = 0.5 * h
    return w


@dataclass(frozen=True, eq=False)
class WaveField2D:
    k23: np.ndarray          # scaled K23 axis
    p1: np.ndarray           # scaled P1 axis
    values: np.ndarray       # values[i, j] = psi(K23_i, P1_j)
    symmetry: str
    norm_certificate: float = field(init=False)

    def __post_init__(self):
        k23 = np.asarray(self.k23, dtype=float)
        p1 = np.asarray(self.p1, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(k23), len(p1)):
            raise ShapeError(f"values shape {values.shape} does not match axes ({len(k23)}, {len(p1)})")
        object.__setattr__(self, "k23", k23)
        object.__setattr__(self, "p1", p1)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "norm_certificate", discrete_norm(k23, p1, values))

    @property
    def weights(self) -> tuple[np.ndarray, np.ndarray]:
        return trapezoid_weights(self.k23), trapezoid_weights(self.p1)

    def symmetry_defect(self) -> float:
        """max |psi(-K, P) -+ psi(K, P)| relative to max |psi|."""
        s = symmetry_sign(self.symmetry)
        return float(np.max(np.abs(self.values[::-1, :] - s * self.values)) / np.max(np.abs(self.values)))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["K23", "P1", "psi"])
            for j, P in enumerate(self.p1):
                for i, K in enumerate(self.k23):
                    writer.writerow([f"{K:.17g}", f"{P:.17g}", f"{self.values[i, j]:.17g}"])

    @classmethod
    def from_csv(cls, path, symmetry: str | None = None) -> "WaveField2D":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        with open(path) as fh:
            header = fh.readline().strip()
        if header != "K23,P1,psi":
            raise ShapeError(f"unexpected field header {header!r}")
        k23 = np.unique(data[:, 0])
        p1 = np.unique(data[:, 1])
        if len(data) != len(k23) * len(p1):
            raise ShapeError("field CSV is not a complete tensor grid")
        values = data[:, 2].reshape(len(p1), len(k23)).T
        if symmetry is None:
            even = np.max(np.abs(values[::-1] - values))
            odd = np.max(np.abs(values[::-1] + values))
            symmetry = "boson" if even <= odd else "fermion"
        return cls(k23, p1, values, symmetry)


def discrete_norm(k23: np.ndarray, p1: np.ndarray, values: np.ndarray) -> float:
    wk, wp = trapezoid_weights(k23), trapezoid_weights(p1)
    return float(np.sqrt(np.einsum("i,j,ij->", wk, wp, values * values)) / TWO_PI)


def scaled_axis(extent: float, resolution: int) -> np.ndarray:
    """Uniform axis on [-extent, extent] that is exactly mirror symmetric and contains 0."""
    if not extent > 0:
        raise ConfigurationError("extent must be positive")
    if resolution < 4 or resolution % 2:
        raise ConfigurationError("resolution must be an even integer >= 4")
    h = 2.0 * extent / resolution
    return h * np.arange(-(resolution // 2), resolution // 2 + 1)


def sample_field(state: ThreeBodyState, extent: float = DEFAULT_EXTENT,
                 resolution: int = DEFAULT_RESOLUTION) -> WaveField2D:
    """Normalized psi on a (resolution+1)^2 tensor grid of scaled momenta.

    The exchanged term is read off the mirrored first term, so the
    exchange symmetry holds to the last bit.
    """
    rec = Reconstruction(state)
    mass = state.problem.mass
    kappa = math.sqrt(2.0 * abs(state.two_body_energy))
    K = scaled_axis(extent, resolution)
    P = K.copy()
    k23 = (K * kappa)[:, None]
    p1 = (P * kappa)[None, :]
    first = rec.component(-0.5 * mass.alpha_y * k23 - mass.alpha_x * p1, k23 - 0.5 * p1)
    values = first + rec.sign * first[::-1, :]
    state.problem.release()
    norm = discrete_norm(K, P, values)
    if not norm > 1e-15:
        raise NumericalError("sampled wave function vanishes; degenerate state")
    values = values / norm
    if values.flat[np.argmax(np.abs(values))] < 0:
        values = -values
    return WaveField2D(K, P, values, state.symmetry)


def fidelity(a: WaveField2D, b: WaveField2D) -> float:
    """|sum w_i w_j a_ij b_ij / (2 pi)^2|^2 for unit-normalized fields."""
    if a.values.shape != b.values.shape or not (np.array_equal(a.k23, b.k23) and np.array_equal(a.p1, b.p1)):
        raise ShapeError("fidelity needs fields on identical grids")
    wk, wp = a.weights
    overlap = np.einsum("i,j,ij->", wk, wp, a.values * b.values) / TWO_PI**2
    return float(overlap * overlap)
