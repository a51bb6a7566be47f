"""Heavy-light two-body problem in momentum space.

The Weinberg eigenproblem

    int dk'/(2 pi) V(k, k') g(k') / (E - k'^2/2) = eta(E) g(k)

is solved on a quadrature grid after the similarity transform
``u = sqrt(w / (k^2/2 - E)) * g``, which turns it into a real symmetric
problem whose eigenvalues are the eta values. Eigenfunctions carry the
normalization

    (1/2pi) sum_i w_i g_nu(k_i) g_mu(k_i) / (k_i^2/2 - E) = delta_{nu mu}

under which ``t = sum_nu tau_nu g_nu g_nu`` with ``tau = -eta/(1-eta)``.
Bound states sit where ``eta_nu(E) = 1``; by the oscillation theorem the
nu-th branch has nu nodes and parity (-1)^nu.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq

from .errors import (ConfigurationError, NumericalError, OracleInvalidError,
                     TuningError, UnsupportedOperationError)
from .grids import MomentumGrid, build_grid
from .potentials import PotentialSpec, momentum_kernel, shape_value

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
# eigenvalues below this fraction of the leading one are roundoff
ETA_FLOOR = 1e-13
THRESHOLD_PROBE = -1e-12


@dataclass(frozen=True, eq=False)
class WeinbergSystem:
    energy: float
    etas: np.ndarray          # (nu_max,), descending
    gfuncs: np.ndarray        # (nu_max, count) on grid nodes
    parities: np.ndarray      # (nu_max,) of +-1
    grid_ref: MomentumGrid
    potential: PotentialSpec
    detas: np.ndarray         # d eta / dE (Hellmann-Feynman)

    @property
    def nu_max(self) -> int:
        return len(self.etas)

    @property
    def taus(self) -> np.ndarray:
        return tau_values(self.etas)

    def extend(self, k) -> np.ndarray:
        """Nystrom extension of g_nu to arbitrary momenta; returns shape (nu_max, *k.shape)."""
        k = np.asarray(k, dtype=float)
        if self.potential.is_rank_one:
            return np.broadcast_to(self.gfuncs[:, :1].reshape((self.nu_max,) + (1,) * k.ndim),
                                   (self.nu_max,) + k.shape).copy()
        V = momentum_kernel(self.potential, k[..., None], self.grid_ref.nodes)
        return np.moveaxis(V @ self._nystrom_coeffs().T, -1, 0)

    def _nystrom_coeffs(self) -> np.ndarray:
        coeffs = getattr(self, "_coeffs", None)
        if coeffs is None:
            k = self.grid_ref.nodes
            denom = TWO_PI * (self.energy - 0.5 * k * k)
            safe = np.where(self.etas > 0, self.etas, 1.0)
            coeffs = self.gfuncs * (self.grid_ref.weights / denom)[None, :] / safe[:, None]
            coeffs[self.etas <= 0] = 0.0
            object.__setattr__(self, "_coeffs", coeffs)
        return coeffs

    def normalization_matrix(self) -> np.ndarray:
        k, w = self.grid_ref.nodes, self.grid_ref.weights
        d = w / (TWO_PI * (0.5 * k * k - self.energy))
        return (self.gfuncs * d) @ self.gfuncs.T


@dataclass(frozen=True)
class TwoBodyState:
    r: int
    energy: float
    parity: int
    potential_ref: PotentialSpec


def tau_values(etas):
    etas = np.asarray(etas, dtype=float)
    return -etas / (1.0 - etas)


def _contact_system(potential: PotentialSpec, E: float, grid: MomentumGrid, nu_max: int) -> WeinbergSystem:
    kappa = math.sqrt(-2.0 * E)
    etas = np.zeros(nu_max)
    etas[0] = -potential.v0 / kappa
    gfuncs = np.zeros((nu_max, grid.count))
    gfuncs[0] = math.sqrt(kappa)
    parities = np.ones(nu_max, dtype=int)
    parities[1:] = (-1) ** np.arange(1, nu_max)
    detas = np.zeros(nu_max)
    detas[0] = etas[0] / (2.0 * abs(E))
    return WeinbergSystem(E, etas, gfuncs, parities, grid, potential, detas)


def weinberg_solve(potential: PotentialSpec, E: float, grid: MomentumGrid, nu_max: int) -> WeinbergSystem:
    """Leading ``nu_max`` Weinberg eigenpairs at energy ``E < 0``.

    The contact kernel is rank one and handled in closed form:
    eta = -v0 / sqrt(2|E|) and g = (2|E|)^(1/4), all other eta zero.
    """
    if not E < 0:
        raise ConfigurationError(f"Weinberg energies must be negative, got {E!r}")
    if nu_max < 1:
        raise ConfigurationError("nu_max must be >= 1")
    if potential.is_rank_one:
        return _contact_system(potential, E, grid, nu_max)
    k, w = grid.nodes, grid.weights
    nu_eff = min(nu_max, grid.count)
    s = np.sqrt(w / (0.5 * k * k - E))
    S = (-potential.v0 / TWO_PI) * potential_shape_matrix(potential, grid)
    S *= s[:, None]
    S *= s[None, :]
    n = grid.count
    try:
        vals, vecs = sla.eigh(S, subset_by_index=(n - nu_eff, n - 1), driver="evr")
    except (sla.LinAlgError, ValueError) as exc:
        raise NumericalError(f"Weinberg eigensolver failed at E={E:.6g} "
                             f"(grid {grid.map_kind}, count={grid.count}, scale={grid.scale:g})") from exc
    vals = vals[::-1]
    vecs = vecs[:, ::-1]
    floor = ETA_FLOOR * max(vals[0], 0.0)
    vals = np.where(vals > floor, vals, 0.0)
    # sign convention: largest-magnitude component positive
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(nu_eff)])
    signs[signs == 0] = 1.0
    vecs = vecs * signs
    gfuncs = (math.sqrt(TWO_PI) * vecs / s[:, None]).T
    detas = vals * np.sum(vecs**2 / (0.5 * k * k - E)[:, None], axis=0)
    parities = np.where(np.sum(gfuncs * gfuncs[:, ::-1], axis=1) >= 0, 1, -1)
    if nu_eff < nu_max:
        pad = nu_max - nu_eff
        vals = np.concatenate([vals, np.zeros(pad)])
        gfuncs = np.vstack([gfuncs, np.zeros((pad, n))])
        detas = np.concatenate([detas, np.zeros(pad)])
        parities = np.concatenate([parities, (-1) ** np.arange(nu_eff, nu_max)])
    return WeinbergSystem(float(E), vals, gfuncs, parities.astype(int), grid, potential, detas)


_SHAPE_CACHE: dict = {}


def potential_shape_matrix(potential: PotentialSpec, grid: MomentumGrid) -> np.ndarray:
    """Unit-magnitude kernel on the grid; cached per (shape, grid)."""
    key = (potential.shape, id(grid))
    hit = _SHAPE_CACHE.get(key)
    if hit is None or hit[0] is not grid:
        if len(_SHAPE_CACHE) > 16:
            _SHAPE_CACHE.clear()
        unit = PotentialSpec(potential.shape, -1.0)
        mat = -momentum_kernel(unit, grid.nodes[:, None], grid.nodes[None, :])
        hit = (grid, mat)
        _SHAPE_CACHE[key] = hit
    return hit[1].copy()


class WeinbergCache:
    """Write-once memo of Weinberg systems keyed by energy rounded to 12 digits."""

    def __init__(self, potential: PotentialSpec, grid: MomentumGrid, nu_max: int):
        self.potential = potential
        self.grid = grid
        self.nu_max = nu_max
        self._store: dict[float, WeinbergSystem] = {}

    def __call__(self, E: float) -> WeinbergSystem:
        key = float(f"{E:.12e}")
        hit = self._store.get(key)
        if hit is None:
            hit = weinberg_solve(self.potential, E, self.grid, self.nu_max)
            self._store[key] = hit
        return hit

    def __len__(self):
        return len(self._store)

    def clear(self):
        self._store.clear()


def eta_of_energy(potential: PotentialSpec, nu: int, E: float, grid: MomentumGrid) -> float:
    if nu < 0 or (not potential.is_rank_one and nu >= grid.count):
        raise IndexError(f"branch nu={nu} outside the computed spectrum")
    return float(weinberg_solve(potential, E, grid, nu + 1).etas[nu])


def default_two_body_grid(energy_scale: float = 1e-6, count: int = 200) -> MomentumGrid:
    """Log-clustered grid resolving bound-state momenta down to sqrt(2 |energy_scale|)."""
    kappa = math.sqrt(2.0 * abs(energy_scale))
    return build_grid(count, "symmetric-log-clustered", min(0.5, 0.2 * kappa))


def _eta_root(potential, nu, grid, E_hi=THRESHOLD_PROBE, xtol=1e-14):
    """Energy where eta_nu = 1, or None when the branch stays below one."""
    f = lambda x: eta_of_energy(potential, nu, -math.exp(x), grid) - 1.0
    x_hi = math.log(-E_hi)
    f_hi = f(x_hi)
    if f_hi <= 0:
        return None
    x_lo, f_lo = x_hi, f_hi
    ladder = [(x_hi, f_hi)]
    while f_lo > 0:
        x_lo += 2.0
        if x_lo > 40:
            raise NumericalError(f"no lower bracket for branch {nu} of {potential.label}")
        f_lo = f(x_lo)
        ladder.append((x_lo, f_lo))
    # larger |E| means smaller eta: f must fall along the ladder
    vals = [v for _, v in ladder]
    if any(b >= a for a, b in zip(vals, vals[1:])):
        raise NumericalError(f"eta_{nu} not monotonic in E for {potential.label}: {vals}")
    x = brentq(f, ladder[-2][0], ladder[-1][0], xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)
    return -math.exp(x)


def bound_energies(potential: PotentialSpec, grid: MomentumGrid, r_max: int) -> list[TwoBodyState]:
    """Two-body bound states with node index r <= r_max, sorted by energy."""
    if r_max < 0:
        raise ConfigurationError("r_max must be >= 0")
    states = []
    top = 0 if potential.is_rank_one else r_max
    for nu in range(top + 1):
        if potential.is_rank_one:
            E = -0.5 * potential.v0**2
        else:
            E = _eta_root(potential, nu, grid)
        if E is None:
            break
        parity = 1
        if not potential.is_rank_one:
            parity = int(weinberg_solve(potential, E, grid, nu + 1).parities[nu])
            if parity != (-1) ** nu:
                raise NumericalError(f"parity alternation violated for r={nu} of {potential.label}")
        states.append(TwoBodyState(nu, E, parity, potential))
    states.sort(key=lambda s: s.energy)
    return states


def tune_magnitude(shape: str, r: int, target: float, grid: MomentumGrid | None = None,
                   rtol: float = 1e-6, max_iter: int = 30) -> tuple[PotentialSpec, dict]:
    """Magnitude v0 placing the r-th two-body state at ``target``.

    The Weinberg kernel is linear in v0, so the eta_r = 1 condition at the
    target energy fixes v0 in one step; a secant loop on the round-trip
    energy only runs if that step misses the tolerance.
    """
    if not target < 0:
        raise ConfigurationError("target energy must be negative")
    if r < 0:
        raise ConfigurationError("r must be >= 0")
    probe = PotentialSpec(shape, -1.0)
    if probe.is_rank_one:
        if r != 0:
            raise TuningError(f"the contact interaction supports only r=0, requested r={r}")
        spec = PotentialSpec(shape, -math.sqrt(-2.0 * target))
        return spec, {"v0": spec.v0, "achieved_e2": -0.5 * spec.v0**2, "iterations": 1}
    if grid is None:
        grid = default_two_body_grid(target)
    eta_ref = eta_of_energy(probe, r, target, grid)
    if eta_ref <= 0:
        raise TuningError(f"branch r={r} has no weight at E={target:g}")
    trace = []
    v0 = probe.v0 / eta_ref
    for it in range(1, max_iter + 1):
        spec = PotentialSpec(shape, v0)
        states = {s.r: s for s in bound_energies(spec, grid, r)}
        achieved = states[r].energy if r in states else 0.0
        trace.append((v0, achieved))
        if abs(achieved - target) <= rtol * abs(target):
            return spec, {"v0": v0, "achieved_e2": achieved, "iterations": it}
        # sqrt(|E|) is close to linear in v0 near threshold
        if len(trace) == 1:
            v_next = v0 * (1.0 + 1e-7)
        else:
            (va, ea), (vb, eb) = trace[-2], trace[-1]
            fa = math.sqrt(-ea) - math.sqrt(-target)
            fb = math.sqrt(-eb) - math.sqrt(-target)
            if fb == fa:
                break
            v_next = vb - fb * (vb - va) / (fb - fa)
        v0 = min(v_next, -1e-12)
    raise TuningError(f"could not tune {shape} r={r} to E={target:g}", trace)


def _fd_levels(potential, L, points):
    """Negative levels of the fourth-order five-point discretization on [-L, L]."""
    x = np.linspace(-L, L, points + 2)[1:-1]
    h = x[1] - x[0]
    c0, c1, c2 = -30.0, 16.0, -1.0
    scale = -0.5 / (12.0 * h * h)
    bands = np.zeros((3, points))  # upper form: row 2 diagonal, row 1 first super, row 0 second super
    bands[2] = scale * c0 + potential.v0 * shape_value(potential, x)
    bands[1, 1:] = scale * c1
    bands[0, 2:] = scale * c2
    lo = 1.01 * potential.v0 * float(shape_value(potential, 0.0)) - 1.0
    vals = sla.eig_banded(bands, lower=False, eigvals_only=True, select="v", select_range=(lo, 0.0))
    vals = np.sort(vals)
    # inverse iteration per level; a full eigenvector matrix would be points^2
    ab = np.zeros((5, points))
    ab[0, 2:] = bands[0, 2:]
    ab[1, 1:] = bands[1, 1:]
    ab[2] = bands[2]
    ab[3, :-1] = bands[1, 1:]
    ab[4, :-2] = bands[0, 2:]
    rng = np.random.default_rng(0)
    vecs = np.empty((points, len(vals)))
    for j, lam in enumerate(vals):
        shifted = ab.copy()
        shifted[2] -= lam * (1.0 + 1e-10) - 1e-14
        v = rng.standard_normal(points)
        for _ in range(3):
            v = sla.solve_banded((2, 2), shifted, v)
            v /= np.linalg.norm(v)
        vecs[:, j] = v
    return x, vals, vecs


def coordinate_oracle(potential: PotentialSpec, box_half_width: float, points: int,
                      richardson: bool = True, check_box: bool = False):
    """Finite-difference diagonalization of the two-body equation on [-L, L].

    Returns ``(energy, node_count, parity)`` for every negative level. With
    ``richardson`` the energies are extrapolated from spacings h and h/2.
    """
    if potential.shape == "contact":
        raise UnsupportedOperationError("coordinate oracle needs a finite-range shape")
    if box_half_width <= 0 or points < 16:
        raise ConfigurationError("box half-width must be positive and points >= 16")
    x, vals, vecs = _fd_levels(potential, box_half_width, points)
    if richardson:
        _, fine, _ = _fd_levels(potential, box_half_width, 2 * points + 1)
        if len(fine) != len(vals):
            raise OracleInvalidError("level count changed under grid refinement")
        vals = (16.0 * fine - vals) / 15.0
    out = []
    for j in np.flatnonzero(vals < 0):
        kappa = math.sqrt(-2.0 * vals[j])
        if math.exp(-kappa * box_half_width) > 1e-10 and check_box:
            raise OracleInvalidError(
                f"box L={box_half_width:g} too small for level E={vals[j]:.3e}")
        v = vecs[:, j]
        significant = np.abs(v) > 1e-6 * np.max(np.abs(v))
        vs = v[significant]
        nodes = int(np.sum(np.sign(vs[1:]) != np.sign(vs[:-1])))
        parity = 1 if np.dot(v, v[::-1]) >= 0 else -1
        out.append((float(vals[j]), nodes, parity))
    if check_box and out:
        doubled = coordinate_oracle(potential, 2.0 * box_half_width, 2 * points, richardson)
        for (e1, _, _), (e2, _, _) in zip(out, doubled):
            if abs(e1 - e2) > 1e-6 * abs(e1):
                raise OracleInvalidError(f"level {e1:.6e} moved to {e2:.6e} when the box doubled")
    return out


def oracle_box(energy: float, potential: PotentialSpec, h: float = 0.02) -> tuple[float, int]:
    """Box half-width and point count giving exp(-kappa L) < 1e-10 at spacing ~h."""
    kappa = math.sqrt(2.0 * abs(energy))
    L = max(12.0, 23.1 / kappa)
    return L, int(2 * L / h)
