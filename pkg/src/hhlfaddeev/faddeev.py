"""Coupled Faddeev integral equations for the heavy-heavy-light system.

With the separable expansion of the heavy-light t-matrix the Faddeev
component reduces to channel functions phi_nu(p) obeying

    phi_l(p) = +- sum_nu int dq/(2pi) tau_nu(E_q) phi_nu(q)
               g_l(q + c p, E_p) g_nu(p + c q, E_q) / (E - q^2/2 - p^2/2 - c p q)

with ``c = alpha/(1+alpha)`` and ``E_p = E - alpha_x alpha_y p^2/2``.
Bound states are energies where the kernel (without the +- sign) has
eigenvalue +1 (bosons) or -1 (fermions).

Open deep-dimer channels (two-body states lying below E)
make tau_nu(E_q) singular at ``q = +-q*``. The integral is taken as a
principal value: the pole momenta join the collocation points with zero
quadrature weight and carry the analytic subtraction terms.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigs

from .errors import ConfigurationError, NumericalError, PoleResolutionError
from .grids import MomentumGrid, build_grid, pole_adapted_grid
from .potentials import PotentialSpec
from .twobody import TWO_PI, WeinbergCache, eta_of_energy, tau_values

log = logging.getLogger(__name__)

SYMMETRIES = ("boson", "fermion")
WINDOW_MULTIPLIER = 3.5
ROOT_TOL = 1e-8
IMAG_TOL = 1e-8
# three-body p-grid defaults: inner clustering relative to kappa, pole panel half-width
P_COUNT = 300
P_SCALE_FACTOR = 0.05
POLE_HALF_WIDTH = 1.0
CONTACT_SCALE_FACTOR = 0.2
ASSEMBLY_CACHE = 4


@dataclass(frozen=True)
class MassParams:
    alpha: float
    alpha_x: float = field(init=False)
    alpha_y: float = field(init=False)

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise ConfigurationError(f"mass ratio must be positive, got {self.alpha!r}")
        object.__setattr__(self, "alpha_x", (1.0 + 2.0 * self.alpha) / (2.0 * (1.0 + self.alpha)))
        object.__setattr__(self, "alpha_y", 2.0 / (1.0 + self.alpha))

    @property
    def c(self) -> float:
        """Cross-term coefficient alpha/(1+alpha)."""
        return self.alpha / (1.0 + self.alpha)

    @property
    def axay(self) -> float:
        return self.alpha_x * self.alpha_y


def symmetry_sign(symmetry: str) -> int:
    if symmetry not in SYMMETRIES:
        raise ConfigurationError(f"symmetry must be one of {SYMMETRIES}, got {symmetry!r}")
    return 1 if symmetry == "boson" else -1


@dataclass(frozen=True)
class ChannelConfig:
    nu_max: int = 10
    include: tuple[int, ...] | None = None
    symmetry: str = "boson"

    def __post_init__(self):
        if self.nu_max < 1:
            raise ConfigurationError("nu_max must be >= 1")
        symmetry_sign(self.symmetry)
        if self.include is not None:
            inc = tuple(sorted(set(int(v) for v in self.include)))
            if not inc:
                raise ConfigurationError("the channel mask must include at least one term")
            if inc[0] < 0:
                raise ConfigurationError(f"negative channel index in mask {inc}")
            object.__setattr__(self, "include", inc)
            if inc[-1] >= self.nu_max:
                object.__setattr__(self, "nu_max", inc[-1] + 1)

    @property
    def channels(self) -> tuple[int, ...]:
        return tuple(range(self.nu_max)) if self.include is None else self.include

    @property
    def include_mask(self) -> np.ndarray:
        mask = np.zeros(self.nu_max, dtype=bool)
        mask[list(self.channels)] = True
        return mask


@dataclass
class ThreeBodyState:
    r: int
    n: int
    symmetry: str
    energy: float
    two_body_energy: float
    kernel_eigenvalue: float
    points: np.ndarray          # collocation momenta (grid nodes then pole points)
    phi: np.ndarray             # (n_channels, n_points)
    channels: tuple[int, ...]
    problem: "ThreeBodyProblem" = field(repr=False)

    @property
    def ratio(self) -> float:
        return self.energy / abs(self.two_body_energy)


def tau(eta: float) -> float:
    if eta == 1.0:
        raise ZeroDivisionError("tau has a pole at eta = 1")
    return float(tau_values(eta))


def pole_momentum(E: float, deep_energy: float, mass: MassParams) -> float:
    """Momentum q* at which E_q crosses the deep two-body energy."""
    if E < deep_energy:
        raise ConfigurationError("channel closed: E lies below the deep two-body energy")
    return math.sqrt(2.0 * (E - deep_energy) / mass.axay)


def pole_split(E: float, nu: int, deep_energy: float, mass: MassParams,
               potential: PotentialSpec | None = None, grid: MomentumGrid | None = None,
               step: float = 1e-5, rtol: float = 1e-2) -> tuple[float, float]:
    """Pole location q* and residue R with tau_nu(E_q) ~ R / (q*^2 - q^2).

    ``R = 2 / (alpha_x alpha_y eta'(E_nu))``. The derivative comes from a
    centered difference of eta_nu around the deep energy, accepted only if
    halving the step moves it by less than ``rtol``.
    """
    qstar = pole_momentum(E, deep_energy, mass)
    if potential is None or grid is None:
        return qstar, float("nan")

    def centered(h):
        de = h * abs(deep_energy)
        return (eta_of_energy(potential, nu, deep_energy + de, grid)
                - eta_of_energy(potential, nu, deep_energy - de, grid)) / (2.0 * de)

    d1, d2 = centered(step), centered(0.5 * step)
    if not d2 > 0 or abs(d1 - d2) > rtol * abs(d2):
        raise PoleResolutionError(f"eta'_{nu} at E={deep_energy:.6g} unstable: {d1:.6e} vs {d2:.6e}")
    return qstar, 2.0 / (mass.axay * d2)


@dataclass
class KernelAssembly:
    energy: float
    matrix: np.ndarray       # (n_ch * n_pts, n_ch * n_pts)
    points: np.ndarray       # collocation momenta
    weights: np.ndarray      # quadrature weights (zero on pole points)
    channels: tuple[int, ...]
    poles: dict              # nu -> (qstar, residue)
    n_nodes: int
    column_weights: np.ndarray = field(repr=False)   # (n_ch, n_pts): w_j tau_nu or subtraction terms
    systems: list = field(repr=False)                # Weinberg data at E_{x_j} for every point


class ThreeBodyProblem:
    """Everything fixed while the three-body energy varies.

    ``deep_energies`` maps channel index nu to the two-body energy E_nu^(2)
    of each deep dimer below the resonant state; those channels acquire
    principal-value poles once E lies above them.
    """

    def __init__(self, potential: PotentialSpec, mass: MassParams, channels: ChannelConfig,
                 p_grid: MomentumGrid | None, k_grid: MomentumGrid, r: int, two_body_energy: float,
                 deep_energies: dict[int, float] | None = None):
        if two_body_energy >= 0:
            raise ConfigurationError("resonant two-body energy must be negative")
        self.potential = potential
        self.mass = mass
        self.channel_config = channels
        if potential.is_rank_one:
            channels = ChannelConfig(1, None, channels.symmetry)
        self.channels = channels.channels
        self.nu_max = max(self.channels) + 1
        if r not in self.channels:
            warnings.warn(f"resonant term nu={r} excluded from the channel set {self.channels}")
        if p_grid is None:
            p_grid = three_body_grid(two_body_energy, deep_energies, mass, rank_one=potential.is_rank_one)
        self.p_grid = p_grid
        self.k_grid = k_grid
        self.r = r
        self.two_body_energy = float(two_body_energy)
        self.deep_energies = dict(deep_energies or {})
        self.weinberg = WeinbergCache(potential, k_grid, self.nu_max)
        self._residues: dict[int, float] = {}
        self._assembled: dict[float, KernelAssembly] = {}

    # -- two-body data --------------------------------------------------
    def residue(self, nu: int) -> float:
        res = self._residues.get(nu)
        if res is None:
            E_nu = self.deep_energies[nu]
            sys_nu = self.weinberg(E_nu)
            deta = sys_nu.detas[nu]
            if not deta > 0:
                raise PoleResolutionError(f"non-positive eta' for deep channel {nu}")
            res = 2.0 / (self.mass.axay * deta)
            self._residues[nu] = res
        return res

    def open_poles(self, E: float) -> dict[int, tuple[float, float]]:
        poles = {}
        for nu, E_nu in sorted(self.deep_energies.items()):
            if nu in self.channels and E > E_nu:
                poles[nu] = (pole_momentum(E, E_nu, self.mass), self.residue(nu))
        return poles

    def systems(self, E: float, points: np.ndarray, poles: dict) -> list:
        out = []
        pole_energy = {round(q, 14): self.deep_energies[nu] for nu, (q, _) in poles.items()}
        for x in points:
            Ex = pole_energy.get(round(abs(x), 14))
            if Ex is None:
                Ex = E - 0.5 * self.mass.axay * x * x
            out.append(self.weinberg(Ex))
        return out

    def release(self) -> None:
        """Drop the kernel and Weinberg memos; they refill on demand."""
        self._assembled.clear()
        self.weinberg.clear()

    # -- kernel -----------------------------------------------------------
    def assemble(self, E: float) -> KernelAssembly:
        """Kernel at three-body energy E; the last few assemblies are kept."""
        asm = self._assembled.get(E)
        if asm is None:
            asm = self._assemble(E)
            if len(self._assembled) >= ASSEMBLY_CACHE:
                self._assembled.pop(next(iter(self._assembled)))
            self._assembled[E] = asm
        return asm

    def _assemble(self, E: float) -> KernelAssembly:
        if not E < 0:
            raise ConfigurationError("three-body energy must be negative")
        mass, ch = self.mass, list(self.channels)
        c = mass.c
        nodes, w = self.p_grid.nodes, self.p_grid.weights
        poles = self.open_poles(E)
        extra = []
        for nu, (q, _) in poles.items():
            extra += [q, -q]
        for q in extra[::2]:
            if np.min(np.abs(np.abs(nodes) - q)) < 1e-6 * q:
                raise PoleResolutionError(f"pole momentum {q:.8g} falls on a quadrature node")
        points = np.concatenate([nodes, np.asarray(extra, dtype=float)])
        weights = np.concatenate([w, np.zeros(len(extra))])
        n_nodes, n_pts = len(nodes), len(points)
        systems = self.systems(E, points, poles)

        # A[l, i, j] = g_l(x_j + c x_i, E_{x_i})
        A = np.empty((len(ch), n_pts, n_pts))
        for i, sys_i in enumerate(systems):
            A[:, i, :] = sys_i.extend(points + c * points[i])[ch]
        D = E - 0.5 * points[None, :] ** 2 - 0.5 * points[:, None] ** 2 - c * np.outer(points, points)
        if not np.all(D < 0):
            raise NumericalError(f"energy denominator not negative at E={E:.6e}")

        # column weights W[nu, j]: w_j tau_nu(E_{x_j}) on nodes, subtraction terms on pole points
        W = np.zeros((len(ch), n_pts))
        taus = np.array([s.taus[ch] for s in systems[:n_nodes]]).T
        W[:, :n_nodes] = w[None, :] * taus
        for m, (nu, (q, R)) in enumerate(poles.items()):
            a = ch.index(nu)
            denom = q * q - nodes**2
            S0 = np.sum(w / denom)
            S1 = np.sum(w * nodes / denom)
            jp = n_nodes + 2 * m
            W[a, jp] = -R * (0.5 * S0 + 0.5 * S1 / q)
            W[a, jp + 1] = -R * (0.5 * S0 - 0.5 * S1 / q)

        Dinv = 1.0 / (TWO_PI * D)
        nc = len(ch)
        M = np.empty((nc * n_pts, nc * n_pts))
        for a in range(nc):
            left = A[a] * Dinv
            for b in range(nc):
                M[a * n_pts:(a + 1) * n_pts, b * n_pts:(b + 1) * n_pts] = left * A[b].T * W[b][None, :]
        return KernelAssembly(E, M, points, weights, tuple(ch), poles, n_nodes, W, systems)

    def kernel_matrix(self, E: float) -> np.ndarray:
        return self.assemble(E).matrix

    # -- spectra ------------------------------------------------------------
    def eigenvalues(self, E: float) -> np.ndarray:
        return np.linalg.eigvals(self.assemble(E).matrix)

    def shifted_analysis(self, E: float, target: float, k: int = 6):
        """Real eigenpair of M(E) nearest ``target`` and the sign of det(M - target).

        Complex pairs belong to the deep-dimer continuum and are skipped;
        if no real eigenvalue is found among the ``k`` nearest the
        principal-value assumption is reported as violated. The sign of
        det(M - target) flips exactly when a real eigenvalue crosses the
        target, since conjugate pairs contribute |lam - target|^2 > 0.
        """
        asm = self.assemble(E)
        M = asm.matrix
        n = M.shape[0]
        lu, piv = sla.lu_factor(M - target * np.eye(n), check_finite=False)
        swaps = np.count_nonzero(piv != np.arange(n))
        sign = (-1 if swaps % 2 else 1) * int(np.prod(np.sign(np.diag(lu))))
        if n <= 400:
            vals, vecs = np.linalg.eig(M)
        else:
            op = LinearOperator((n, n), matvec=lambda x: sla.lu_solve((lu, piv), x), dtype=float)
            try:
                mu, vecs = eigs(op, k=min(k, n - 2), which="LM", tol=1e-13, v0=np.ones(n))
            except ArpackNoConvergence as exc:
                raise NumericalError(f"shift-invert Arnoldi failed at E={E:.6e}") from exc
            vals = target + 1.0 / mu
        real = np.abs(vals.imag) <= IMAG_TOL * np.maximum(1.0, np.abs(vals.real))
        if not np.any(real):
            j = int(np.argmin(np.abs(vals - target)))
            raise NumericalError(f"complex kernel eigenvalue {vals[j]:.6g} near {target} at E={E:.6e}")
        idx = np.flatnonzero(real)
        j = int(idx[np.argmin(np.abs(vals[idx].real - target))])
        vec = vecs[:, j]
        vec = np.real(vec * np.exp(-1j * np.angle(vec[np.argmax(np.abs(vec))])))
        return float(vals[j].real), vec / np.linalg.norm(vec), asm, sign

    def nearest_eigenpair(self, E: float, target: float, k: int = 6):
        """Real kernel eigenvalue closest to ``target`` with its eigenvector and assembly."""
        lam, vec, asm, _ = self.shifted_analysis(E, target, k)
        return lam, vec, asm

    def det_sign(self, E: float, s: float) -> int:
        """Sign of det(M(E) - s); it flips exactly when a real eigenvalue crosses ``s``."""
        M = self.assemble(E).matrix
        lu, piv = sla.lu_factor(M - s * np.eye(M.shape[0]), check_finite=False)
        swaps = np.count_nonzero(piv != np.arange(len(piv)))
        sign = -1 if swaps % 2 else 1
        return int(sign * np.prod(np.sign(np.diag(lu))))

    def window(self, multiplier: float = WINDOW_MULTIPLIER) -> tuple[float, float]:
        return multiplier * self.two_body_energy, self.two_body_energy


def three_body_grid(two_body_energy: float, deep_energies: dict[int, float] | None, mass: MassParams,
                    count: int = P_COUNT, half_width: float = POLE_HALF_WIDTH,
                    multiplier: float = WINDOW_MULTIPLIER, rank_one: bool = False) -> MomentumGrid:
    """p-grid clustered at the three-body momentum scale with a panel on each deep-dimer pole.

    A rank-one (contact) kernel has no scale besides kappa, so it gets a
    rational map with scale proportional to kappa and its ratios come out
    exactly independent of the two-body energy.

    Pole panels are centred on q* at the middle of the search window; q*
    moves by a tiny fraction of the panel width across the window because
    |E| is small compared with the deep binding energies.
    """
    kappa = math.sqrt(2.0 * abs(two_body_energy))
    if rank_one:
        return build_grid(count, "symmetric-rational", CONTACT_SCALE_FACTOR * kappa)
    E_mid = 0.5 * (1.0 + multiplier) * two_body_energy
    poles = [pole_momentum(E_mid, E_nu, mass) for E_nu in (deep_energies or {}).values() if E_mid > E_nu]
    return pole_adapted_grid(count, P_SCALE_FACTOR * kappa, poles, half_width)


def scan_ratios(multiplier: float = WINDOW_MULTIPLIER, steps: int = 48, closest: float = 1e-6) -> np.ndarray:
    """Energy ratios |E|/|E_r| from deep to shallow, log-spaced in distance to threshold."""
    return 1.0 + np.logspace(math.log10(multiplier - 1.0), math.log10(closest), steps)


def eigen_scan(problem: ThreeBodyProblem, window: tuple[float, float] | None = None, steps: int = 48,
               track: bool = True):
    """Kernel eigenvalues closest to +1 and -1 over an energy window.

    Returns a list of ``(E, lam_plus, lam_minus)``. With ``track`` the
    branch reported at each step is the one whose eigenvector overlaps
    most with the previous step's, starting from the eigenvalue nearest
    to +-1 at the deepest energy.
    """
    if steps < 3:
        raise ConfigurationError("eigen_scan needs at least 3 steps")
    lo, hi = window if window is not None else problem.window()
    if not lo < hi < 0 or hi > problem.two_body_energy:
        raise ConfigurationError("scan window must lie below the resonant two-body energy")
    energies = np.linspace(lo, hi, steps)
    out = []
    prev = {1: None, -1: None}
    for E in energies:
        asm = problem.assemble(E)
        vals, vecs = np.linalg.eig(asm.matrix)
        row = [float(E)]
        for s in (1, -1):
            if track and prev[s] is not None:
                overlap = np.abs(prev[s].conj() @ vecs)
                j = int(np.argmax(overlap))
            else:
                j = int(np.argmin(np.abs(vals - s)))
            lam = vals[j]
            if abs(lam.imag) > IMAG_TOL * max(1.0, abs(lam.real)) and abs(lam.real - s) < 0.5:
                raise NumericalError(f"complex eigenvalue {lam:.6g} on tracked branch at E={E:.6e}")
            prev[s] = vecs[:, j]
            row.append(float(lam.real))
        out.append(tuple(row))
    return out


def _refine_root(problem: ThreeBodyProblem, s: int, x_lo: float, x_hi: float, tol: float = ROOT_TOL,
                 max_iter: int = 60):
    """Root of lam(E) = s between ratios x_lo > x_hi (E = -x |E_r|).

    Illinois false position on sign(det(M - s)) * |lam_near - s|. The
    function changes sign only across the bracketed crossing and equals
    lam - s next to it, so the iteration stops once |lam - s| <= tol.
    """
    E_r = abs(problem.two_body_energy)

    def f(x):
        lam, vec, asm, sign = problem.shifted_analysis(-x * E_r, float(s))
        return sign * abs(lam - s), (x, lam, vec, asm)

    a, b = x_hi, x_lo
    fa, hit_a = f(a)
    fb, hit_b = f(b)
    if fa * fb > 0:
        return None
    side = 0
    for _ in range(max_iter):
        x = (a * fb - b * fa) / (fb - fa)
        if not min(a, b) < x < max(a, b):
            x = 0.5 * (a + b)
        fx, hit = f(x)
        if abs(hit[1] - s) <= tol:
            return hit
        if fx * fb < 0:
            a, fa = b, fb
            side = 0
        else:
            fa *= 0.5 if side == 1 else 1.0
            side = 1
        b, fb = x, fx
        if abs(a - b) <= 1e-15 * abs(b):
            break
    return None


def _det_brackets(problem: ThreeBodyProblem, signs: Sequence[int], ratios: np.ndarray) -> dict:
    """Adjacent scan ratios between which det(M - s) changes sign, per s."""
    E_r = abs(problem.two_body_energy)
    table = np.array([[problem.det_sign(-x * E_r, s) for s in signs] for x in ratios])
    out = {}
    for col, s in enumerate(signs):
        out[s] = [(ratios[i], ratios[i + 1]) for i in range(len(ratios) - 1) if table[i, col] != table[i + 1, col]]
    return out


def find_states(problem: ThreeBodyProblem, symmetry: str | Sequence[str] = ("boson", "fermion"),
                multiplier: float = WINDOW_MULTIPLIER, steps: int = 48, closest: float = 1e-6,
                tol: float = ROOT_TOL) -> list[ThreeBodyState]:
    """All three-body states with E in [multiplier*E_r, E_r) for the requested symmetries.

    Crossings of +1 (bosons) or -1 (fermions) are bracketed on a scan
    log-spaced in the distance to threshold by sign changes of
    det(M - s). Complex pairs from the deep-dimer continuum never change
    that sign, so only real branches produce brackets. Each bracket is
    refined to ``|lam - s| <= tol``.
    """
    syms = (symmetry,) if isinstance(symmetry, str) else tuple(symmetry)
    E_r = abs(problem.two_body_energy)
    ratios = scan_ratios(multiplier, steps, closest)
    brackets = _det_brackets(problem, [symmetry_sign(sym) for sym in syms], ratios)
    states = []
    for sym in syms:
        s = symmetry_sign(sym)
        found = []
        for x_lo, x_hi in brackets[s]:
            hit = _refine_root(problem, s, x_lo, x_hi, tol)
            if hit is None:
                log.warning("%s bracket (%.8g, %.8g) did not refine to a crossing", sym, x_lo, x_hi)
                continue
            if x_lo == ratios[0]:
                log.warning("%s state near the deep window edge; window may be too narrow", sym)
            found.append(hit)
        found.sort(key=lambda h: -h[0])
        for idx, (x, lam, vec, asm) in enumerate(found):
            phi = vec.reshape(len(asm.channels), len(asm.points))
            states.append(ThreeBodyState(
                r=problem.r, n=2 * idx + (0 if s > 0 else 1), symmetry=sym,
                energy=float(-x * E_r), two_body_energy=problem.two_body_energy,
                kernel_eigenvalue=lam, points=asm.points.copy(), phi=phi,
                channels=asm.channels, problem=problem))
    states.sort(key=lambda st: st.n)
    problem.release()
    return states
