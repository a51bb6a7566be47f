"""Universality diagnostics: energy ratios, deviations from the contact
limit, fidelities, and deep-dimer ablations.

Every sweep point tunes the potential to the requested two-body energy,
solves the resonance set of three-body states and compares it with the
contact interaction, whose ratios do not depend on the two-body energy.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

from .errors import ConfigurationError, SolverError
from .faddeev import (POLE_HALF_WIDTH, P_COUNT, ROOT_TOL, WINDOW_MULTIPLIER, ChannelConfig, MassParams,
                      ThreeBodyProblem, ThreeBodyState, find_states, three_body_grid)
from .potentials import PotentialSpec, canonical_shape
from .twobody import bound_energies, default_two_body_grid, tune_magnitude
from .wavefunction import DEFAULT_EXTENT, DEFAULT_RESOLUTION, fidelity, sample_field

log = logging.getLogger(__name__)

CSV_COLUMNS = ("shape", "r", "n", "symmetry", "e2", "v0", "energy", "ratio", "ratio_star",
               "delta_eps", "fidelity")
ABLATION_COLUMNS = ("shape", "r", "n", "mask", "e2", "ratio")
ABLATION_MASKS = ((0, 1, 2), (0, 2), (1, 2), (2,))
CONTACT_E2 = -1e-3


@dataclass(frozen=True)
class SolveSettings:
    alpha: float = 20.0
    nu_max: int = 10
    p_count: int = P_COUNT
    k_count: int = 200
    pole_half_width: float = POLE_HALF_WIDTH
    multiplier: float = WINDOW_MULTIPLIER
    scan_steps: int = 48
    closest: float = 1e-6
    root_tol: float = ROOT_TOL
    extent: float = DEFAULT_EXTENT
    resolution: int = DEFAULT_RESOLUTION


@dataclass
class Solution:
    potential: PotentialSpec
    states: list[ThreeBodyState]
    deep_energies: dict[int, float]
    tuning: dict


def build_problem(potential: PotentialSpec, r: int, e2: float, settings: SolveSettings = SolveSettings(),
                  include: Sequence[int] | None = None, k_grid=None) -> tuple[ThreeBodyProblem, dict]:
    k_grid = k_grid if k_grid is not None else default_two_body_grid(e2, settings.k_count)
    mass = MassParams(settings.alpha)
    deep = {}
    if r > 0:
        deep = {s.r: s.energy for s in bound_energies(potential, k_grid, r) if s.r < r}
    p_grid = three_body_grid(e2, deep, mass, settings.p_count, settings.pole_half_width,
                             settings.multiplier, rank_one=potential.is_rank_one)
    channels = ChannelConfig(settings.nu_max, include)
    return ThreeBodyProblem(potential, mass, channels, p_grid, k_grid, r, e2, deep), deep


def solve_resonance(shape: str, r: int, e2: float, settings: SolveSettings = SolveSettings(),
                    include: Sequence[int] | None = None,
                    symmetry: str | Sequence[str] = ("boson", "fermion")) -> Solution:
    """Tune to E_r = e2 and return the resonance set of three-body states."""
    shape = canonical_shape(shape)
    k_grid = default_two_body_grid(e2, settings.k_count)
    potential, info = tune_magnitude(shape, r, e2, k_grid)
    problem, deep = build_problem(potential, r, e2, settings, include, k_grid)
    states = find_states(problem, symmetry, settings.multiplier, settings.scan_steps, settings.closest,
                         settings.root_tol)
    return Solution(potential, states, deep, info)


def reference_ratios(alpha: float = 20.0, settings: SolveSettings | None = None) -> dict[int, float]:
    """Contact-interaction ratios keyed by n."""
    if not alpha > 0:
        raise ConfigurationError("mass ratio must be positive")
    settings = replace(settings or SolveSettings(), alpha=alpha)
    sol = solve_resonance("contact", 0, CONTACT_E2, settings)
    return {st.n: st.ratio for st in sol.states}


def delta_eps(ratio: float, ratio_star: float) -> float:
    return abs((ratio - ratio_star) / ratio_star)


@dataclass
class RatioRecord:
    shape: str
    r: int
    n: int
    symmetry: str
    e2: float
    v0: float
    energy: float
    ratio: float
    ratio_star: float
    delta_eps: float = field(init=False)
    fidelity: float | None = None
    error: str | None = None

    def __post_init__(self):
        self.delta_eps = delta_eps(self.ratio, self.ratio_star) if self.error is None else math.nan

    def validate(self) -> None:
        if self.error is not None:
            return
        if not (self.ratio < -1.0 and self.ratio_star < -1.0):
            raise SolverError(f"ratio {self.ratio} or reference {self.ratio_star} not below -1")
        if self.delta_eps != delta_eps(self.ratio, self.ratio_star):
            raise SolverError("stored deviation disagrees with its recomputation")

    def row(self) -> dict:
        return {"shape": self.shape, "r": self.r, "n": self.n, "symmetry": self.symmetry,
                "e2": self.e2, "v0": self.v0, "energy": self.energy, "ratio": self.ratio,
                "ratio_star": self.ratio_star, "delta_eps": self.delta_eps, "fidelity": self.fidelity}


@dataclass
class AblationRecord:
    shape: str
    r: int
    n: int
    included: tuple[int, ...]
    limit_ratio: float
    trace: list[tuple[float, float]]

    def __post_init__(self):
        if not self.included or self.r not in self.included:
            raise ConfigurationError(f"mask {self.included} must be non-empty and contain nu={self.r}")


def _reference_fields(settings: SolveSettings):
    sol = solve_resonance("contact", 0, CONTACT_E2, settings)
    ratios = {st.n: st.ratio for st in sol.states}
    fields = {st.n: sample_field(st, settings.extent, settings.resolution) for st in sol.states}
    return ratios, fields


def _sweep_point(args) -> list[RatioRecord]:
    shape, r, e2, settings, ref, ref_fields = args
    try:
        sol = solve_resonance(shape, r, e2, settings)
    except SolverError as exc:
        log.warning("sweep point %s r=%d e2=%g failed: %s", shape, r, e2, exc)
        return [RatioRecord(shape, r, -1, "", e2, math.nan, math.nan, math.nan, math.nan, error=str(exc))]
    out = []
    for st in sol.states:
        if st.n not in ref:
            log.warning("state n=%d at %s r=%d e2=%g has no contact counterpart", st.n, shape, r, e2)
            continue
        F = None
        if ref_fields is not None:
            F = fidelity(sample_field(st, settings.extent, settings.resolution), ref_fields[st.n])
        out.append(RatioRecord(canonical_shape(shape), r, st.n, st.symmetry, e2, sol.potential.v0,
                               st.energy, st.ratio, ref[st.n], F))
    return out


def _run(tasks: list, worker, jobs: int) -> list:
    if jobs <= 1 or len(tasks) <= 1:
        return [worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, tasks))


def universality_sweep(shape: str, r: int, e2_list: Iterable[float], alpha: float = 20.0,
                       settings: SolveSettings | None = None, with_fidelity: bool = False,
                       jobs: int = 1) -> list[RatioRecord]:
    """One record per (E_r, n); failed points are kept as records with ``error`` set."""
    e2_list = [float(e) for e in e2_list]
    if any(e >= 0 for e in e2_list):
        raise ConfigurationError("two-body energies must be negative")
    if any(abs(a) < abs(b) for a, b in zip(e2_list, e2_list[1:])):
        raise ConfigurationError("e2_list must be sorted by decreasing magnitude")
    settings = replace(settings or SolveSettings(), alpha=alpha)
    if with_fidelity:
        ref, ref_fields = _reference_fields(settings)
    else:
        ref, ref_fields = reference_ratios(alpha, settings), None
    tasks = [(shape, r, e2, settings, ref, ref_fields) for e2 in e2_list]
    records = [rec for chunk in _run(tasks, _sweep_point, jobs) for rec in chunk]
    for rec in records:
        rec.validate()
    return records


def _ablation_point(args) -> tuple[tuple[int, ...], float, float | None]:
    shape, r, n, mask, e2, settings = args
    sym = "boson" if n % 2 == 0 else "fermion"
    sol = solve_resonance(shape, r, e2, settings, include=mask, symmetry=sym)
    hit = [st.ratio for st in sol.states if st.n == n]
    return mask, e2, (hit[0] if hit else None)


def ablation_study(shape: str, r: int = 2, n: int = 1, masks: Sequence[Sequence[int]] = ABLATION_MASKS,
                   e2_list: Iterable[float] = (-1e-3, -1e-4, -1e-5), settings: SolveSettings | None = None,
                   jobs: int = 1) -> list[AblationRecord]:
    """Ratio of state n with only the channels in each mask kept in the expansion."""
    masks = [tuple(sorted(set(int(v) for v in m))) for m in masks]
    for m in masks:
        if r not in m:
            raise ConfigurationError(f"mask {m} must include the resonant term nu={r}")
    e2_list = [float(e) for e in e2_list]
    settings = settings or SolveSettings()
    tasks = [(shape, r, n, m, e2, settings) for m in masks for e2 in e2_list]
    results = _run(tasks, _ablation_point, jobs)
    out = []
    for m in masks:
        trace = [(e2, ratio) for mm, e2, ratio in results if mm == m]
        found = [t for t in trace if t[1] is not None]
        if not found:
            raise SolverError(f"state n={n} not found for mask {m}")
        limit = min(found, key=lambda t: abs(t[0]))[1]
        out.append(AblationRecord(canonical_shape(shape), r, n, m, limit, trace))
    return out


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def emit(records: Sequence[RatioRecord], fmt: str, path) -> None:
    """Write ratio records as CSV (fixed columns) or JSON."""
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for rec in records:
                row = rec.row()
                writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    elif fmt == "json":
        with open(path, "w") as fh:
            json.dump([asdict(rec) for rec in records], fh, indent=1)
            fh.write("\n")
    else:
        raise ConfigurationError(f"unknown output format {fmt!r}")


def emit_ablation(records: Sequence[AblationRecord], fmt: str, path) -> None:
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(ABLATION_COLUMNS)
            for rec in records:
                mask = "|".join(str(v) for v in rec.included)
                for e2, ratio in rec.trace:
                    writer.writerow([rec.shape, rec.r, rec.n, mask, _fmt(e2), _fmt(ratio)])
    elif fmt == "json":
        with open(path, "w") as fh:
            json.dump([asdict(rec) for rec in records], fh, indent=1)
            fh.write("\n")
    else:
        raise ConfigurationError(f"unknown output format {fmt!r}")


def read_records(path) -> list[dict]:
    """CSV rows back as dicts of floats/ints (empty fidelity -> None)."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rec = {}
            for key, val in row.items():
                if key in ("shape", "symmetry"):
                    rec[key] = val
                elif key in ("r", "n"):
                    rec[key] = int(val)
                else:
                    rec[key] = float(val) if val != "" else None
            out.append(rec)
    return out
