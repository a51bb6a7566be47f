"""Quadrature rules on the infinite momentum line.

Two families are provided. ``symmetric-rational`` maps Gauss-Legendre
nodes with ``k = s t / (1 - t^2)`` and suits integrands with a single
characteristic scale. ``symmetric-log-clustered`` is a composite rule of
Gauss-Legendre panels whose edges grow geometrically from ``scale`` up
to k = 1, closed by a rationally mapped tail holding the remaining
nodes; it resolves near-threshold structure at ``k ~ scale`` and the
O(1) potential scale on one grid. ``symmetric-pole-adapted`` extends the
latter with a Gauss-Legendre panel centred on each principal-value pole
so that no node approaches the singularity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import ConfigurationError, ShapeError

MapKind = Literal["symmetric-rational", "symmetric-log-clustered"]
MAP_KINDS = ("symmetric-rational", "symmetric-log-clustered")
MAP_ALIASES = {"rational": "symmetric-rational", "log": "symmetric-log-clustered",
               "log-clustered": "symmetric-log-clustered"}
POLE_ADAPTED = "symmetric-pole-adapted"

MIN_COUNT = 8
# geometric panels cover [0, SPLIT]; a rationally mapped tail covers the rest
SPLIT = 1.0
PANEL_RATIO = 4.0
MAX_PER_PANEL = 12
TAIL_FRACTION = 0.35
TAIL_SCALE = 4.0
# pole panels: fixed node count, gaps between panels get ~GAP_DENSITY nodes per unit
POLE_PANEL = 12
GAP_DENSITY = 4.0
POLE_TAIL_FRACTION = 0.15


@dataclass(frozen=True, eq=False)
class MomentumGrid:
    nodes: np.ndarray
    weights: np.ndarray
    map_kind: str
    scale: float
    count: int = field(init=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.shape != weights.shape or nodes.ndim != 1:
            raise ShapeError("nodes and weights must be 1-D arrays of equal length")
        nodes.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "count", len(nodes))

    @property
    def is_symmetric(self) -> bool:
        return bool(np.allclose(self.nodes, -self.nodes[::-1], rtol=0, atol=1e-14 * np.max(np.abs(self.nodes)))
                    and np.allclose(self.weights, self.weights[::-1], rtol=1e-14, atol=0))

    def integrate(self, samples) -> float:
        return integrate(self, samples)


def _rational(count: int, scale: float):
    t, w = leggauss(count)
    nodes = scale * t / (1.0 - t**2)
    weights = w * scale * (1.0 + t**2) / (1.0 - t**2) ** 2
    return nodes, weights


def _panel(a: float, b: float, n: int):
    t, w = leggauss(n)
    return 0.5 * (b - a) * t + 0.5 * (b + a), 0.5 * (b - a) * w


def _tail(start: float, n: int):
    # [K, inf): k = K + L u / (1 - u) with u in (0, 1)
    t, w = leggauss(n)
    u = 0.5 * (t + 1.0)
    return start + TAIL_SCALE * u / (1.0 - u), 0.5 * w * TAIL_SCALE / (1.0 - u) ** 2


def _inner_edges(scale: float) -> list[float]:
    edges = [0.0]
    e = scale
    while e * 2.0 < SPLIT:
        edges.append(e)
        e *= PANEL_RATIO
    edges.append(max(SPLIT, 2.0 * scale))
    return edges


def _mirror(parts):
    pos = np.concatenate([p[0] for p in parts])
    wpos = np.concatenate([p[1] for p in parts])
    return np.concatenate([-pos[::-1], pos]), np.concatenate([wpos[::-1], wpos])


def _log_clustered(count: int, scale: float):
    if count % 2:
        raise ConfigurationError("symmetric-log-clustered grids need an even count")
    half = count // 2
    edges = _inner_edges(scale)
    npanels = len(edges) - 1
    per_panel = min(MAX_PER_PANEL, (half - max(12, int(TAIL_FRACTION * half))) // npanels)
    if per_panel < 4:
        raise ConfigurationError(
            f"count={count} too small for {npanels} panels at scale={scale:g}")
    parts = [_panel(a, b, per_panel) for a, b in zip(edges[:-1], edges[1:])]
    parts.append(_tail(edges[-1], half - per_panel * npanels))
    return _mirror(parts)


def pole_adapted_grid(count: int, scale: float, poles, half_width: float = 1.0,
                      panel_count: int = POLE_PANEL) -> MomentumGrid:
    """Log-clustered grid with a symmetric panel of ``panel_count`` nodes on each pole.

    Panel ``i`` spans ``[q_i - h, q_i + h]``; ``h`` shrinks below
    ``half_width`` where needed to keep panels disjoint and clear of the
    inner region. An even ``panel_count`` keeps the pole between nodes.
    """
    if count % 2 or count < MIN_COUNT:
        raise ConfigurationError(f"pole-adapted grids need an even count >= {MIN_COUNT}")
    if panel_count % 2 or panel_count < 4:
        raise ConfigurationError("panel_count must be even and >= 4")
    if not (math.isfinite(scale) and scale > 0 and half_width > 0):
        raise ConfigurationError("scale and half_width must be positive")
    edges = _inner_edges(scale)
    split = edges[-1]
    qs = sorted({float(q) for q in poles})
    if qs and qs[0] <= split:
        raise ConfigurationError(f"pole at {qs[0]:g} inside the clustered region (<= {split:g})")
    bounds = [split] + qs + [math.inf]
    spans = []
    for i, q in enumerate(qs):
        room = min(q - bounds[i] if i == 0 else 0.5 * (q - bounds[i]), 0.5 * (bounds[i + 2] - q))
        h = min(half_width, 0.5 * room)
        spans.append((q - h, q + h))

    half = count // 2
    fixed = []                              # (a, b, n) panels beyond the inner region
    start = split
    for a, b in spans:
        fixed.append((start, a, max(6, math.ceil(GAP_DENSITY * (a - start)))))
        fixed.append((a, b, panel_count))
        start = b
    n_tail = max(12, int(POLE_TAIL_FRACTION * half))
    npanels = len(edges) - 1
    per_panel = min(MAX_PER_PANEL, (half - n_tail - sum(f[2] for f in fixed)) // npanels)
    if per_panel < 4:
        raise ConfigurationError(
            f"count={count} too small for {npanels} inner panels and {len(qs)} pole panels")
    parts = [_panel(a, b, per_panel) for a, b in zip(edges[:-1], edges[1:])]
    parts += [_panel(a, b, n) for a, b, n in fixed]
    parts.append(_tail(start, half - per_panel * npanels - sum(f[2] for f in fixed)))
    nodes, weights = _mirror(parts)
    return MomentumGrid(nodes, weights, POLE_ADAPTED, float(scale))


def build_grid(count: int, map_kind: str = "symmetric-rational", scale: float = 1.0) -> MomentumGrid:
    """Gauss-Legendre rule mapped onto the whole real line.

    Weights include the Jacobian, so ``sum(w * f(k))`` approximates the
    integral of ``f`` over the line.
    """
    map_kind = MAP_ALIASES.get(map_kind, map_kind)
    if map_kind not in MAP_KINDS:
        raise ConfigurationError(f"unknown grid map {map_kind!r}; expected one of {MAP_KINDS}")
    if not isinstance(count, (int, np.integer)) or count < MIN_COUNT:
        raise ConfigurationError(f"grid count must be an integer >= {MIN_COUNT}, got {count!r}")
    if not (math.isfinite(scale) and scale > 0):
        raise ConfigurationError(f"grid scale must be positive, got {scale!r}")
    if map_kind == "symmetric-rational":
        nodes, weights = _rational(int(count), float(scale))
    else:
        nodes, weights = _log_clustered(int(count), float(scale))
    return MomentumGrid(nodes, weights, map_kind, float(scale))


def integrate(grid: MomentumGrid, samples) -> float:
    samples = np.asarray(samples, dtype=float)
    if samples.shape != (grid.count,):
        raise ShapeError(f"expected {grid.count} samples, got shape {samples.shape}")
    return float(np.dot(grid.weights, samples))


def resonance_grid(count: int, two_body_energy: float) -> MomentumGrid:
    """Log-clustered grid whose innermost panel matches the bound-state momentum."""
    kappa = math.sqrt(2.0 * abs(two_body_energy))
    return build_grid(count, "symmetric-log-clustered", min(0.5, 0.2 * kappa))
