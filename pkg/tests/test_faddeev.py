import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hhlfaddeev.analysis import SolveSettings, build_problem
from hhlfaddeev.errors import ConfigurationError, PoleResolutionError
from hhlfaddeev.faddeev import (ChannelConfig, MassParams, ThreeBodyProblem, eigen_scan, find_states,
                                pole_momentum, pole_split, scan_ratios, tau, three_body_grid)
from hhlfaddeev.grids import MomentumGrid
from hhlfaddeev.potentials import PotentialSpec
from hhlfaddeev.twobody import default_two_body_grid, tune_magnitude

MASS = MassParams(20.0)
SMALL = SolveSettings(nu_max=3, p_count=120, k_count=120)


def contact_problem(e2=-1e-3):
    k_grid = default_two_body_grid(e2, 120)
    spec, _ = tune_magnitude("contact", 0, e2, k_grid)
    return ThreeBodyProblem(spec, MASS, ChannelConfig(1), None, k_grid, 0, e2, {})


@pytest.fixture(scope="module")
def gauss_r1():
    e2 = -1e-3
    k_grid = default_two_body_grid(e2, 120)
    spec, _ = tune_magnitude("gaussian", 1, e2, k_grid)
    problem, deep = build_problem(spec, 1, e2, SMALL, k_grid=k_grid)
    return problem


@settings(max_examples=50, deadline=None)
@given(alpha=st.floats(min_value=1e-3, max_value=1e3))
def test_mass_parameters(alpha):
    m = MassParams(alpha)
    assert m.alpha_x == (1 + 2 * alpha) / (2 * (1 + alpha))
    assert m.alpha_y == 2 / (1 + alpha)
    assert 0 < m.c < 1
    # kinetic-energy identity behind E_p = E - alpha_x alpha_y p^2 / 2
    assert m.c**2 + m.axay == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("eta, expected", [(0.0, 0.0), (0.5, -1.0), (2.0, 2.0)])
def test_tau(eta, expected):
    assert tau(eta) == pytest.approx(expected)


def test_tau_pole_is_signalled():
    with pytest.raises(ZeroDivisionError):
        tau(1.0)


def test_pole_momentum_examples():
    assert pole_momentum(-0.7, -0.7, MASS) == 0.0
    assert pole_momentum(-0.7 + MASS.axay / 2, -0.7, MASS) == pytest.approx(1.0, rel=1e-14)
    with pytest.raises(ConfigurationError):
        pole_momentum(-1.0, -0.5, MASS)


def test_pole_split_residue_matches_hellmann_feynman(gauss_r1):
    E_nu = gauss_r1.deep_energies[0]
    q, R = pole_split(-2e-3, 0, E_nu, MASS, gauss_r1.potential, gauss_r1.k_grid)
    assert q == pytest.approx(pole_momentum(-2e-3, E_nu, MASS))
    assert R == pytest.approx(gauss_r1.residue(0), rel=1e-5)


def test_channel_config():
    assert ChannelConfig(4).channels == (0, 1, 2, 3)
    assert ChannelConfig(4, [2, 0]).channels == (0, 2)
    assert list(ChannelConfig(3, [1]).include_mask) == [False, True, False]
    with pytest.raises(ConfigurationError):
        ChannelConfig(3, [])
    with pytest.raises(ConfigurationError):
        ChannelConfig(3, symmetry="anyon")


def test_contact_kernel_is_symmetric_after_weight_scaling():
    problem = contact_problem()
    asm = problem.assemble(-2e-3)
    W = asm.column_weights[0]
    S = asm.matrix * np.sqrt(np.abs(W))[:, None] / np.sqrt(np.abs(W))[None, :]
    # all tau < 0 below threshold, so the scaled kernel is symmetric up to a sign
    assert np.all(W < 0)
    assert np.max(np.abs(S - S.T)) < 1e-12 * np.max(np.abs(S))


def test_r0_assembly_has_no_poles_and_is_smooth():
    problem = contact_problem()
    a, b = problem.assemble(-2e-3), problem.assemble(-2e-3 * (1 + 1e-7))
    assert a.poles == {} and len(a.points) == problem.p_grid.count
    assert np.max(np.abs(a.matrix - b.matrix)) < 1e-5 * np.max(np.abs(a.matrix))


def test_open_channels_add_pole_points(gauss_r1):
    asm = gauss_r1.assemble(-2e-3)
    (q, R), = asm.poles.values()
    assert asm.points[-2:] == pytest.approx([q, -q])
    assert np.all(asm.weights[-2:] == 0)
    assert R > 0


def test_pole_on_a_node_is_an_assembly_error(gauss_r1):
    E = -2e-3
    q, _ = gauss_r1.open_poles(E)[0]
    nodes = np.sort(np.concatenate([gauss_r1.p_grid.nodes[:-1], [q]]))
    nodes = np.concatenate([-nodes[::-1], nodes])
    grid = MomentumGrid(nodes, np.ones_like(nodes), "test", 1.0)
    bad = ThreeBodyProblem(gauss_r1.potential, MASS, ChannelConfig(2), grid, gauss_r1.k_grid, 1,
                           gauss_r1.two_body_energy, gauss_r1.deep_energies)
    with pytest.raises(PoleResolutionError):
        bad.assemble(E)


def test_contact_spectrum_matches_reference_ratios():
    states = find_states(contact_problem())
    assert [s.n for s in states] == [0, 1, 2, 3, 4, 5]
    expected = [-2.7238, -1.6517, -1.3285, -1.1240, -1.0373, -1.0004]
    for s, ref in zip(states, expected):
        assert s.ratio == pytest.approx(ref, rel=5e-4)
        assert abs(s.kernel_eigenvalue - (1 if s.symmetry == "boson" else -1)) <= 1e-8


def test_contact_ratios_are_scale_invariant():
    a = [s.ratio for s in find_states(contact_problem(-1e-2))]
    b = [s.ratio for s in find_states(contact_problem(-1e-6))]
    assert np.allclose(a, b, rtol=1e-6, atol=0)


def test_det_sign_counts_real_crossings():
    problem = contact_problem()
    E_r = abs(problem.two_body_energy)
    flips = 0
    prev = None
    for x in scan_ratios(3.0, 40, 1e-6):
        sgn = problem.det_sign(-x * E_r, 1.0)
        flips += prev is not None and sgn != prev
        prev = sgn
    assert flips == 3


def test_eigen_scan_tracks_continuous_branches():
    problem = contact_problem()
    coarse = eigen_scan(problem, (-3e-3, -1.2e-3), 12)
    fine = eigen_scan(problem, (-3e-3, -1.2e-3), 24)
    jump = lambda rows: max(abs(a[1] - b[1]) for a, b in zip(rows, rows[1:]))
    assert jump(fine) < jump(coarse)
    assert all(r[0] < problem.two_body_energy for r in fine)


def test_eigen_scan_rejects_bad_windows():
    problem = contact_problem()
    with pytest.raises(ConfigurationError):
        eigen_scan(problem, (-3e-3, -1e-4), 10)
    with pytest.raises(ConfigurationError):
        eigen_scan(problem, (-3e-3, -1.5e-3), 2)


def test_full_mask_equals_unmasked_pipeline(gauss_r1):
    masked = ThreeBodyProblem(gauss_r1.potential, MASS, ChannelConfig(3, [0, 1, 2]), gauss_r1.p_grid,
                              gauss_r1.k_grid, 1, gauss_r1.two_body_energy, gauss_r1.deep_energies)
    E = -1.7e-3
    assert np.array_equal(masked.kernel_matrix(E), gauss_r1.kernel_matrix(E))


def test_three_body_grid_places_panels_on_poles(gauss_r1):
    grid = three_body_grid(-1e-3, gauss_r1.deep_energies, MASS, 200)
    q = pole_momentum(-2.25e-3, gauss_r1.deep_energies[0], MASS)
    gaps = np.sort(np.abs(grid.nodes - q))
    assert gaps[0] == pytest.approx(gaps[1], rel=1e-9)


def test_window_must_lie_below_threshold():
    with pytest.raises(ConfigurationError):
        ThreeBodyProblem(PotentialSpec("contact", -0.1), MASS, ChannelConfig(1), None,
                         default_two_body_grid(), 0, 1e-3, {})
