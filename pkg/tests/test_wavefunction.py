import numpy as np
import pytest

from hhlfaddeev.errors import ConfigurationError, ShapeError
from hhlfaddeev.faddeev import ChannelConfig, MassParams, ThreeBodyProblem, find_states
from hhlfaddeev.twobody import default_two_body_grid, tune_magnitude
from hhlfaddeev.wavefunction import (Reconstruction, WaveField2D, discrete_norm, fidelity, sample_field,
                                     scaled_axis, total_psi)


def contact_states(e2):
    k_grid = default_two_body_grid(e2, 120)
    spec, _ = tune_magnitude("contact", 0, e2, k_grid)
    problem = ThreeBodyProblem(spec, MassParams(20.0), ChannelConfig(1), None, k_grid, 0, e2, {})
    return {s.n: s for s in find_states(problem)}


@pytest.fixture(scope="module")
def states():
    return contact_states(-1e-3)


@pytest.fixture(scope="module")
def fields(states):
    return {n: sample_field(s, 6.0, 48) for n, s in states.items()}


def test_scaled_axis():
    K = scaled_axis(6.0, 8)
    assert len(K) == 9 and K[4] == 0.0
    assert np.array_equal(K, -K[::-1])
    with pytest.raises(ConfigurationError):
        scaled_axis(6.0, 7)
    with pytest.raises(ConfigurationError):
        scaled_axis(-1.0, 8)


def test_fields_are_normalized_and_symmetric(fields):
    for n, f in fields.items():
        assert f.norm_certificate == pytest.approx(1.0, abs=1e-12)
        assert f.symmetry_defect() <= 1e-8
        assert f.symmetry == ("boson" if n % 2 == 0 else "fermion")


def test_fermion_fields_vanish_at_zero_relative_momentum(fields):
    mid = len(fields[1].k23) // 2
    for n in (1, 3, 5):
        assert np.all(fields[n].values[mid] == 0.0)


def test_fidelity_bounds(fields):
    for n, f in fields.items():
        assert fidelity(f, f) == pytest.approx(1.0, abs=1e-12)
    assert fidelity(fields[0], fields[1]) < 1e-20
    for a in fields.values():
        for b in fields.values():
            assert -1e-12 <= fidelity(a, b) <= 1 + 1e-12


def test_fidelity_is_symmetric_and_sign_blind(fields):
    a, b = fields[0], fields[2]
    flipped = WaveField2D(b.k23, b.p1, -b.values, b.symmetry)
    assert fidelity(a, b) == pytest.approx(fidelity(b, a), rel=1e-12)
    assert fidelity(a, flipped) == pytest.approx(fidelity(a, b), rel=1e-12)


def test_fidelity_needs_matching_grids(states, fields):
    other = sample_field(states[0], 6.0, 40)
    with pytest.raises(ShapeError):
        fidelity(fields[0], other)


def test_csv_round_trip(tmp_path, fields):
    path = tmp_path / "psi.csv"
    fields[3].to_csv(path)
    back = WaveField2D.from_csv(path)
    assert back.symmetry == "fermion"
    assert np.array_equal(back.values, fields[3].values)
    assert np.array_equal(back.k23, fields[3].k23)


def test_field_shape_is_checked():
    with pytest.raises(ShapeError):
        WaveField2D(np.zeros(3), np.zeros(4), np.zeros((4, 3)), "boson")


def test_nystrom_extension_reproduces_collocation_values(states):
    for s in states.values():
        assert Reconstruction(s).residual() <= 1e-6


def test_wave_function_decays_at_large_momentum(states):
    inner = np.abs(total_psi(states[0], np.array([0.5]), np.array([0.5])))[0]
    outer = np.abs(total_psi(states[0], np.array([200.0]), np.array([200.0])))[0]
    assert outer < 1e-4 * inner


def test_direct_total_agrees_with_sampled_field(states, fields):
    f = fields[2]
    direct = total_psi(states[2], f.k23[:, None], f.p1[None, :])
    direct /= discrete_norm(f.k23, f.p1, direct)
    assert np.max(np.abs(np.abs(direct) - np.abs(f.values))) < 1e-10


def test_contact_fields_are_scale_invariant(states, fields):
    deep = contact_states(-1e-6)
    for n, f in fields.items():
        g = sample_field(deep[n], 6.0, 48)
        assert fidelity(f, g) >= 1 - 1e-6


def test_fidelity_converges_under_resolution_doubling(states):
    base = {n: sample_field(s, 6.0, 48) for n, s in states.items() if n in (0, 1)}
    fine = {n: sample_field(s, 6.0, 96) for n, s in states.items() if n in (0, 1)}
    F_base = fidelity(base[0], base[0])
    F_fine = fidelity(fine[0], fine[0])
    assert abs(F_base - F_fine) < 1e-4
