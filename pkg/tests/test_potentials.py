import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hhlfaddeev.errors import ConfigurationError
from hhlfaddeev.potentials import (PotentialSpec, canonical_shape, kernel_by_quadrature, momentum_kernel,
                                   self_check, shape_transform)


def test_kernels_match_brute_force_quadrature():
    assert self_check(tol=1e-8) < 1e-8


@pytest.mark.parametrize("shape, area", [("gaussian", math.sqrt(math.pi)), ("lorentz-cubed", 3 * math.pi / 8)])
def test_transform_at_zero_is_the_shape_area(shape, area):
    assert shape_transform(shape, 0.0) == pytest.approx(area, rel=1e-14)


def test_contact_kernel_is_constant():
    spec = PotentialSpec("contact", -0.3)
    vals = momentum_kernel(spec, np.array([0.0, 1.0, 5.0])[:, None], np.array([-2.0, 0.5]))
    assert np.all(vals == -0.3)


@settings(max_examples=40, deadline=None)
@given(k=st.floats(-30, 30), kp=st.floats(-30, 30), shape=st.sampled_from(["gaussian", "lorentz-cubed"]))
def test_kernel_is_symmetric_and_translation_invariant(k, kp, shape):
    spec = PotentialSpec(shape, -1.7)
    a = momentum_kernel(spec, k, kp)
    assert a == momentum_kernel(spec, kp, k)
    assert a == pytest.approx(momentum_kernel(spec, k + 1.0, kp + 1.0), rel=1e-12, abs=1e-300)
    # attractive potential with positive-definite shape
    assert a <= 0.0


def test_single_probe_against_quadrature():
    spec = PotentialSpec("lorentz-cubed", -2.0)
    assert momentum_kernel(spec, 1.3, -0.4) == pytest.approx(kernel_by_quadrature(spec, 1.3, -0.4), rel=1e-9)


@pytest.mark.parametrize("alias, name", [("gauss", "gaussian"), ("lorentz3", "lorentz-cubed"), ("delta", "contact")])
def test_aliases(alias, name):
    assert canonical_shape(alias) == name


def test_invalid_specs():
    with pytest.raises(ConfigurationError):
        PotentialSpec("gaussian", 0.5)
    with pytest.raises(ConfigurationError):
        canonical_shape("square-well")
