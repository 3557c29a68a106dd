import numpy as np
import pytest

from narrowbeam.array import array_response_sin
from narrowbeam.beams import GroupingPattern, SubIntervalPartition, build_group_beam_matrix, random_beam_matrix
from narrowbeam.sensing import ResponseModel, compressed_response, compressed_response_grad


@pytest.fixture(params=["group", "random"])
def beam(request, small_geom, prior):
    if request.param == "random":
        return random_beam_matrix(small_geom, 4)
    part = SubIntervalPartition.uniform(prior, 2)
    return build_group_beam_matrix(part, GroupingPattern.from_labels([0, 1, -1, 1, 0, 1, 0, 0], 2), small_geom)


def test_matches_dense_product(beam, rng):
    u = rng.uniform(-1, 1, 9)
    v = rng.uniform(-0.9, 0.9, 9)
    dense = beam.dense @ array_response_sin(u, v, beam.geom)
    assert np.allclose(compressed_response(beam, u, v), dense, atol=1e-12)
    rows = np.array([0, 5, 7, 20])
    assert np.allclose(compressed_response(beam, u, v, rows), dense[rows], atol=1e-12)


def test_gradient_matches_finite_differences(beam, rng):
    u = rng.uniform(-0.9, 0.9, 5)
    v = rng.uniform(-0.8, 0.8, 5)
    model = ResponseModel(beam)
    _, du, dv = model.grad(u, v)
    h = 1e-6
    fd_u = (model.value(u + h, v) - model.value(u - h, v)) / (2 * h)
    fd_v = (model.value(u, v + h) - model.value(u, v - h)) / (2 * h)
    assert np.allclose(du, fd_u, atol=1e-6)
    assert np.allclose(dv, fd_v, atol=1e-6)


def test_wrapper_agrees_with_model(beam):
    u, v = np.array([0.2]), np.array([-0.3])
    xi, du, dv = compressed_response_grad(beam, u, v)
    assert np.allclose(xi, compressed_response(beam, u, v))
