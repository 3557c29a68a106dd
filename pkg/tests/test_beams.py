import numpy as np
import pytest
from hypothesis import given, strategies as st

from narrowbeam.array import UpaGeometry, VerticalPrior, steering_z
from narrowbeam.beams import (
    GroupingPattern,
    SubIntervalPartition,
    build_group_beam_matrix,
    narrow_beam,
    random_beam_matrix,
    read_beam_csv,
    read_pattern_csv,
    wide_beam_matrix,
    write_beam_csv,
    write_pattern_csv,
)


def _commutation(p, q):
    """Permutation K with K vec(A) = vec(A^T) for p x q A (row-major vec)."""
    k = np.zeros((p * q, p * q))
    for i in range(p):
        for j in range(q):
            k[j * p + i, i * q + j] = 1
    return k


@pytest.fixture
def setup(small_geom, prior):
    part = SubIntervalPartition.uniform(prior, 2)
    pat = GroupingPattern.from_labels([0, 1, 1, -1, 0, 0, 1, 1], 2)
    return small_geom, part, pat, build_group_beam_matrix(part, pat, small_geom)


def test_partition_centers(prior):
    part = SubIntervalPartition.uniform(prior, 4)
    assert np.allclose(part.centers, [-0.4375, -0.3125, -0.1875, -0.0625])
    assert list(part.label([-0.5, -0.3, 0.0])) == [0, 1, 3]


def test_narrow_beam_peaks_at_center():
    c, m = -0.3, 6
    w = narrow_beam(c, m)
    grid = np.linspace(-1, 1, 2001)
    gain = np.abs(np.exp(1j * np.pi * np.outer(grid, np.arange(m))) @ w)
    assert grid[np.argmax(gain)] == pytest.approx(c, abs=1e-3)
    assert abs(w @ steering_z(c, m)) == pytest.approx(m)
    assert np.allclose(np.abs(w), 1)


def test_pattern_validation():
    with pytest.raises(ValueError):
        GroupingPattern(np.array([[1, 1], [0, 1]]))
    with pytest.raises(ValueError):
        GroupingPattern(np.array([[1, 0], [1, 0]]))
    with pytest.raises(ValueError):
        GroupingPattern(np.array([[2, 0], [0, 1]]))


def test_uniform_pattern_is_contiguous():
    pat = GroupingPattern.uniform(8, 3)
    assert list(pat.column_groups()) == [0, 0, 0, 1, 1, 1, 2, 2]


@given(st.integers(2, 12), st.integers(1, 4), st.integers(0, 2**31))
def test_random_pattern_is_valid(n_y, g, seed):
    g = min(g, n_y)
    pat = GroupingPattern.random(n_y, g, seed)
    assert (pat.s.sum(axis=1) == 1).all()
    assert (pat.s.sum(axis=0) >= 1).all()


def test_dense_is_kron_sum_in_both_orderings(setup):
    geom, part, pat, beam = setup
    total = sum(np.kron(np.diag(pat.s[:, g]), beam.group_block(g)) for g in range(pat.g))
    assert np.allclose(beam.dense, total)
    # the reversed ordering agrees after commuting rows and columns
    swapped = sum(np.kron(beam.group_block(g), np.diag(pat.s[:, g])) for g in range(pat.g))
    left = _commutation(geom.t, geom.n_y)
    right = _commutation(geom.n_z, geom.n_y)
    assert np.allclose(left @ swapped @ right.T, beam.dense)


def test_pc_hbf_structure(setup):
    geom, _, pat, beam = setup
    dense = beam.dense
    assert not np.any(dense[~beam.support_mask()])
    nz = dense[dense != 0]
    assert np.allclose(np.abs(nz), 1)
    # unassigned column 3 contributes zero rows
    rows = np.arange(geom.n_rf)[beam.row_column == 3]
    assert not np.any(dense[rows])
    assert not beam.active[rows].any()


def test_group_rows(setup):
    geom, _, pat, beam = setup
    rows = beam.group_rows(0)
    assert set(beam.row_column[rows]) == {0, 4, 5}
    assert len(rows) == 3 * geom.t


def test_beam_matrix_shape_errors(setup, prior):
    geom, part, pat, _ = setup
    with pytest.raises(ValueError):
        build_group_beam_matrix(SubIntervalPartition.uniform(prior, 3), pat, geom)
    with pytest.raises(ValueError):
        build_group_beam_matrix(part, pat, UpaGeometry(6, 12, 4))


def test_baselines_are_constant_modulus(small_geom, prior):
    for beam in (wide_beam_matrix(prior, small_geom), random_beam_matrix(small_geom, 2)):
        assert np.allclose(np.abs(beam.dense[beam.support_mask()]), 1)
        assert not beam.is_group_wise


def test_pattern_csv_roundtrip(tmp_path, setup):
    _, _, pat, _ = setup
    write_pattern_csv(pat, tmp_path / "p.csv", {"seed": 3})
    back, header = read_pattern_csv(tmp_path / "p.csv")
    assert np.array_equal(back.s, pat.s)
    assert header["seed"] == "3"


def test_beam_csv_roundtrip(tmp_path, setup):
    geom, _, _, beam = setup
    write_beam_csv(beam, tmp_path / "b.csv")
    assert np.allclose(read_beam_csv(tmp_path / "b.csv", geom), beam.dense)
