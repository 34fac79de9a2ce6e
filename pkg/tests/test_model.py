import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from brsup.model import (
    Anchor, Grid, ModelError, Variogram, anchored_covariance, build_model, eval_variogram,
    pivoted_factor, square_grid, square_model,
)


@pytest.mark.parametrize("s, a, h, want", [
    (5.0, 1.5, (0.0, 0.0), 0.0),
    (5.0, 1.5, (5.0, 0.0), 1.0),
    (1.0, 1.5, (3.0, 4.0), 5.0 ** 1.5),
])
def test_eval_variogram_examples(s, a, h, want):
    assert eval_variogram(Variogram(s, a), h) == pytest.approx(want, rel=1e-12, abs=0)


def test_variogram_symmetric_and_rejects_bad_params():
    v = Variogram(2.0, 0.7)
    assert v((1.0, -3.0)) == pytest.approx(v((-1.0, 3.0)))
    with pytest.raises(ValueError):
        Variogram(0.0, 1.0)
    with pytest.raises(ValueError):
        Variogram(1.0, 2.5)


def test_grid_validation_and_order():
    with pytest.raises(ValueError):
        Grid(np.array([[0.0, 0.0], [0.0, 0.0]]))
    g = Grid.regular([(0, 1, 0.5), (0, 1, 1.0)])
    assert g.n == 6
    np.testing.assert_allclose(g.points[:3], [[0, 0], [0, 1], [0.5, 0]])


def test_single_point_anchored_at_itself():
    m = build_model(Grid(np.array([[0.3, 0.3]])), Variogram(), Anchor.point((0.3, 0.3)))
    np.testing.assert_array_equal(m.cov, [[0.0]])
    np.testing.assert_array_equal(m.sigma, [0.0])
    assert m.degenerate_index == 0
    assert m.rank == 0


def test_line_two_points(line2):
    np.testing.assert_allclose(line2.cov, [[0, 0], [0, 2]], atol=1e-15)
    np.testing.assert_allclose(line2.sigma, [0, 2])
    assert line2.degenerate_index == 0


def test_square_grid_size_and_variance_reduction():
    m = square_model()
    assert m.n == 676
    best_corner = min(
        build_model(square_grid(), m.variogram, Anchor.point(c)).sigma.max()
        for c in m.grid.bounding_corners()
    )
    assert m.sigma.max() < best_corner
    assert m.sigma.max() == pytest.approx(0.92, abs=0.01)


def test_corner_average_is_rank_deficient_by_one():
    m = square_model(step=1.0)
    assert m.rank == m.n - 1
    assert m.degenerate_index is None


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(2, 7),
    alpha=st.floats(0.2, 2.0),
    seed=st.integers(0, 2**32 - 1),
    corners=st.booleans(),
)
def test_structural_properties(n, alpha, seed, corners):
    r = np.random.default_rng(seed)
    pts = r.uniform(0, 3, size=(n, 2))
    anchor = Anchor.corners() if corners else Anchor.point(r.uniform(0, 3, 2))
    m = build_model(Grid(pts), Variogram(1.3, alpha), anchor)
    C = m.cov
    np.testing.assert_array_equal(C, C.T)
    assert np.linalg.eigvalsh(C).min() >= -1e-8 * np.linalg.norm(C)
    np.testing.assert_allclose(m.sigma, np.diag(C))
    g = m.gamma
    # C_ii + C_jj - 2 C_ij = 2 gamma(t_i - t_j)
    incr = m.sigma[:, None] + m.sigma[None, :] - 2 * C
    np.testing.assert_allclose(incr, 2 * g, atol=1e-10 * max(1.0, g.max()))
    rec = m.factor @ m.factor.T
    assert np.linalg.norm(rec - C) <= 1e-10 * max(np.linalg.norm(C), 1e-300)


def test_point_anchor_formula():
    pts = np.array([[0.0, 0.0], [1.0, 2.0], [3.0, 1.0]])
    v = Variogram(2.0, 1.2)
    star = np.array([0.5, 0.5])
    C = anchored_covariance(Grid(pts), v, Anchor.point(star))
    for i in range(3):
        for j in range(3):
            want = v(pts[i] - star) + v(pts[j] - star) - v(pts[i] - pts[j])
            assert C[i, j] == pytest.approx(want, abs=1e-12)


def test_factor_rejects_indefinite_matrix():
    with pytest.raises(ModelError, match="smallest pivot"):
        pivoted_factor(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_quad_form_matches_pseudo_inverse(square_small, rng):
    m = square_small
    w = rng.standard_normal((4, m.rank)) @ m.factor.T - 0.5 * m.sigma
    u = w + 0.5 * m.sigma
    want = np.einsum("ij,jk,ik->i", u, np.linalg.pinv(m.cov, rcond=1e-10), u)
    np.testing.assert_allclose(m.quad_form(w), want, rtol=1e-7)
