import numpy as np
import pytest

from conftest import difference_matrix, unit_box
from conerisk import geometry as G
from conerisk import projections as P
from conerisk import sets as S
from conerisk.exceptions import InvalidInputError
from conerisk.statdim import mc_statdim


class TestTangentCone:
    # [0, 1]^2: rows u1 <= 1, u2 <= 1, -u1 <= 0, -u2 <= 0
    box = S.Polyhedron(np.vstack([np.eye(2), -np.eye(2)]), [1.0, 1.0, 0.0, 0.0])

    def test_edge(self):
        tc = G.tangent_cone(self.box, [0.0, 0.5])
        assert tc.active_indices == (2,)
        np.testing.assert_array_equal(tc.A_active, [[-1.0, 0.0]])

    def test_vertex(self):
        tc = G.tangent_cone(self.box, [0.0, 0.0])
        assert tc.active_indices == (2, 3)
        cone = tc.cone()
        np.testing.assert_allclose(cone.project([-1.0, 2.0]).point, [0.0, 2.0])

    def test_interior(self):
        tc = G.tangent_cone(self.box, [0.5, 0.5])
        assert tc.active_indices == ()
        np.testing.assert_allclose(tc.cone().project([3.0, -4.0]).point, [3.0, -4.0])

    def test_infeasible(self):
        with pytest.raises(InvalidInputError):
            G.tangent_cone(self.box, [2.0, 0.0])

    def test_monotone(self):
        tc = G.tangent_cone(S.MonotoneCone(4), [0.0, 0.0, 1.0, 1.0])
        assert tc.active_indices == (0, 2)

    def test_ball(self):
        tc = G.tangent_cone(S.Ball(3), [1.0, 0.0, 0.0])
        np.testing.assert_allclose(tc.A_active, [[1.0, 0.0, 0.0]])
        assert G.tangent_cone(S.Ball(3), [0.1, 0.0, 0.0]).active_indices == ()

    def test_block_monotone_keeps_equalities(self):
        tc = G.tangent_cone(S.BlockMonotoneCone((2, 1)), [1.0, 1.0, 1.0])
        u = tc.cone().project([3.0, 0.0, 0.0]).point
        assert u[0] == pytest.approx(u[1])


def _sample_face(face, rng, count=200):
    return face.cone().project_many(rng.standard_normal((count, face.A.shape[1])) * 2)


class TestResidualFace:
    def test_orthant_edge(self, rng):
        face = G.residual_face(-np.eye(2), [1.0, -1.0])
        np.testing.assert_allclose(face.normal, [0.0, -1.0])
        assert face.equality_indices == (1,)
        assert face.inequality_indices == (0,)
        for u in _sample_face(face, rng):
            assert abs(u[1]) < 1e-12 and u[0] >= -1e-12

    def test_interior(self):
        face = G.residual_face(-np.eye(2), [1.0, 2.0])
        assert face.equality_indices == ()
        np.testing.assert_array_equal(face.normal, [0.0, 0.0])

    def test_orthant_vertex(self, rng):
        face = G.residual_face(-np.eye(2), [-1.0, -1.0])
        np.testing.assert_allclose(face.normal, [-1.0, -1.0])
        assert face.equality_indices == (0, 1)
        assert np.abs(_sample_face(face, rng)).max() < 1e-12

    def test_string(self):
        assert str(G.residual_face(-np.eye(2), [1.0, -1.0])) == \
            "equalities={2} inequalities={1}"

    def test_degenerate_polar_point(self, rng):
        # y lies in the polar cone and is spanned by several subsets of rows
        A = np.array([[0.0, 1.0], [1.0, 1.0], [-1.0, 1.0]])
        face = G.residual_face(A, [0.0, 5.0])
        np.testing.assert_allclose(face.normal, [0.0, 5.0])
        assert G.face_is_minimal(face)
        assert np.abs(_sample_face(face, rng)).max() < 1e-12

    def test_random_faces(self, rng):
        for _ in range(200):
            m = int(rng.integers(2, 6))
            A = rng.standard_normal((m, 4))
            y = rng.standard_normal(4) * 2
            face = G.residual_face(A, y)
            assert G.face_is_minimal(face)
            v = face.normal
            for u in _sample_face(face, rng, 5):
                assert np.all(A @ u <= 1e-8)
                assert abs(v @ u) <= 1e-8
            J = list(face.equality_indices)
            for _k in range(3):
                u = P.project_cone_with_equality(A, v, rng.standard_normal(4)).point
                if J:
                    assert np.abs(A[J] @ u).max() <= 1e-8


class TestGenerators:
    def test_small(self):
        np.testing.assert_array_equal(G.monotone_generators(2).generators,
                                      [[-1, -1], [1, 1], [0, 1]])
        np.testing.assert_array_equal(G.monotone_generators(1).generators, [[-1], [1]])

    def test_generators_in_cone(self):
        cone = S.MonotoneCone(5)
        for g in G.monotone_generators(5).generators:
            assert cone.contains(g)

    def test_generated_cone_is_monotone(self, rng):
        gens = G.monotone_generators(5)
        for _ in range(50):
            x = rng.standard_normal(5)
            np.testing.assert_allclose(gens.project(x), P.project_monotone(x).point, atol=1e-10)

    def test_filter_alternating(self, rng):
        theta = np.array([1, -1, 1, -1, 1, -1], float)
        v = theta - P.project_monotone(theta).point
        kept = G.generators_in_hyperplane(G.monotone_generators(6), v)
        expected = [[-1] * 6, [1] * 6, [0, 0, 1, 1, 1, 1], [0, 0, 0, 0, 1, 1]]
        np.testing.assert_array_equal(kept.generators, expected)
        # generated cone equals the face cone, sampled both ways
        face = S.FaceCone(difference_matrix(6), v.reshape(1, -1))
        for _ in range(50):
            x = rng.standard_normal(6)
            np.testing.assert_allclose(kept.project(x), face.project(x).point, atol=1e-9)

    def test_zero_normal(self):
        gens = G.monotone_generators(3)
        kept = G.generators_in_hyperplane(gens, np.zeros(3))
        np.testing.assert_array_equal(kept.generators, gens.generators)

    def test_all_removed(self):
        kept = G.generators_in_hyperplane(G.GeneratorSet(np.array([[1.0, 0.0]])),
                                          np.array([-1.0, 0.0]))
        assert len(kept) == 0
        np.testing.assert_array_equal(kept.project([3.0, 4.0]), [0.0, 0.0])

    def test_precondition(self):
        with pytest.raises(InvalidInputError):
            G.generators_in_hyperplane(G.GeneratorSet(np.array([[1.0, 0.0]])),
                                       np.array([1.0, 0.0]))

    def test_zero_generator(self):
        with pytest.raises(InvalidInputError):
            G.GeneratorSet(np.zeros((1, 2)))


class TestEmbedding:
    def test_unit_sizes(self):
        cone = G.block_monotone_embedding((1, 1, 1))
        np.testing.assert_allclose(cone.A, difference_matrix(3))

    def test_rows(self):
        n = 10
        A = G.block_monotone_embedding((1, n - 2, 1)).A
        np.testing.assert_allclose(A, [[1, -1 / np.sqrt(n - 2), 0],
                                       [0, 1 / np.sqrt(n - 2), -1]])
        A = G.block_monotone_embedding((n - 2, 1, 1)).A
        np.testing.assert_allclose(A, [[1 / np.sqrt(n - 2), -1, 0], [0, 1, -1]])

    def test_single_block_is_line(self):
        cone = G.block_monotone_embedding((4,))
        np.testing.assert_array_equal(cone.project([2.5]).point, [2.5])

    def test_isometry_pointwise(self, rng):
        sizes = (2, 3, 1)
        direct = S.BlockMonotoneCone(sizes)
        embed = G.block_monotone_embedding(sizes)
        starts = np.cumsum((0,) + sizes[:-1])
        for _ in range(50):
            x = rng.standard_normal(6)
            # coordinates of x in the orthonormal block-indicator basis
            w = np.array([x[s:s + k].sum() / np.sqrt(k) for s, k in zip(starts, sizes)])
            a = direct.project(x).point
            b = embed.project(w).point
            assert float(a @ a) == pytest.approx(float(b @ b), abs=1e-10)

    def test_isometry_statdim(self):
        a = mc_statdim(S.BlockMonotoneCone((2, 3, 1)), samples=20_000, seed=3)
        b = mc_statdim(G.block_monotone_embedding((2, 3, 1)), samples=20_000, seed=4)
        assert abs(a.value - b.value) <= 3 * np.hypot(a.std_error, b.std_error)


class TestCoreCone:
    def test_cones(self):
        assert G.core_cone(S.Orthant(3)) == S.Orthant(3)
        assert G.core_cone(S.MonotoneCone(4)) == S.MonotoneCone(4)

    def test_bounded(self):
        assert G.core_cone(S.Ball(3)) == S.ZeroCone(3)
        assert G.core_cone(S.Polyhedron(*unit_box())) == S.ZeroCone(2)

    def test_unbounded_polyhedron(self):
        strip = S.Polyhedron(np.array([[0.0, 1.0], [0.0, -1.0]]), [1.0, 1.0])
        core = G.core_cone(strip)
        np.testing.assert_allclose(core.project([2.0, 3.0]).point, [2.0, 0.0])

    def test_epigraph(self):
        core = G.core_cone(S.ParabolaEpigraph())
        np.testing.assert_allclose(core.project([3.0, 2.0]).point, [0.0, 2.0])
        np.testing.assert_allclose(core.project([3.0, -2.0]).point, [0.0, 0.0])

    def test_recession_trivial(self):
        A, _ = unit_box(3)
        assert G.recession_cone_is_trivial(A)
        assert not G.recession_cone_is_trivial(A[:5])
