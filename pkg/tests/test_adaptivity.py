import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial import legendre as npleg

from hpplast.adaptivity import (
    AdaptConfig,
    Problem,
    count_dofs,
    decay_ratio,
    doerfler_mark,
    drive,
    hp_decide,
    legendre_coefficients,
    prolongate,
)
from hpplast.assembly import Spaces
from hpplast.mesh import build_rectangle_mesh, p_refine, refine
from hpplast.quadrature import lobatto_points, tensor_points
from hpplast.spaces import DisplacementSpace, evaluate_at_points


class TestDoerfler:
    def test_example(self):
        assert doerfler_mark([4, 3, 2, 1], 0.5) == [0, 1]

    def test_theta_one_marks_nonzero(self):
        assert doerfler_mark([1.0, 0.0, 2.0, 0.5], 1.0) == [0, 2, 3]

    def test_single(self):
        assert doerfler_mark([0.3], 0.5) == [0]

    def test_all_zero(self):
        assert doerfler_mark([0.0, 0.0], 0.5) == []

    def test_ties_by_key(self):
        assert doerfler_mark([1.0, 1.0, 1.0], 0.5, keys=[(0, 2, 0), (0, 0, 0), (0, 1, 0)]) == [1, 2]
        assert doerfler_mark([1.0, 1.0, 1.0], 0.3) == [0]

    @pytest.mark.parametrize("bad", [dict(estimates=[-1.0, 1.0], theta=0.5), dict(estimates=[1.0], theta=0.0),
                                     dict(estimates=[1.0], theta=1.5)])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            doerfler_mark(**bad)

    @given(st.lists(st.floats(0, 1e3), min_size=1, max_size=60), st.floats(0.01, 1.0))
    def test_bulk_and_minimality(self, eta, theta):
        eta = np.array(eta)
        marked = doerfler_mark(eta, theta)
        if not np.any(eta > 0):
            assert marked == []
            return
        total = eta.sum()
        assert eta[marked].sum() >= theta * total * (1 - 1e-12)
        # greedy minimality: the bulk fails without the smallest marked entry
        rest = sorted(eta[marked])[1:]
        assert sum(rest) < theta * total * (1 + 1e-12)

    @given(st.permutations(list(range(12))))
    def test_permutation_stable(self, perm):
        eta = np.array([5, 1, 3, 3, 0, 2, 7, 1, 1, 4, 0.5, 3.0])
        keys = [(0, i, 0) for i in range(12)]
        base = {keys[i] for i in doerfler_mark(eta, 0.6, keys)}
        permuted = doerfler_mark(eta[perm], 0.6, [keys[i] for i in perm])
        assert {keys[perm[i]] for i in permuted} == base


class TestDecay:
    def test_legendre_roundtrip(self, rng):
        p = 4
        c = rng.normal(size=(p + 1, p + 1))
        pts = tensor_points(lobatto_points(p))
        vals = npleg.legval2d(pts[:, 1], pts[:, 0], c)  # c[j, i]: y degree j, x degree i
        np.testing.assert_allclose(legendre_coefficients(vals[None], p)[0], c, atol=1e-12)

    def test_low_degree_polynomial_decays(self):
        p = 3
        pts = tensor_points(lobatto_points(p))
        vals = np.vstack([pts[:, 0] ** 2 * pts[:, 1], 1 + pts[:, 1] ** 2])
        assert decay_ratio(vals, p) < 1e-12

    def test_known_ratio(self):
        p = 2
        c = np.zeros((3, 3))
        c[0, 1] = 1.0  # P1(x): block 1
        c[2, 0] = 0.5  # P2(y): block 2
        pts = tensor_points(lobatto_points(p))
        vals = npleg.legval2d(pts[:, 1], pts[:, 0], c)[None]
        # energy weights 2/(2i+1) * 2/(2j+1)
        expected = np.sqrt(0.25 * (2 / 5) * 2 / ((2 / 3) * 2))
        assert decay_ratio(vals, p) == pytest.approx(expected, rel=1e-12)

    def test_p1_uses_bilinear_mode(self):
        pts = tensor_points(lobatto_points(1))
        assert decay_ratio((pts[:, 0] * pts[:, 1])[None], 1) == np.inf
        assert decay_ratio((pts[:, 0] + pts[:, 1])[None], 1) < 1e-12


class TestHpDecide:
    def test_cap(self):
        mesh = build_rectangle_mesh(nx=1, ny=1, p=3)
        V = DisplacementSpace(mesh)
        u = V.interpolate(lambda x, y: ((y + 1), 0 * x))
        assert hp_decide(V, u, 0, p_max=3) == "h"
        assert hp_decide(V, u, 0, p_max=4) == "p"

    def test_rough_field_h(self):
        mesh = build_rectangle_mesh(nx=1, ny=1, p=2)
        V = DisplacementSpace(mesh)
        u = V.interpolate(lambda x, y: ((y + 1) * np.abs(x), 0 * x))
        assert hp_decide(V, u, 0) == "h"


class TestProlongate:
    def test_matches_pointwise_on_nested_meshes(self, graded_mesh, rng):
        coarse = build_rectangle_mesh(nx=2, ny=2, p=2)
        Vc = DisplacementSpace(coarse)
        uc = rng.normal(size=Vc.n_dofs)
        Vf = DisplacementSpace(graded_mesh)
        uf = prolongate(Vc, uc, Vf)
        pts = rng.uniform(-1, 1, size=(300, 2))
        np.testing.assert_allclose(evaluate_at_points(Vf, uf, pts), evaluate_at_points(Vc, uc, pts), atol=1e-12)


def bench_problem(p=1, nx=2):
    from hpplast.bench import load_from_id
    from conftest import BENCH_MATERIAL
    return Problem(build_rectangle_mesh(nx=nx, ny=nx, p=p), BENCH_MATERIAL, load_from_id("benchmark"))


class TestDrive:
    def test_uniform_dof_growth(self):
        recs = drive(bench_problem(), AdaptConfig(mode="h-uniform", max_levels=4))
        dofs = [r.dof for r in recs]
        ratios = np.array(dofs[1:]) / np.array(dofs[:-1])
        assert np.all((ratios > 3.0) & (ratios < 4.5))
        assert dofs[-1] == count_dofs(recs[-1].spaces)

    def test_h_adaptive_keeps_degrees(self):
        recs = drive(bench_problem(p=2), AdaptConfig(mode="h-adaptive", max_levels=5))
        for r in recs:
            assert set(r.mesh.degree.tolist()) == {2}
        assert recs[-1].mesh.n_elements < 4 ** 5

    def test_p_uniform_keeps_mesh(self):
        recs = drive(bench_problem(nx=5), AdaptConfig(mode="p-uniform", max_levels=4))
        for k, r in enumerate(recs):
            assert r.mesh.keys == recs[0].mesh.keys
            assert set(r.mesh.degree.tolist()) == {k + 1}

    def test_hp_adaptive_monotone_estimator(self):
        recs = drive(bench_problem(), AdaptConfig(mode="hp-adaptive", max_levels=10))
        eta = [r.report.totals["eta_sq"] for r in recs]
        assert all(b < a for a, b in zip(eta, eta[1:]))
        decisions = [d for r in recs for d in r.decisions.values()]
        assert "p" in decisions and "h" in decisions
        assert recs[-1].mesh.degree.max() >= 3

    def test_budget_stops(self):
        recs = drive(bench_problem(), AdaptConfig(mode="h-uniform", max_levels=10, dof_budget=1000))
        assert recs[-1].dof <= 1000 and len(recs) < 10

    def test_deterministic(self):
        cfg = AdaptConfig(mode="hp-adaptive", max_levels=6)
        a = drive(bench_problem(), cfg)
        b = drive(bench_problem(), cfg)
        assert [r.report.totals for r in a] == [r.report.totals for r in b]
        assert [r.marked for r in a] == [r.marked for r in b]

    @pytest.mark.parametrize("kw", [dict(theta=0.0), dict(theta=1.1), dict(p_max=0), dict(mode="x"),
                                    dict(max_levels=0)])
    def test_config_validation(self, kw):
        with pytest.raises(ValueError):
            AdaptConfig(**kw)
