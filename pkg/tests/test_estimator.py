import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hpplast.assembly import LoadData, assemble, project_data
from hpplast.bench import load_from_id
from hpplast.estimator import (
    PART_NAMES,
    SolutionFields,
    dev_mismatch,
    estimate,
    eta_T,
    mu_star,
    oscillation,
    plasticity_error_E_T,
    quadrature_points_of,
    total,
)
from hpplast.mesh import build_rectangle_mesh, refine
from hpplast.solver import MixedSolution, recover_lambda, solve_mixed
from hpplast.tensor_core import DEV_WEIGHT, Material, dev_norm

GL_X, GL_W = np.polynomial.legendre.leggauss(12)  # independent oracle rule


def gl_integrate(fn, box):
    x0, x1, y0, y1 = box
    X = x0 + 0.5 * (GL_X + 1) * (x1 - x0)
    Y = y0 + 0.5 * (GL_X + 1) * (y1 - y0)
    XX, YY = np.meshgrid(X, Y)
    W = np.outer(GL_W, GL_W) * 0.25 * (x1 - x0) * (y1 - y0)
    return float(np.sum(W * fn(XX, YY)))


def manual_solution(S, u, p=None):
    N = S.Q.N
    p = np.zeros((N, 2)) if p is None else p
    lam = recover_lambda(S, u, p)
    return MixedSolution(u, p, lam)


class TestMuStar:
    def test_zero(self):
        assert not np.any(mu_star(np.zeros((3, 2)), np.zeros((3, 2)), 5.0))

    def test_clipping_half(self):
        lam = np.array([[10.0 / math.sqrt(2.0), 0.0]])
        out = mu_star(lam, np.zeros((1, 2)), 5.0)
        np.testing.assert_allclose(out, 0.5 * lam, rtol=1e-15)

    def test_inside_unchanged(self):
        lam = np.array([[1.0, -2.0]])
        p = np.array([[0.4, 0.2]])
        np.testing.assert_array_equal(mu_star(lam, p, 5.0), lam + 0.5 * p)

    @given(st.lists(st.tuples(st.floats(-1e4, 1e4), st.floats(-1e4, 1e4)), min_size=1, max_size=20),
           st.floats(0.01, 100))
    def test_feasible_exactly(self, vals, sigma):
        lam = np.array(vals)
        out = mu_star(lam, -0.3 * lam, sigma)
        assert np.all(dev_norm(out) <= sigma)


class TestPlasticityError:
    def test_zero_for_discrete_multiplier_p1(self, material, bench_load):
        mesh = refine(build_rectangle_mesh(nx=2, ny=2, p=1), range(4))
        S = assemble(mesh, material, load=bench_load)
        sol = solve_mixed(S)
        assert sol.plastic.any()
        fields = SolutionFields(S, sol)
        scale = material.sigma_y * np.abs(sol.p).max() * mesh.areas.max()
        for e in range(mesh.n_elements):
            val = plasticity_error_E_T(fields, e, mu=lambda E, R: fields.multiplier(E, R))
            assert abs(val) <= 1e-10 * scale

    def test_elastic_zero(self, material):
        mesh = build_rectangle_mesh(nx=2, ny=2, p=2)
        S = assemble(mesh, material, load=load_from_id("benchmark", 1e-3))
        fields = SolutionFields(S, solve_mixed(S))
        assert all(plasticity_error_E_T(fields, e) == 0.0 for e in range(mesh.n_elements))

    def test_nonnegative(self, bench_graded):
        S, sol = bench_graded
        rep = estimate(S, sol, load_from_id("benchmark"))
        scale = rep.totals["eta_sq"]
        assert np.all(rep.parts["E_T"] >= -1e-14 * scale)

    def test_minimal_against_random(self, bench_graded, rng):
        S, sol = bench_graded
        fields = SolutionFields(S, sol)
        sy = S.material.sigma_y
        for e in np.unique(S.Q.elem_of[sol.plastic])[:3].tolist() + [0]:
            R, _ = quadrature_points_of(S.mesh, e)
            best = plasticity_error_E_T(fields, e)
            for _ in range(50):
                mu = rng.normal(size=(len(R), 2))
                mu *= (sy * rng.uniform(0, 1, len(R)) / dev_norm(mu))[:, None]
                assert best <= plasticity_error_E_T(fields, e, mu=mu) + 1e-12

    def test_infeasible_mu_rejected(self, bench_graded):
        S, sol = bench_graded
        fields = SolutionFields(S, sol)
        R, _ = quadrature_points_of(S.mesh, 0)
        with pytest.raises(ValueError):
            plasticity_error_E_T(fields, 0, mu=np.full((len(R), 2), 10.0))


class TestResidualTerms:
    def test_patch_all_zero(self):
        mat = Material(1000.0, 1000.0, 500.0, 1e9)
        alpha, beta = 1e-3, -2e-3
        lam, mu = mat.lame_lambda, mat.lame_mu
        sxx, syy, sxy = lam * beta, (lam + 2 * mu) * beta, mu * alpha

        def g(x, y):
            top, right = y >= 1 - 1e-12, x >= 1 - 1e-12
            return (np.where(top, sxy, np.where(right, sxx, -sxx)),
                    np.where(top, syy, np.where(right, sxy, -sxy)))

        mesh = refine(build_rectangle_mesh(nx=2, ny=2, p=1), [0])
        load = LoadData(g=g)
        S = assemble(mesh, mat, load=load)
        rep = estimate(S, solve_mixed(S), load)
        for name in PART_NAMES:
            assert np.abs(rep.parts[name]).max() <= 1e-20, name

    def test_manufactured_volume_residual(self, material):
        lam, mu = material.lame_lambda, material.lame_mu
        mesh = build_rectangle_mesh(nx=1, ny=1, p=2)
        S = assemble(mesh, material)
        u = S.V.interpolate(lambda x, y: ((y + 1) * x * x, (y + 1) ** 2))
        fields = SolutionFields(S, manual_solution(S, u))
        res = estimate(S, fields.sol, LoadData()).parts["elem_residual_sq"][0]

        def div_sq(x, y):
            dx = (2 * lam + 4 * mu) * (y + 1)
            dy = 2 * mu * x + lam * (2 * x + 2) + 4 * mu
            return dx * dx + dy * dy

        expected = (2 * math.sqrt(2) / 2) ** 2 * gl_integrate(div_sq, (-1, 1, -1, 1))
        assert res == pytest.approx(expected, rel=1e-12)

    def test_no_jump_for_smooth_discrete_field(self, graded_mesh, material):
        S = assemble(graded_mesh, material)
        u = S.V.interpolate(lambda x, y: ((y + 1) * (x * x - y), (y + 1) * (0.5 + x * y)))
        rep = estimate(S, manual_solution(S, u), LoadData())
        vol = rep.parts["elem_residual_sq"].sum()
        assert rep.parts["jump_sq"].max() <= 1e-20 * vol

    def test_jump_split_between_neighbours(self, material, rng):
        mesh = build_rectangle_mesh(nx=2, ny=1, p=1)
        S = assemble(mesh, material)
        u = rng.normal(size=S.V.n_dofs)
        jump = estimate(S, manual_solution(S, u), LoadData()).parts["jump_sq"]
        assert jump[0] == pytest.approx(jump[1], rel=1e-14)
        assert jump[0] > 0


class TestDevMismatch:
    def test_constant_strain_zero(self, material):
        mesh = build_rectangle_mesh(nx=1, ny=1, p=1)
        S = assemble(mesh, material)
        u = S.V.interpolate(lambda x, y: (0.1 * (y + 1), -0.2 * (y + 1)))
        assert dev_mismatch(SolutionFields(S, manual_solution(S, u)))[0] == pytest.approx(0.0, abs=1e-20)

    def test_linear_stress_best_approximation(self, material):
        c = 1e-3
        mu = material.lame_mu
        mesh = build_rectangle_mesh(nx=1, ny=1, p=1)
        S = assemble(mesh, material)
        u = S.V.interpolate(lambda x, y: (c * (y + 1) * x, 0.0 * x))
        got = dev_mismatch(SolutionFields(S, manual_solution(S, u)))[0]
        assert got == pytest.approx(16 * mu * mu * c * c / 3, rel=1e-12)

    def test_reproduced_when_in_Qhp(self, material):
        mesh = build_rectangle_mesh(nx=2, ny=2, p=3)
        S = assemble(mesh, material)
        u = S.V.interpolate(lambda x, y: ((y + 1) * x, (y + 1) * y))
        assert dev_mismatch(SolutionFields(S, manual_solution(S, u))).max() <= 1e-20


class TestOscillation:
    def test_zero_for_projected_data(self):
        mesh = build_rectangle_mesh(nx=2, ny=2, p=2)
        S = assemble(mesh, Material(1000, 1000, 500, 5))
        load = LoadData(f=lambda x, y: (x + 0 * y, 2 * y), g=lambda x, y: (x, 1 + 0 * x))
        assert oscillation(S, load).max() <= 1e-26

    def test_benchmark_volume_part_zero(self, bench_load):
        mesh = build_rectangle_mesh(nx=4, ny=4, p=1)
        S = assemble(mesh, Material(1000, 1000, 500, 5))
        osc = oscillation(S, bench_load)
        top = mesh.bounds[:, 3] == 1.0
        assert not np.any(osc[~top])
        assert np.all(osc[top & (np.abs(mesh.centers[:, 0]) < 0.5)] > 0)

    def test_decreases_under_h_refinement(self, bench_load):
        mat = Material(1000, 1000, 500, 5)
        mesh = build_rectangle_mesh(nx=2, ny=2, p=1)
        vals = []
        for _ in range(5):
            vals.append(oscillation(assemble(mesh, mat), bench_load).sum())
            mesh = refine(mesh, range(mesh.n_elements))
        assert all(b < a for a, b in zip(vals, vals[1:]))


class TestTotals:
    def test_single_element(self, material, bench_load):
        mesh = build_rectangle_mesh(nx=1, ny=1, p=2)
        S = assemble(mesh, material, load=bench_load)
        rep = estimate(S, solve_mixed(S), bench_load)
        assert rep.totals["eta_sq"] == pytest.approx(rep.local(0).eta_sq, rel=1e-15)

    def test_permutation_invariant(self, bench_graded, bench_load, rng):
        S, sol = bench_graded
        rep = estimate(S, sol, bench_load)
        perm = rng.permutation(rep.n_elements)
        shuffled = total({k: v[perm] for k, v in rep.parts.items()}, [rep.keys[i] for i in perm])
        for k, v in rep.totals.items():
            assert shuffled.totals[k] == pytest.approx(v, rel=1e-15, abs=0)
        assert [shuffled.keys[i] for i in shuffled.ranking] == [rep.keys[i] for i in rep.ranking]

    def test_reconcile_with_raw_fields(self, bench_graded, bench_load):
        S, sol = bench_graded
        rep = estimate(S, sol, bench_load)
        fields = SolutionFields(S, sol)
        np.testing.assert_allclose(dev_mismatch(fields), rep.parts["dev_mismatch_sq"], rtol=1e-13)
        E = [plasticity_error_E_T(fields, e) for e in range(rep.n_elements)]
        assert math.fsum(E) == pytest.approx(rep.totals["E_T"], rel=1e-12, abs=1e-18)
        proj = project_data(S.mesh, bench_load, S.Q)
        loc = eta_T(fields, 3, bench_load, proj)
        assert loc.eta_sq == pytest.approx(rep.eta_sq[3], rel=1e-14)

    def test_ranking_descending(self, bench_graded, bench_load):
        S, sol = bench_graded
        rep = estimate(S, sol, bench_load)
        assert np.all(np.diff(rep.eta_sq[rep.ranking]) <= 0)

    def test_dump_format(self, bench_graded, bench_load):
        S, sol = bench_graded
        rep = estimate(S, sol, bench_load)
        lines = rep.dump().splitlines()
        assert len(lines) == rep.n_elements
        assert all(len(line.split()) == 5 for line in lines)

    def test_pointwise_multiplier_flag(self, bench_graded, bench_load):
        S, sol = bench_graded
        rep = estimate(S, sol, bench_load, lambda_choice="pointwise")
        assert rep.meta["lambda_choice"] == "pointwise"
        assert np.all(rep.parts["dev_mismatch_sq"] == 0.0)
        with pytest.raises(ValueError):
            estimate(S, sol, bench_load, lambda_choice="other")
