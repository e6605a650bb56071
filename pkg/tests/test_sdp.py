import numpy as np
import pytest

from conftest import instance_path, rotation_basis
from qmbounds import cip, quantum, sdp
from qmbounds.cli import load_instance
from qmbounds.quantum import FeasibleSetSpec


def feasible_spec(seed, n):
    ss = np.random.SeedSequence(seed)
    s1, s2 = ss.spawn(2)
    basis = quantum.random_basis(s1, n)
    rho = quantum.random_density(s2, n, n)
    return FeasibleSetSpec(basis, quantum.born_probabilities(rho, basis))


class TestSolveBasics:
    def test_identity_objective_gives_one(self, comp2):
        spec = FeasibleSetSpec(comp2, [0.3, 0.7])
        res = sdp.max_expectation(spec, np.eye(2))
        assert res.value == pytest.approx(1.0, abs=1e-7)

    def test_diagonal_projector_gives_entry(self, comp2):
        spec = FeasibleSetSpec(comp2, [0.3, 0.7])
        res = sdp.max_expectation(spec, comp2.projector(0))
        assert res.value == pytest.approx(0.3, abs=1e-7)

    def test_zero_objective(self, comp2):
        spec = FeasibleSetSpec(comp2, [0.3, 0.7])
        res = sdp.max_expectation(spec, np.zeros((2, 2)))
        assert res.value == pytest.approx(0.0, abs=1e-8)

    def test_qubit_aligned_case_saturates(self, comp2):
        # lam = 1/4 at a 60-degree post test reaches certainty:
        # (sqrt(3/4) sin + sqrt(1/4) cos)^2 at pi/3 evaluates to 1
        spec = FeasibleSetSpec(comp2, [0.25, 0.75])
        post = rotation_basis(np.pi / 3)
        res = sdp.max_expectation(spec, post.projector(0))
        assert res.value == pytest.approx(1.0, abs=1e-7)

    def test_gamma_full_cardinality_is_one(self, comp2):
        spec = FeasibleSetSpec(comp2, [0.3, 0.7])
        res = sdp.min_max_gamma(spec, rotation_basis(0.7), 2)
        assert res.value == pytest.approx(1.0, abs=1e-7)

    def test_deterministic(self):
        spec = feasible_spec(7, 3)
        post = quantum.random_basis(8, 3)
        a = sdp.min_max_gamma(spec, post, 1)
        b = sdp.min_max_gamma(spec, post, 1)
        assert a.value == b.value
        np.testing.assert_array_equal(a.state, b.state)


class TestPublishedInstance:
    def test_best_singleton_expectation(self):
        inst = load_instance(instance_path("n4_nonmonotone"))
        spec = FeasibleSetSpec(inst.pre, inst.p)
        res = sdp.max_expectation(spec, inst.posts[0].projector(0))
        assert res.value == pytest.approx(0.9047, abs=5e-3)


class TestOptimizerFeasibility:
    @pytest.mark.parametrize("seed,n", [(11, 2), (12, 3), (13, 4)])
    def test_state_is_feasible(self, seed, n):
        spec = feasible_spec(seed, n)
        post = quantum.random_basis(seed + 100, n)
        for res in (sdp.max_expectation(spec, post.projector(0)),
                    sdp.min_max_gamma(spec, post, 1)):
            q = quantum.born_probabilities(res.state, spec.basis)
            np.testing.assert_allclose(q, spec.target, atol=1e-8)
            assert np.linalg.eigvalsh(res.state).min() >= -1e-8


class TestMonotonicity:
    @pytest.mark.parametrize("seed,n", [(20, 3), (21, 4), (22, 4)])
    def test_sandwich_in_cardinality(self, seed, n):
        spec = feasible_spec(seed, n)
        post = quantum.random_basis(seed + 50, n)
        s_vals, r_vals = [], []
        for k in range(1, n):
            _, ops = sdp.subset_effects(spec, post, k)
            s_vals.append(max(sdp.max_expectation(spec, op).value for op in ops))
            r_vals.append(sdp.min_max_gamma(spec, post, k).value)
        tol = 1e-7
        assert all(s_vals[i] <= s_vals[i + 1] + tol for i in range(len(s_vals) - 1))
        assert all(r_vals[i] <= r_vals[i + 1] + tol for i in range(len(r_vals) - 1))
        assert all(r <= s + tol for r, s in zip(r_vals, s_vals))


class TestWeakDuality:
    def test_dual_below_primal_on_feasible_iterations(self):
        spec = feasible_spec(33, 3)
        res = sdp.min_max_gamma(spec, quantum.random_basis(34, 3), 1)
        log = res.solution.iteration_log
        assert len(log) > 3
        for entry in log:
            if entry["primal_feas"] <= 1e-8 and entry["dual_feas"] <= 1e-8:
                assert entry["dual_obj"] <= entry["primal_obj"] + 1e-6


class TestClosedFormAgreement:
    def test_hundred_random_qubit_instances(self, comp2):
        rng = np.random.default_rng(99)
        for _ in range(100):
            lam = float(rng.uniform(0.02, 0.48))
            theta = float(rng.uniform(0.01, np.pi / 2 - 0.01))
            spec = FeasibleSetSpec(comp2, [lam, 1 - lam])
            post = rotation_basis(theta)
            r1c, s1c = cip.qubit_closed_form(lam, theta)
            s1 = max(sdp.max_expectation(spec, post.projector(0)).value,
                     sdp.max_expectation(spec, post.projector(1)).value)
            r1 = sdp.min_max_gamma(spec, post, 1).value
            assert s1 == pytest.approx(s1c, abs=1e-6)
            assert r1 == pytest.approx(r1c, abs=1e-6)


class TestSubsetHandling:
    def test_enumeration_order_does_not_matter(self):
        spec = feasible_spec(55, 4)
        post = quantum.random_basis(56, 4)
        base = sdp.min_max_gamma(spec, post, 2)
        rng = np.random.default_rng(0)
        for _ in range(3):
            order = list(rng.permutation(len(base.subsets)))
            shuffled = sdp.min_max_gamma(spec, post, 2, _subset_order=order)
            assert shuffled.value == pytest.approx(base.value, abs=1e-9)

    def test_lexicographic_subset_listing(self):
        spec = feasible_spec(57, 3)
        subsets, _ = sdp.subset_effects(spec, quantum.random_basis(58, 3), 2)
        assert subsets == [(0, 1), (0, 2), (1, 2)]

    def test_dimension_cap(self):
        n = 11
        basis = quantum.random_basis(60, n)
        spec = FeasibleSetSpec(basis, np.full(n, 1 / n))
        with pytest.raises(sdp.SubsetCapError):
            sdp.min_max_gamma(spec, quantum.random_basis(61, n), 2)

    def test_cardinality_range_checked(self, comp2):
        spec = FeasibleSetSpec(comp2, [0.5, 0.5])
        with pytest.raises(ValueError):
            sdp.min_max_gamma(spec, comp2, 3)


class TestStatusesAndCertificates:
    def test_infeasible_problem_detected(self):
        # a diagonal entry of a PSD matrix cannot be negative
        e11 = np.zeros((2, 2))
        e11[0, 0] = 1.0
        problem = sdp.SdpProblem(
            psd_dims=(2,), nonneg_dim=0,
            obj_psd=(np.zeros((2, 2)),), obj_lin=np.zeros(0),
            con_psd=((e11,),), con_lin=np.zeros((1, 0)), rhs=np.array([-1.0]),
            sense="min")
        sol = sdp.solve(problem)
        assert sol.status == "infeasible"
        assert sol.certificate is not None

    def test_max_iter_status(self, comp2):
        spec = FeasibleSetSpec(comp2, [0.3, 0.7])
        res = sdp.max_expectation(spec, comp2.projector(0), max_iter=3)
        assert res.solution.status == "max_iter"

    def test_certified_bound_sides(self):
        spec = feasible_spec(71, 3)
        post = quantum.random_basis(72, 3)
        g = sdp.min_max_gamma(spec, post, 1)
        sol = g.solution
        assert sol.certified_bound() <= sol.objective_value + 1e-15
        e = sdp.max_expectation(spec, post.projector(0))
        assert e.solution.certified_bound() >= e.solution.objective_value - 1e-15

    def test_point_mass_shortcut_needs_no_solve(self, comp3):
        spec = FeasibleSetSpec(comp3, [1.0, 0.0, 0.0])
        res = sdp.max_expectation(spec, quantum.random_basis(73, 3).projector(0))
        assert res.solution is None
        assert 0.0 <= res.value <= 1.0


class TestProblemValidation:
    def test_rejects_asymmetric_block(self):
        bad = np.array([[0.0, 1.0], [0.0, 0.0]])
        with pytest.raises(ValueError):
            sdp.SdpProblem(psd_dims=(2,), nonneg_dim=0, obj_psd=(bad,),
                           obj_lin=np.zeros(0), con_psd=((np.eye(2),),),
                           con_lin=np.zeros((1, 0)), rhs=np.array([1.0]))

    def test_rejects_bad_sense(self):
        with pytest.raises(ValueError):
            sdp.SdpProblem(psd_dims=(1,), nonneg_dim=0, obj_psd=(np.eye(1),),
                           obj_lin=np.zeros(0), con_psd=((np.eye(1),),),
                           con_lin=np.zeros((1, 0)), rhs=np.array([1.0]), sense="solve")

    def test_json_dump_shape(self, comp2):
        spec = FeasibleSetSpec(comp2, [0.4, 0.6])
        subsets, ops = sdp.subset_effects(spec, rotation_basis(0.3), 1)
        problem = sdp.SdpProblem(
            psd_dims=(2,), nonneg_dim=0,
            obj_psd=(ops[0].real,), obj_lin=np.zeros(0),
            con_psd=((np.diag([1.0, 0.0]),), (np.diag([0.0, 1.0]),)),
            con_lin=np.zeros((2, 0)), rhs=np.array([0.4, 0.6]), sense="max")
        dump = sdp.problem_to_json_dict(problem)
        assert dump["sense"] == "max"
        assert len(dump["constraints"]) == 2
        assert np.asarray(dump["objective"]["psd_blocks"][0]).shape == (2, 2)
