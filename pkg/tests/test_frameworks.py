import numpy as np
import pytest

from conftest import random_consistent_family, shared_event_families
from qhist import events, linalg
from qhist.errors import BudgetExceeded, InconsistentFamily, NoncommutingSlots
from qhist.events import spin_decomposition, trivial_decomposition
from qhist.frameworks import (
    IncompatibilityGraph,
    are_compatible,
    common_refinement,
    enumerate_frameworks,
    history_contained_in,
    single_framework_check,
    universal_truth_functional_exists,
)
from qhist.histories import Dynamics, decoherence_matrix, family_on_grid
from qhist.linalg import DensityOperator, max_abs
from qhist.models import build_single_spin

Z_PLUS = DensityOperator.from_state([1, 0])
Z_DEC = spin_decomposition((0, 0, 1), "z")
X_DEC = spin_decomposition((1, 0, 0), "x")


def single_time(dec, initial=Z_PLUS):
    return family_on_grid(Dynamics.trivial(dec.dim, 1), [dec], initial)


def shared_dynamics_pair(dec_a, dec_b, initial=Z_PLUS):
    dyn = Dynamics.trivial(dec_a.dim, 1)
    return (
        family_on_grid(dyn, [dec_a], initial),
        family_on_grid(dyn, [dec_b], initial),
    )


class TestAreCompatible:
    def test_family_with_itself(self):
        f = single_time(Z_DEC)
        verdict = are_compatible(f, f)
        assert verdict.compatible
        assert verdict.reason == "commuting-and-consistent"

    def test_z_vs_x_noncommuting(self):
        f1, f2 = shared_dynamics_pair(Z_DEC, X_DEC)
        verdict = are_compatible(f1, f2)
        assert not verdict.compatible
        assert verdict.reason == "noncommuting"
        assert verdict.witness == pytest.approx(0.5, abs=1e-12)
        assert verdict.time_index == 0

    def test_z_vs_trivial_compatible(self):
        f1, f2 = shared_dynamics_pair(Z_DEC, trivial_decomposition(2))
        assert are_compatible(f1, f2).compatible

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            dim = int(rng.integers(2, 5))
            dyn = Dynamics.build([(1.0, linalg.random_unitary(dim, rng))])
            initial = linalg.random_density(dim, rng, pure=True)
            basis_a = linalg.random_orthonormal_basis(dim, rng)
            basis_b = linalg.random_orthonormal_basis(dim, rng)
            fa = family_on_grid(
                dyn, [events.basis_decomposition(list(basis_a), [f"a{i}" for i in range(dim)])], initial
            )
            fb = family_on_grid(
                dyn, [events.basis_decomposition(list(basis_b), [f"b{i}" for i in range(dim)])], initial
            )
            v1, v2 = are_compatible(fa, fb), are_compatible(fb, fa)
            assert v1.compatible == v2.compatible
            if not v1.compatible:
                assert v1.reason == v2.reason

    def test_mismatched_grids_are_errors(self):
        f1 = single_time(Z_DEC)
        f2 = family_on_grid(Dynamics.trivial(2, 2), [Z_DEC, Z_DEC], Z_PLUS)
        with pytest.raises(ValueError, match="grid"):
            are_compatible(f1, f2)
        f3 = single_time(Z_DEC, DensityOperator.from_state([0, 1]))
        with pytest.raises(ValueError, match="initial"):
            are_compatible(f1, f3)


class TestCommonRefinement:
    def test_refine_with_trivial_is_identity_on_matrix(self):
        f1, f2 = shared_dynamics_pair(Z_DEC, trivial_decomposition(2))
        refined = common_refinement(f1, f2)
        da = decoherence_matrix(f1)
        db = decoherence_matrix(refined)
        assert max_abs(da.entries - db.entries) <= 1e-12

    def test_refine_with_itself_is_idempotent(self):
        f1, f2 = shared_dynamics_pair(Z_DEC, Z_DEC)
        refined = common_refinement(f1, f2)
        assert refined.slots[0].size == 2
        assert refined.slots[0].labels == ("z+&z+", "z-&z-")

    def test_product_decomposition_in_dim4(self):
        # left/right on the first qubit, up/down on the second
        eye2 = np.eye(2, dtype=complex)
        p0 = np.diag([1.0, 0.0]).astype(complex)
        p1 = np.diag([0.0, 1.0]).astype(complex)
        left = events.make_decomposition(
            [events.Projector.build(np.kron(p0, eye2)), events.Projector.build(np.kron(p1, eye2))],
            ["L", "R"],
        )
        up = events.make_decomposition(
            [events.Projector.build(np.kron(eye2, p0)), events.Projector.build(np.kron(eye2, p1))],
            ["U", "D"],
        )
        initial = DensityOperator.from_state([0.5, 0.5, 0.5, 0.5])
        dyn = Dynamics.trivial(4, 1)
        f1 = family_on_grid(dyn, [left], initial)
        f2 = family_on_grid(dyn, [up], initial)
        refined = common_refinement(f1, f2)
        assert refined.slots[0].size == 4
        assert refined.slots[0].labels == ("L&U", "L&D", "R&U", "R&D")

    def test_noncommuting_slots_raise(self):
        f1, f2 = shared_dynamics_pair(Z_DEC, X_DEC)
        with pytest.raises(NoncommutingSlots):
            common_refinement(f1, f2)

    def test_refinement_probability_additivity(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            dim = int(rng.integers(3, 6))
            f_fine = random_consistent_family(dim, 2, rng, coarse=False)
            # coarse-grain one slot to get a compatible, coarser family
            from conftest import random_partition
            from qhist.histories import coarse_grain_slot, probabilities

            slot = int(rng.integers(0, 2))
            partition = random_partition(dim, rng)
            f_coarse = coarse_grain_slot(f_fine, slot, partition)
            verdict = are_compatible(f_fine, f_coarse)
            assert verdict.compatible
            refined = common_refinement(f_coarse, f_fine)
            p_coarse = dict(probabilities(decoherence_matrix(f_coarse)))
            p_refined = probabilities(decoherence_matrix(refined))
            # every coarse probability equals the sum over its fibers
            for c_idx, coarse_hist in enumerate(f_coarse.histories()):
                fiber_sum = 0.0
                for r_hist, (label, p) in zip(refined.histories(), p_refined):
                    if history_contained_in(r_hist, refined, coarse_hist, f_coarse):
                        fiber_sum += p
                assert abs(p_coarse[coarse_hist.label] - fiber_sum) <= 1e-10


class TestSingleFrameworkCheck:
    def test_histories_from_one_consistent_family_accepted(self):
        f = single_time(Z_DEC)
        items = [(f.history((0,)), f), (f.history((1,)), f)]
        verdict = single_framework_check(items)
        assert verdict.accepted

    def test_z_and_x_rejected_with_commutator_witness(self):
        f1, f2 = shared_dynamics_pair(Z_DEC, X_DEC)
        items = [(f1.history((0,)), f1), (f2.history((0,)), f2)]
        verdict = single_framework_check(items)
        assert not verdict.accepted
        assert verdict.reason == "noncommuting"
        assert verdict.pair == (0, 1)
        assert verdict.detail.witness == pytest.approx(0.5, abs=1e-12)

    def test_z_with_trivial_accepted(self):
        f1, f2 = shared_dynamics_pair(Z_DEC, trivial_decomposition(2))
        items = [(f1.history((0,)), f1), (f2.history((0,)), f2)]
        assert single_framework_check(items).accepted


class TestEnumerateFrameworks:
    def test_single_time_z_and_x_grid(self):
        scenario = build_single_spin((0, 0, 1))
        result = enumerate_frameworks(scenario, [["z", "x"]])
        assert result.n_candidates == 2
        assert [fw.name for fw in result.frameworks] == ["z", "x"]
        assert result.graph.edges == (("z", "x"),)

    def test_single_entry_grid(self):
        scenario = build_single_spin((0, 0, 1))
        result = enumerate_frameworks(scenario, [["z"]])
        assert len(result.frameworks) == 1
        assert result.graph.edges == ()

    def test_budget(self):
        scenario = build_single_spin((0, 0, 1))
        with pytest.raises(BudgetExceeded):
            enumerate_frameworks(scenario, [["z", "x", "y"]], budget=2)

    def test_unknown_decomposition(self):
        scenario = build_single_spin((0, 0, 1))
        with pytest.raises(KeyError):
            enumerate_frameworks(scenario, [["nope"]])

    def test_permutation_invariance(self):
        scenario = build_single_spin((0, 0, 1))
        a = enumerate_frameworks(scenario, [["z", "x", "y"]])
        b = enumerate_frameworks(scenario, [["y", "z", "x"]])
        assert {fw.name for fw in a.frameworks} == {fw.name for fw in b.frameworks}
        canon = lambda edges: {frozenset(e) for e in edges}
        assert canon(a.graph.edges) == canon(b.graph.edges)

    def test_equivalence_classes_group_identical_matrices(self):
        # from |z+>, the x and y frameworks produce the same (1/2, 1/2)
        # decoherence matrix and land in one class; z stands alone
        scenario = build_single_spin((0, 0, 1))
        result = enumerate_frameworks(scenario, [["z", "x", "y"]])
        assert result.equivalence_classes == (("z",), ("x", "y"))
        # a generic initial state separates all three
        tilted = build_single_spin((0.48, 0.6, 0.64))
        result = enumerate_frameworks(tilted, [["z", "x", "y"]])
        assert result.equivalence_classes == (("z",), ("x",), ("y",))

    def test_measured_spin_grid_selects_aligned_framework(self):
        # on the measured-spin grid only the apparatus-aligned spin slot
        # survives the consistency test
        from qhist.models import build_stern_gerlach

        scenario = build_stern_gerlach((0, 0, 1), 1, v_candidates=[("x", (1, 0, 0))])
        result = enumerate_frameworks(
            scenario, [["spin-w", "spin-x"], ["pointer"]]
        )
        assert result.n_candidates == 2
        assert [fw.name for fw in result.frameworks] == ["spin-w/pointer"]


class TestIncompatibilityGraph:
    def test_rejects_self_edges(self):
        with pytest.raises(ValueError, match="self-edge"):
            IncompatibilityGraph(nodes=("a",), edges=(("a", "a"),))

    def test_edge_list_text(self):
        g = IncompatibilityGraph(nodes=("a", "b"), edges=(("a", "b"),))
        assert g.edge_list_text() == "a -- b"


class TestTruthFunctional:
    def test_single_family_picks_max_probability(self):
        w = spin_decomposition((np.sin(0.4), 0.0, np.cos(0.4)), "w")
        f = single_time(w)
        result = universal_truth_functional_exists([f])
        assert result.exists
        assert result.assignment[0][1].label == "w+"  # cos^2(0.2) > sin^2(0.2)
        assert result.search_space == 2

    def test_single_family_ties_break_lexicographically(self):
        f = single_time(X_DEC)  # both outcomes have probability one half
        result = universal_truth_functional_exists([f])
        assert result.exists
        assert result.assignment[0][1].indices == (0,)

    def test_agrees_with_max_probability_construction(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            dim = int(rng.integers(2, 6))
            f = random_consistent_family(dim, int(rng.integers(1, 3)), rng)
            result = universal_truth_functional_exists([f])
            assert result.exists
            d = decoherence_matrix(f)
            weights = d.diagonal_weights()
            best = min(
                (p for p in range(d.n) if weights[p] > 1e-12),
                key=lambda p: (-weights[p], d.index_tuples[p]),
            )
            assert result.assignment[0][1].indices == d.index_tuples[best]

    def test_fine_and_coarse_pair_respects_containment(self):
        fine, coarse = shared_dynamics_pair(
            Z_DEC, trivial_decomposition(2), DensityOperator.from_state([0.8, 0.6])
        )
        result = universal_truth_functional_exists([fine, coarse])
        assert result.exists
        chosen_fine = result.assignment[0][1]
        chosen_coarse = result.assignment[1][1]
        assert history_contained_in(chosen_fine, fine, chosen_coarse, coarse)

    def test_incompatible_spin_families_vacuous_constraints(self):
        # pairwise-incompatible single-time spin frameworks share no events,
        # so containment never binds and an assignment trivially exists
        dyn = Dynamics.trivial(2, 1)
        fams = [
            family_on_grid(dyn, [spin_decomposition(d, n)], Z_PLUS)
            for n, d in (("z", (0, 0, 1)), ("x", (1, 0, 0)), ("y", (0, 1, 0)))
        ]
        result = universal_truth_functional_exists(fams)
        assert result.n_constraints == 0
        assert result.exists

    def test_frozen_nonexistence_witness(self):
        families, names = shared_event_families()
        result = universal_truth_functional_exists(families, names=names)
        assert not result.exists
        assert result.search_space == 4**9 == 262144
        assert result.n_searched == 262144
        assert result.assignment is None

    def test_budget_guard(self):
        families, names = shared_event_families()
        with pytest.raises(BudgetExceeded):
            universal_truth_functional_exists(families, names=names, budget=1000)

    def test_rejects_inconsistent_family(self):
        f = family_on_grid(Dynamics.trivial(2, 2), [X_DEC, Z_DEC], Z_PLUS)
        with pytest.raises(InconsistentFamily):
            universal_truth_functional_exists([f])
