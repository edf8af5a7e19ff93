"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (visible with ``pytest -s`` or on failure). Criteria with a
runtime budget assert it.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from conftest import (
    random_consistent_family,
    random_family,
    random_partition,
    random_unit_direction,
    shared_event_families,
    spin_probabilities_oracle,
)
from qhist import linalg
from qhist.cli import main
from qhist.errors import InconsistentFamily
from qhist.events import spin_decomposition
from qhist.frameworks import single_framework_check, universal_truth_functional_exists
from qhist.histories import (
    Dynamics,
    coarse_grain_slot,
    decoherence_matrix,
    family_on_grid,
    is_consistent,
    probabilities,
)
from qhist.linalg import DensityOperator, adjoint, max_abs
from qhist.models import (
    build_cat,
    build_single_spin,
    build_stern_gerlach,
    cat_offdiagonal_suppression,
    measurement_framework_selection_report,
)


@contextmanager
def criterion(name, limit=None):
    t0 = time.perf_counter()
    try:
        yield
    except Exception:
        print(f"FAIL  {name}")
        raise
    dt = time.perf_counter() - t0
    if limit is not None and dt >= limit:
        print(f"FAIL  {name} (runtime {dt:.2f}s exceeds {limit}s)")
        raise AssertionError(f"{name}: runtime {dt:.2f}s exceeds limit {limit}s")
    timing = f" ({dt:.2f}s)" if limit is not None else ""
    print(f"PASS  {name}{timing}")


def test_born_rule_against_eigenvector_oracle():
    with criterion("born-rule: engine matches |<w|init>|^2 on 100 random pairs", 1.0):
        rng = np.random.default_rng(20)
        from qhist.histories import family_on_grid

        for _ in range(100):
            init, w = random_unit_direction(rng), random_unit_direction(rng)
            scenario = build_single_spin(init)
            fam = family_on_grid(
                scenario.dynamics, [spin_decomposition(w, "w")], scenario.initial
            )
            probs = dict(probabilities(decoherence_matrix(fam)))
            p_plus, p_minus = spin_probabilities_oracle(init, w)
            assert abs(probs["w+"] - p_plus) <= 1e-12
            assert abs(probs["w-"] - p_minus) <= 1e-12


def test_decoherence_matrix_structure():
    with criterion(
        "decoherence-matrix structure: Hermitian/PSD/unit-trace on 200 random families",
        10.0,
    ):
        rng = np.random.default_rng(21)
        for _ in range(200):
            dim = int(rng.integers(2, 9))
            n_times = int(rng.integers(1, 4))
            f = random_family(dim, n_times, rng, pure=bool(rng.integers(0, 2)))
            d = decoherence_matrix(f)
            assert max_abs(d.entries - adjoint(d.entries)) <= 1e-12
            assert linalg.min_eigenvalue((d.entries + adjoint(d.entries)) / 2) >= -1e-9
            assert abs(d.entries.diagonal().real.sum() - 1.0) <= 1e-10


def test_inconsistency_witness_quarter():
    with criterion("inconsistency witness: x-then-z off-diagonal is 0.25 and rejected"):
        fam = family_on_grid(
            Dynamics.trivial(2, 2),
            [spin_decomposition((1, 0, 0), "x"), spin_decomposition((0, 0, 1), "z")],
            DensityOperator.from_state([1, 0]),
        )
        d = decoherence_matrix(fam)
        report = is_consistent(d)
        assert not report.consistent
        assert abs(report.max_offdiag - 0.25) <= 1e-12
        with pytest.raises(InconsistentFamily):
            probabilities(d)


def test_measurement_framework_selection():
    with criterion(
        "framework selection: only the measured axis stays consistent (env 0..3)", 5.0
    ):
        candidates = [("x", (1, 0, 0)), ("y", (0, 1, 0))]
        for env in range(4):
            scenario = build_stern_gerlach((0, 0, 1), env)
            d = decoherence_matrix(scenario.families["w"])
            assert is_consistent(d).consistent
            probs = dict(probabilities(d))
            p_plus, p_minus = spin_probabilities_oracle((0, 0, 1), (0, 0, 1))
            assert abs(probs["w+,ptr+"] - p_plus) <= 1e-12
            assert abs(probs["w-,ptr-"] - p_minus) <= 1e-12
            report = measurement_framework_selection_report(scenario, candidates)
            for row in report.rows:
                assert not row.consistent
                assert row.witness >= 0.1


def test_cat_suppression_closed_form():
    with criterion("cat suppression: |cos theta|^n for n=1..10 and exact zero at pi/2"):
        for n in range(1, 11):
            scenario = build_cat(n, 0.3)
            suppression = cat_offdiagonal_suppression(scenario)
            assert abs(suppression - abs(math.cos(0.3)) ** n) <= 1e-12
        assert cat_offdiagonal_suppression(build_cat(1, math.pi / 2)) <= 1e-14
        assert cat_offdiagonal_suppression(build_cat(4, math.pi / 2)) <= 1e-14


def test_coarse_graining_preserves_consistency_and_adds():
    with criterion(
        "coarse-graining: consistency preserved and probabilities add over fibers"
    ):
        rng = np.random.default_rng(22)
        for _ in range(100):
            dim = int(rng.integers(2, 7))
            n_times = int(rng.integers(1, 4))
            f = random_consistent_family(dim, n_times, rng, coarse=False)
            fine_d = decoherence_matrix(f)
            assert is_consistent(fine_d).consistent
            fine_probs = fine_d.diagonal_weights()
            for slot in range(n_times):
                partition = random_partition(f.slots[slot].size, rng)
                coarse = coarse_grain_slot(f, slot, partition)
                coarse_d = decoherence_matrix(coarse)
                assert is_consistent(coarse_d).consistent
                block_of = {}
                for b, block in enumerate(partition):
                    for i in block:
                        block_of[i] = b
                sums = {t: 0.0 for t in coarse_d.index_tuples}
                for t, p in zip(fine_d.index_tuples, fine_probs):
                    ct = t[:slot] + (block_of[t[slot]],) + t[slot + 1 :]
                    sums[ct] += p
                for t, p in zip(coarse_d.index_tuples, coarse_d.diagonal_weights()):
                    assert abs(p - sums[t]) <= 1e-10


def test_chaining_through_conditioning():
    with criterion("chaining: joint two-time probabilities factor through conditioning"):
        from qhist.histories import condition_on_outcome

        rng = np.random.default_rng(23)
        for _ in range(50):
            dim = int(rng.integers(2, 7))
            f = random_consistent_family(dim, 2, rng, pure=bool(rng.integers(0, 2)))
            d = decoherence_matrix(f)
            assert is_consistent(d).consistent
            joint = dict(zip(d.index_tuples, d.diagonal_weights()))
            first = family_on_grid(
                Dynamics.build(f.dynamics.segments[:1]), f.slots[:1], f.initial, f.t0
            )
            p1 = decoherence_matrix(first).diagonal_weights()
            for i1 in range(f.slots[0].size):
                if p1[i1] <= 1e-12:
                    continue
                rho = condition_on_outcome(first.history((i1,)), first)
                follow = family_on_grid(
                    Dynamics.build(f.dynamics.segments[1:]), f.slots[1:], rho, f.times[0]
                )
                p2 = decoherence_matrix(follow).diagonal_weights()
                for i2 in range(f.slots[1].size):
                    assert abs(joint[(i1, i2)] - p1[i1] * p2[i2]) <= 1e-12


def test_single_framework_rule():
    with criterion(
        "single framework rule: same-family pairs accepted, z/x rejected at 0.5"
    ):
        rng = np.random.default_rng(24)
        for _ in range(10):
            f = random_consistent_family(int(rng.integers(2, 6)), 2, rng)
            hists = list(f.histories())
            items = [(hists[0], f), (hists[-1], f)]
            assert single_framework_check(items).accepted
        dyn = Dynamics.trivial(2, 1)
        initial = DensityOperator.from_state([1, 0])
        fz = family_on_grid(dyn, [spin_decomposition((0, 0, 1), "z")], initial)
        fx = family_on_grid(dyn, [spin_decomposition((1, 0, 0), "x")], initial)
        verdict = single_framework_check([(fz.history((0,)), fz), (fx.history((0,)), fx)])
        assert not verdict.accepted
        assert abs(verdict.detail.witness - 0.5) <= 1e-12


def test_truth_functionals():
    with criterion(
        "truth functionals: per-family existence and frozen nonexistence witness",
        30.0,
    ):
        rng = np.random.default_rng(25)
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

        families, names = shared_event_families()
        result = universal_truth_functional_exists(families, names=names, budget=2**20)
        assert not result.exists
        assert result.search_space == 262144
        assert result.n_searched == 262144


def test_demo_determinism(tmp_path, capsys):
    with criterion("determinism: demo outputs byte-identical across 5 runs"):
        demos = {
            "spin": ["demo", "spin", "--init", "z", "--measure", "x"],
            "stern-gerlach": ["demo", "stern-gerlach", "--w", "z", "--env", "1"],
            "cat": ["demo", "cat", "--env", "3", "--theta", "0.3"],
        }
        for name, argv in demos.items():
            reports, files = set(), set()
            for i in range(5):
                out_file = tmp_path / f"{name}-{i}.json"
                code = main(argv + ["--scenario-out", str(out_file)])
                captured = capsys.readouterr()
                assert code == 0
                reports.add(captured.out.replace(str(out_file), "FILE"))
                files.add(out_file.read_bytes())
            assert len(reports) == 1, f"{name} report varies across runs"
            assert len(files) == 1, f"{name} scenario file varies across runs"
