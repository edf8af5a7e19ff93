"""Framework compatibility, refinement, the single-framework rule, enumeration,
and truth-functional existence search.

Two families over the same grid are compatible when their projectors commute
slot by slot and the common refinement (all nonzero slot-wise products) is
consistent; only then may their histories be combined in one description.
The truth-functional search asks whether "true" can be assigned to exactly one
history per family, respecting probability support and projector containment,
by brute-force enumeration of all assignments.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BudgetExceeded, InconsistentFamily, NoncommutingSlots
from .events import Decomposition, Projector, make_decomposition
from .histories import (
    ConsistencyReport,
    DecoherenceMatrix,
    Family,
    History,
    decoherence_matrix,
    family_on_grid,
    is_consistent,
    probabilities,
)
from .linalg import DEFAULT_TOLERANCES, Tolerances, max_abs

REASON_COMPATIBLE = "commuting-and-consistent"
REASON_NONCOMMUTING = "noncommuting"
REASON_REFINEMENT = "refinement-inconsistent"


@dataclass(frozen=True)
class CompatibilityVerdict:
    """Whether two families may be combined, and why not if not."""

    compatible: bool
    reason: str
    time_index: int | None = None
    pair: tuple[str, str] | None = None
    witness: float | None = None


def _same_density(a, b) -> bool:
    if a is b:
        return True
    if a.vector is not None and b.vector is not None:
        return np.array_equal(a.vector, b.vector)
    return np.array_equal(a.matrix, b.matrix)


def _require_same_context(f1: Family, f2: Family) -> None:
    """Families must share dim, grid, dynamics, and initial condition.

    A differing grid is a usage error, not an incompatibility.
    """
    if f1.dim != f2.dim:
        raise ValueError(f"families have different dimensions {f1.dim} and {f2.dim}")
    if f1.t0 != f2.t0 or f1.times != f2.times:
        raise ValueError("families are defined on different time grids")
    if f1.dynamics is not f2.dynamics:
        if len(f1.dynamics.segments) != len(f2.dynamics.segments):
            raise ValueError("families have different dynamics")
        for (d1, u1), (d2, u2) in zip(f1.dynamics.segments, f2.dynamics.segments):
            if d1 != d2 or not np.array_equal(u1, u2):
                raise ValueError("families have different dynamics")
    if not _same_density(f1.initial, f2.initial):
        raise ValueError("families have different initial conditions")


def _noncommuting_witness(
    f1: Family, f2: Family, tol: Tolerances
) -> tuple[int, tuple[str, str], float] | None:
    """First slot-wise commutator exceeding ``tol.comm``, if any."""
    for k, (d1, d2) in enumerate(zip(f1.slots, f2.slots)):
        for i, p in enumerate(d1.projectors):
            for j, q in enumerate(d2.projectors):
                witness = max_abs(p.matrix @ q.matrix - q.matrix @ p.matrix)
                if witness > tol.comm:
                    return k, (d1.labels[i], d2.labels[j]), witness
    return None


def refine_decompositions(
    d1: Decomposition, d2: Decomposition, tol: Tolerances = DEFAULT_TOLERANCES
) -> Decomposition:
    """All nonzero products ``P_i Q_j`` of two commuting decompositions."""
    projectors, labels = [], []
    for i, p in enumerate(d1.projectors):
        for j, q in enumerate(d2.projectors):
            product = p.matrix @ q.matrix
            trace = float(np.trace(product).real)
            if trace < 0.5:
                continue  # empty intersection
            projectors.append(Projector.build(product, tol))
            labels.append(f"{d1.labels[i]}&{d2.labels[j]}")
    return make_decomposition(projectors, labels, tol)


def common_refinement(f1: Family, f2: Family, tol: Tolerances = DEFAULT_TOLERANCES) -> Family:
    """Slot-wise refined family; raises ``NoncommutingSlots`` if ill-defined."""
    _require_same_context(f1, f2)
    witness = _noncommuting_witness(f1, f2, tol)
    if witness is not None:
        raise NoncommutingSlots(*witness)
    slots = [
        refine_decompositions(d1, d2, tol) for d1, d2 in zip(f1.slots, f2.slots)
    ]
    return Family.build(f1.t0, f1.times, slots, f1.dynamics, f1.initial)


def are_compatible(
    f1: Family,
    f2: Family,
    tol: float | None = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> CompatibilityVerdict:
    """Commutation check plus consistency of the common refinement.

    ``tol`` is the consistency threshold for the refined family's decoherence
    matrix (defaults to 1e-8 times its history count).
    """
    _require_same_context(f1, f2)
    witness = _noncommuting_witness(f1, f2, tolerances)
    if witness is not None:
        k, pair, value = witness
        return CompatibilityVerdict(
            compatible=False,
            reason=REASON_NONCOMMUTING,
            time_index=k,
            pair=pair,
            witness=value,
        )
    refined = common_refinement(f1, f2, tolerances)
    report = is_consistent(decoherence_matrix(refined, tolerances), tol)
    if not report.consistent:
        return CompatibilityVerdict(
            compatible=False,
            reason=REASON_REFINEMENT,
            pair=report.witness,
            witness=report.max_offdiag,
        )
    return CompatibilityVerdict(compatible=True, reason=REASON_COMPATIBLE)


@dataclass(frozen=True)
class SingleFrameworkVerdict:
    """Outcome of asking whether listed histories live in one framework."""

    accepted: bool
    reason: str
    pair: tuple[int, int] | None = None
    detail: CompatibilityVerdict | None = None
    consistency: ConsistencyReport | None = None


def single_framework_check(
    items: Sequence[tuple[History, Family]],
    tol: float | None = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> SingleFrameworkVerdict:
    """Accept iff all the histories' families can be combined in one framework.

    All families must be pairwise compatible and their joint refinement
    consistent; rejects with the first incompatible pair (positions in the
    input list) otherwise. Verdict-only: never raises on rejection.
    """
    if not items:
        raise ValueError("at least one (history, family) pair is required")
    for h, f in items:
        f.history(h.indices)
    families: list[Family] = []
    positions: list[int] = []
    for pos, (_, f) in enumerate(items):
        if not any(f is g for g in families):
            families.append(f)
            positions.append(pos)
    for a, b in itertools.combinations(range(len(families)), 2):
        verdict = are_compatible(families[a], families[b], tol, tolerances)
        if not verdict.compatible:
            return SingleFrameworkVerdict(
                accepted=False,
                reason=verdict.reason,
                pair=(positions[a], positions[b]),
                detail=verdict,
            )
    joint = families[0]
    for other in families[1:]:
        joint = common_refinement(joint, other, tolerances)
    report = is_consistent(decoherence_matrix(joint, tolerances), tol)
    if not report.consistent:
        return SingleFrameworkVerdict(
            accepted=False, reason=REASON_REFINEMENT, consistency=report
        )
    return SingleFrameworkVerdict(accepted=True, reason=REASON_COMPATIBLE, consistency=report)


@dataclass(frozen=True)
class IncompatibilityGraph:
    """Families as nodes, incompatible pairs as undirected edges."""

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]

    def __post_init__(self):
        for a, b in self.edges:
            if a == b:
                raise ValueError(f"self-edge {a!r}: every framework is compatible with itself")

    def edge_list_text(self) -> str:
        return "\n".join(f"{a} -- {b}" for a, b in self.edges)


@dataclass(frozen=True, eq=False)
class EnumeratedFramework:
    """One consistent selection from the enumeration grid."""

    name: str
    grid_indices: tuple[int, ...]
    family: Family
    report: ConsistencyReport
    probabilities: tuple[tuple[str, float], ...]
    decoherence: DecoherenceMatrix


# threshold for treating two frameworks as equivalent: their decoherence
# matrices agree entrywise (a deliberately coarse, label-blind criterion)
EQUIVALENCE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class EnumerationResult:
    frameworks: tuple[EnumeratedFramework, ...]
    graph: IncompatibilityGraph
    n_candidates: int
    equivalence_classes: tuple[tuple[str, ...], ...]


def enumerate_frameworks(
    scenario,
    grid: Sequence[Sequence[str]],
    tol: float | None = None,
    budget: int = 10**6,
) -> EnumerationResult:
    """Test every per-time selection of candidate decompositions for consistency.

    ``grid`` lists candidate decomposition names (resolved against
    ``scenario.decompositions``) for each time slot of the scenario's grid.
    Selections are visited in lexicographic grid order; consistent ones are
    returned with probabilities, together with the incompatibility graph
    among them.
    """
    tolerances = getattr(scenario, "tolerances", DEFAULT_TOLERANCES)
    n_slots = scenario.dynamics.n_segments
    if len(grid) != n_slots:
        raise ValueError(
            f"grid must list candidates for each of the {n_slots} time slots, got {len(grid)}"
        )
    for k, names in enumerate(grid):
        if not names:
            raise ValueError(f"slot {k} has no candidate decompositions")
        for name in names:
            if name not in scenario.decompositions:
                raise KeyError(f"slot {k}: unknown decomposition {name!r}")
    n_candidates = 1
    for names in grid:
        n_candidates *= len(names)
    if n_candidates > budget:
        raise BudgetExceeded(
            f"{n_candidates} candidate families exceed the budget of {budget}"
        )

    surviving: list[EnumeratedFramework] = []
    for combo in itertools.product(*(range(len(names)) for names in grid)):
        names = [grid[k][i] for k, i in enumerate(combo)]
        slots = [scenario.decompositions[n] for n in names]
        family = family_on_grid(scenario.dynamics, slots, scenario.initial, scenario.t0)
        d = decoherence_matrix(family, tolerances)
        report = is_consistent(d, tol)
        if report.consistent:
            surviving.append(
                EnumeratedFramework(
                    name="/".join(names),
                    grid_indices=tuple(combo),
                    family=family,
                    report=report,
                    probabilities=tuple(probabilities(d, tol)),
                    decoherence=d,
                )
            )
    edges = []
    for a, b in itertools.combinations(range(len(surviving)), 2):
        verdict = are_compatible(surviving[a].family, surviving[b].family, tol, tolerances)
        if not verdict.compatible:
            edges.append((surviving[a].name, surviving[b].name))
    graph = IncompatibilityGraph(
        nodes=tuple(fw.name for fw in surviving), edges=tuple(edges)
    )
    return EnumerationResult(
        frameworks=tuple(surviving),
        graph=graph,
        n_candidates=n_candidates,
        equivalence_classes=_equivalence_classes(surviving),
    )


def _equivalence_classes(
    frameworks: Sequence[EnumeratedFramework],
) -> tuple[tuple[str, ...], ...]:
    """Group frameworks whose decoherence matrices agree entrywise.

    A coarse, label-blind detector of equivalent frameworks; it does not
    attempt unitary-equivalence. Classes are ordered by first appearance.
    """
    classes: list[tuple[list[str], np.ndarray]] = []
    for fw in frameworks:
        entries = fw.decoherence.entries
        for members, representative in classes:
            if entries.shape == representative.shape and (
                max_abs(entries - representative) <= EQUIVALENCE_TOL
            ):
                members.append(fw.name)
                break
        else:
            classes.append(([fw.name], entries))
    return tuple(tuple(members) for members, _ in classes)


def history_contained_in(
    h1: History, f1: Family, h2: History, f2: Family, tol: Tolerances = DEFAULT_TOLERANCES
) -> bool:
    """Projector-wise containment: each event of h1 implies the event of h2.

    Tested slot by slot as ``P1 P2 = P1`` within the orthogonality tolerance.
    """
    for k in range(f1.n_times):
        p = f1.slots[k].projectors[h1.indices[k]].matrix
        q = f2.slots[k].projectors[h2.indices[k]].matrix
        if max_abs(p @ q - p) > tol.orth:
            return False
    return True


@dataclass(frozen=True, eq=False)
class TruthFunctionalResult:
    """Outcome of the exhaustive assignment search.

    ``search_space`` counts all one-true-history-per-family assignments;
    ``n_searched`` is what remains after excluding zero-probability truths,
    which can never satisfy the support constraint.
    """

    exists: bool
    assignment: tuple[tuple[str, History], ...] | None
    family_names: tuple[str, ...]
    search_space: int
    n_searched: int
    n_constraints: int
    budget: int


def universal_truth_functional_exists(
    families: Sequence[Family],
    names: Sequence[str] | None = None,
    tol: float | None = None,
    budget: int = 2**20,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> TruthFunctionalResult:
    """Search for one true history per family, consistent across families.

    An assignment must (a) mark exactly one history true in each family,
    (b) mark only histories with weight above ``tolerances.null``, and
    (c) respect containment: a true history forces every history it is
    contained in (in any other family) to be true as well. Candidate choices
    are visited in order of decreasing probability (ties lexicographic on
    index tuples), so for a single family the found assignment is the
    max-probability history. Exhaustive failure is a nonexistence proof over
    the reported search space.
    """
    families = list(families)
    if not families:
        raise ValueError("at least one family is required")
    if names is None:
        names = tuple(f"F{i}" for i in range(len(families)))
    else:
        names = tuple(names)
        if len(names) != len(families):
            raise ValueError("one name per family is required")
    for other in families[1:]:
        _require_same_context(families[0], other)

    matrices: list[DecoherenceMatrix] = []
    for name, f in zip(names, families):
        d = decoherence_matrix(f, tolerances)
        report = is_consistent(d, tol)
        if not report.consistent:
            raise InconsistentFamily(report)
        matrices.append(d)

    search_space = 1
    for d in matrices:
        search_space *= d.n
    if search_space > budget:
        raise BudgetExceeded(f"{search_space} assignments exceed the budget of {budget}")

    # candidate history positions per family, best probability first
    weights = [d.diagonal_weights() for d in matrices]
    candidates: list[list[int]] = []
    for d, w in zip(matrices, weights):
        order = sorted(
            (p for p in range(d.n) if w[p] > tolerances.null),
            key=lambda p: (-w[p], d.index_tuples[p]),
        )
        candidates.append(order)

    # containment constraints: choosing history a of family i forces history
    # b of family j; infeasible choices (forcing a non-candidate) are removed
    # until a fixed point
    all_histories = [list(f.histories()) for f in families]
    constraints: list[tuple[int, int, int, int]] = []
    for i, j in itertools.permutations(range(len(families)), 2):
        for a, ha in enumerate(all_histories[i]):
            for b, hb in enumerate(all_histories[j]):
                if history_contained_in(ha, families[i], hb, families[j], tolerances):
                    constraints.append((i, a, j, b))
    changed = True
    while changed:
        changed = False
        candidate_sets = [set(c) for c in candidates]
        for i, a, j, b in constraints:
            if a in candidate_sets[i] and b not in candidate_sets[j]:
                candidates[i] = [p for p in candidates[i] if p != a]
                changed = True
                break

    n_searched = 1
    for c in candidates:
        n_searched *= len(c)
    if n_searched == 0:
        return TruthFunctionalResult(
            exists=False,
            assignment=None,
            family_names=names,
            search_space=search_space,
            n_searched=0,
            n_constraints=len(constraints),
            budget=budget,
        )

    # vectorized exhaustive check over the candidate product
    shape = tuple(len(c) for c in candidates)
    grids = np.indices(shape, dtype=np.int32).reshape(len(candidates), -1)
    chosen = np.empty_like(grids)
    for i, c in enumerate(candidates):
        chosen[i] = np.asarray(c, dtype=grids.dtype)[grids[i]]
    valid = np.ones(grids.shape[1], dtype=bool)
    for i, a, j, b in constraints:
        np.logical_and(valid, ~((chosen[i] == a) & (chosen[j] != b)), out=valid)

    if not valid.any():
        return TruthFunctionalResult(
            exists=False,
            assignment=None,
            family_names=names,
            search_space=search_space,
            n_searched=n_searched,
            n_constraints=len(constraints),
            budget=budget,
        )
    first = int(np.argmax(valid))
    assignment = []
    for i, f in enumerate(families):
        position = int(chosen[i, first])
        assignment.append((names[i], all_histories[i][position]))
    return TruthFunctionalResult(
        exists=True,
        assignment=tuple(assignment),
        family_names=names,
        search_space=search_space,
        n_searched=n_searched,
        n_constraints=len(constraints),
        budget=budget,
    )
