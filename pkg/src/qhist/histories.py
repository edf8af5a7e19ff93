"""Histories, chain operators, decoherence functionals, and conditioning.

A family fixes a time grid (with the initial condition at ``t0`` strictly
before the first event time), one projective decomposition per event time,
unitary dynamics across each gap, and an initial density operator. Its
histories are the full Cartesian product of per-slot alternatives, ordered
lexicographically. The decoherence functional is

    D(a, b) = trace(K(a) rho0 K(b)^dag),

with the chain operator K built from projectors interleaved with the segment
propagators. The diagonal of D carries formal weights, which become classical
probabilities exactly when the family passes the consistency test.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from . import linalg
from .errors import InconsistentFamily, NullOutcome
from .events import Decomposition, coarse_grain
from .linalg import DEFAULT_TOLERANCES, DensityOperator, Tolerances, adjoint, frozen, max_abs

# invariants the engine verifies on every computed decoherence matrix
HERMITICITY_TOL = 1e-12

# consistency condition: "medium" zeroes both parts of each off-diagonal
# entry, "weak" only the real part
CONDITIONS = ("medium", "weak")


@dataclass(frozen=True, eq=False)
class Dynamics:
    """Unitary propagators across the gaps of a time grid.

    ``segments[k]`` is ``(duration, unitary)`` and propagates states across
    the k-th gap; a family with n event times needs n segments, the first one
    carrying the initial condition from t0 to the first event time.
    """

    dim: int
    segments: tuple[tuple[float, np.ndarray], ...]

    @classmethod
    def build(
        cls,
        segments: Sequence[tuple[float, np.ndarray]],
        tol: Tolerances = DEFAULT_TOLERANCES,
    ) -> "Dynamics":
        """Validate segment unitaries and durations."""
        if not segments:
            raise ValueError("dynamics needs at least one segment")
        checked = []
        dim = None
        for k, (duration, u) in enumerate(segments):
            duration = float(duration)
            if duration < 0:
                raise ValueError(f"segment {k}: negative duration {duration}")
            mat = linalg.as_operator(u, name=f"segment {k} unitary")
            report = linalg.validate(mat, "unitary", tol)
            if not report.passed:
                raise ValueError(
                    f"segment {k}: unitarity violation {report.violations['unitarity']:.3e}"
                )
            if dim is None:
                dim = mat.shape[0]
            elif mat.shape[0] != dim:
                raise ValueError("segment unitaries have mixed dimensions")
            checked.append((duration, mat))
        return cls(dim=dim, segments=tuple(checked))

    @classmethod
    def trusted(cls, segments: Sequence[tuple[float, np.ndarray]]) -> "Dynamics":
        """Wrap without the O(dim^3) unitarity check; for constructions that
        are unitary by algebra (Kronecker products of validated blocks).
        The segment arrays are frozen in place, not copied."""
        segments = tuple((float(d), linalg.freeze_owned(u)) for d, u in segments)
        return cls(dim=segments[0][1].shape[0], segments=segments)

    @classmethod
    def trivial(cls, dim: int, count: int, duration: float = 1.0) -> "Dynamics":
        """Identity evolution across ``count`` unit gaps."""
        eye = linalg.freeze_owned(np.eye(dim, dtype=complex))
        return cls(dim=dim, segments=tuple((float(duration), eye) for _ in range(count)))

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    def times_from(self, t0: float) -> tuple[float, ...]:
        """Event times implied by the segment durations, starting at ``t0``."""
        out, t = [], float(t0)
        for duration, _ in self.segments:
            t += duration
            out.append(t)
        return tuple(out)


@dataclass(frozen=True)
class History:
    """One projector index per time slot, plus the derived label."""

    indices: tuple[int, ...]
    label: str


@dataclass(frozen=True, eq=False)
class Family:
    """A time grid, one decomposition per time, dynamics, and an initial state."""

    t0: float
    times: tuple[float, ...]
    slots: tuple[Decomposition, ...]
    dynamics: Dynamics
    initial: DensityOperator

    @classmethod
    def build(
        cls,
        t0: float,
        times: Sequence[float],
        slots: Sequence[Decomposition],
        dynamics: Dynamics,
        initial: DensityOperator,
    ) -> "Family":
        times = tuple(float(t) for t in times)
        slots = tuple(slots)
        if not times:
            raise ValueError("family needs at least one event time")
        if len(times) != len(slots):
            raise ValueError("one decomposition per event time is required")
        if len(dynamics.segments) != len(times):
            raise ValueError(
                f"dynamics has {len(dynamics.segments)} segments but the grid has "
                f"{len(times)} gaps (t0 plus {len(times)} event times)"
            )
        grid = (float(t0),) + times
        for k in range(len(grid) - 1):
            if grid[k + 1] <= grid[k]:
                raise ValueError(f"times must be strictly increasing, got {grid}")
            gap = grid[k + 1] - grid[k]
            duration = dynamics.segments[k][0]
            if abs(gap - duration) > 1e-9:
                raise ValueError(
                    f"segment {k} duration {duration} does not span the grid gap {gap}"
                )
        dims = {d.dim for d in slots} | {dynamics.dim, initial.dim}
        if len(dims) != 1:
            raise ValueError(f"family members have mixed dimensions {sorted(dims)}")
        return cls(t0=float(t0), times=times, slots=slots, dynamics=dynamics, initial=initial)

    @property
    def dim(self) -> int:
        return self.dynamics.dim

    @property
    def n_times(self) -> int:
        return len(self.times)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(d.size for d in self.slots)

    @property
    def n_histories(self) -> int:
        n = 1
        for d in self.slots:
            n *= d.size
        return n

    def label_for(self, indices: Sequence[int]) -> str:
        return ",".join(self.slots[k].labels[i] for k, i in enumerate(indices))

    def history(self, indices: Sequence[int]) -> History:
        """Validated history of this family."""
        indices = tuple(int(i) for i in indices)
        if len(indices) != self.n_times:
            raise ValueError(f"history needs {self.n_times} indices, got {len(indices)}")
        for k, i in enumerate(indices):
            if not 0 <= i < self.slots[k].size:
                raise IndexError(
                    f"slot {k}: index {i} out of range for {self.slots[k].size} alternatives"
                )
        return History(indices=indices, label=self.label_for(indices))

    def histories(self) -> Iterator[History]:
        """All histories in lexicographic index order."""
        for indices in itertools.product(*(range(d.size) for d in self.slots)):
            yield History(indices=indices, label=self.label_for(indices))


def family_on_grid(
    dynamics: Dynamics,
    slots: Sequence[Decomposition],
    initial: DensityOperator,
    t0: float = 0.0,
) -> Family:
    """Family whose event times are implied by the dynamics durations."""
    return Family.build(t0, dynamics.times_from(t0), slots, dynamics, initial)


def chain_operator(h: History, f: Family) -> np.ndarray:
    """Time-ordered product ``P_n U_n ... P_1 U_1`` for one history."""
    f.history(h.indices)  # range check
    out = None
    for k, i in enumerate(h.indices):
        _, u = f.dynamics.segments[k]
        p = f.slots[k].projectors[i].matrix
        out = p @ u if out is None else p @ (u @ out)
    return out


def _chain_vectors(f: Family, psi: np.ndarray) -> np.ndarray:
    """Stack of ``K(h) psi`` over all histories, lexicographic order.

    Shares prefix work across histories, so the cost is close to one
    matrix-vector product per history rather than per slot.
    """
    out = np.empty((f.n_histories, f.dim), dtype=complex)
    strides = []
    n = 1
    for d in reversed(f.shape):
        strides.append(n)
        n *= d
    strides = strides[::-1]

    def descend(slot: int, offset: int, vec: np.ndarray) -> None:
        _, u = f.dynamics.segments[slot]
        moved = u @ vec
        for i, p in enumerate(f.slots[slot].projectors):
            branch = p.matrix @ moved
            if slot == f.n_times - 1:
                out[offset + i] = branch
            else:
                descend(slot + 1, offset + i * strides[slot], branch)

    descend(0, 0, psi)
    return out


@dataclass(frozen=True, eq=False)
class DecoherenceMatrix:
    """Hermitian matrix D over a family's histories; diagonal = candidate weights."""

    family: Family
    entries: np.ndarray
    labels: tuple[str, ...]
    index_tuples: tuple[tuple[int, ...], ...]
    tolerances: Tolerances

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def diagonal_weights(self) -> np.ndarray:
        """Formal weights (real diagonal); probabilities only if consistent."""
        return self.entries.diagonal().real.copy()

    def max_offdiagonal(self, condition: str = "medium") -> tuple[float, tuple[int, int]]:
        """Largest off-diagonal magnitude and its (row, col) position."""
        if condition not in CONDITIONS:
            raise ValueError(f"condition must be one of {CONDITIONS}, got {condition!r}")
        if self.n == 1:
            return 0.0, (0, 0)
        probe = np.abs(self.entries.real) if condition == "weak" else np.abs(self.entries)
        masked = probe.copy()
        np.fill_diagonal(masked, -1.0)
        flat = int(np.argmax(masked))
        pair = (flat // self.n, flat % self.n)
        return float(masked[pair]), pair


def default_consistency_tol(n_histories: int) -> float:
    """Absolute off-diagonal threshold: 1e-8 times the matrix dimension."""
    return 1e-8 * n_histories


def decoherence_matrix(f: Family, tol: Tolerances = DEFAULT_TOLERANCES) -> DecoherenceMatrix:
    """Compute ``D(a, b) = trace(K(a) rho0 K(b)^dag)`` for all history pairs.

    The initial density is expanded into its pure components, each propagated
    through the chain as a vector; D is the weighted sum of the resulting Gram
    matrices, which reproduces the trace formula exactly and keeps D
    positive semidefinite by construction. Entry evaluation order does not
    affect the result beyond normal floating-point rounding.
    """
    weights, vectors = f.initial.eigen_mixture()
    n = f.n_histories
    entries = np.zeros((n, n), dtype=complex)
    for w, psi in zip(weights, vectors):
        stack = _chain_vectors(f, psi)
        entries += w * (stack @ stack.conj().T)

    herm = max_abs(entries - adjoint(entries))
    if herm > HERMITICITY_TOL:
        raise ArithmeticError(f"decoherence matrix lost hermiticity: {herm:.3e}")
    trace_gap = abs(float(entries.diagonal().real.sum()) - 1.0)
    if trace_gap > tol.norm:
        raise ArithmeticError(
            f"decoherence diagonal sums to 1 +- {trace_gap:.3e}; family is not "
            f"exhaustive or the initial state is not normalized"
        )
    lowest = linalg.min_eigenvalue((entries + adjoint(entries)) / 2.0)
    if lowest < -tol.psd:
        raise ArithmeticError(f"decoherence matrix has negative eigenvalue {lowest:.3e}")

    labels, tuples = [], []
    for h in f.histories():
        labels.append(h.label)
        tuples.append(h.indices)
    return DecoherenceMatrix(
        family=f,
        entries=frozen(entries),
        labels=tuple(labels),
        index_tuples=tuple(tuples),
        tolerances=tol,
    )


@dataclass(frozen=True)
class ConsistencyReport:
    """Verdict of the off-diagonal test, with the worst witness pair."""

    consistent: bool
    max_offdiag: float
    witness: tuple[str, str]
    witness_indices: tuple[tuple[int, ...], tuple[int, ...]]
    tol: float
    condition: str


def is_consistent(
    d: DecoherenceMatrix, tol: float | None = None, condition: str = "medium"
) -> ConsistencyReport:
    """Test whether every off-diagonal entry vanishes within ``tol``.

    ``tol`` defaults to ``1e-8 * n_histories``; the threshold is absolute
    since the diagonal sums to one.
    """
    if tol is None:
        tol = default_consistency_tol(d.n)
    value, (i, j) = d.max_offdiagonal(condition)
    return ConsistencyReport(
        consistent=value <= tol,
        max_offdiag=value,
        witness=(d.labels[i], d.labels[j]),
        witness_indices=(d.index_tuples[i], d.index_tuples[j]),
        tol=float(tol),
        condition=condition,
    )


def probabilities(
    d: DecoherenceMatrix, tol: float | None = None, condition: str = "medium"
) -> list[tuple[str, float]]:
    """Classical probabilities of a consistent family's histories.

    Raises ``InconsistentFamily`` (carrying the witness pair) when the
    consistency precondition fails; weights of inconsistent families are not
    probabilities. Zero-probability histories are kept so the report stays
    exhaustive.
    """
    report = is_consistent(d, tol, condition)
    if not report.consistent:
        raise InconsistentFamily(report)
    probs = np.clip(d.diagonal_weights(), 0.0, 1.0)
    return list(zip(d.labels, (float(p) for p in probs)))


def condition_on_outcome(
    h: History, f: Family, tol: Tolerances = DEFAULT_TOLERANCES
) -> DensityOperator:
    """Renormalized post-history state ``K rho K^dag / trace``.

    The result serves as the initial condition of a follow-up family starting
    at the last event time. Raises ``NullOutcome`` when the history weight is
    at or below ``tol.null``.
    """
    f.history(h.indices)
    if f.initial.vector is not None:
        vec = f.initial.vector
        for k, i in enumerate(h.indices):
            _, u = f.dynamics.segments[k]
            vec = f.slots[k].projectors[i].matrix @ (u @ vec)
        weight = float(np.vdot(vec, vec).real)
        if weight <= tol.null:
            raise NullOutcome(f"history {h.label!r} has weight {weight:.3e}")
        return DensityOperator.from_state(vec / np.sqrt(weight), tol)
    k_op = chain_operator(h, f)
    rho = k_op @ f.initial.matrix @ adjoint(k_op)
    weight = float(np.trace(rho).real)
    if weight <= tol.null:
        raise NullOutcome(f"history {h.label!r} has weight {weight:.3e}")
    return DensityOperator.from_matrix(rho / weight, tol)


def coarse_grain_slot(
    f: Family,
    slot_index: int,
    partition: Sequence[Sequence[int]],
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> Family:
    """Family with one slot replaced by its coarse-graining."""
    if not 0 <= slot_index < f.n_times:
        raise IndexError(f"slot index {slot_index} out of range")
    slots = list(f.slots)
    slots[slot_index] = coarse_grain(slots[slot_index], partition, tol)
    return Family.build(f.t0, f.times, slots, f.dynamics, f.initial)
