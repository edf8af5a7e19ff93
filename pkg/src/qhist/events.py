"""Projectors as quantum properties and projective decompositions of the identity.

A decomposition is a set of mutually orthogonal projectors summing to the
identity: an exhaustive set of exclusive alternatives. Projectors of any rank
are allowed; the degenerate decomposition ``{I}`` is legal and serves as a
neutral time slot.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import linalg
from .linalg import (
    DEFAULT_TOLERANCES,
    Tolerances,
    as_operator,
    freeze_owned,
    frozen,
    max_abs,
)

PAULI_X = frozen(np.array([[0, 1], [1, 0]], dtype=complex))
PAULI_Y = frozen(np.array([[0, -1j], [1j, 0]], dtype=complex))
PAULI_Z = frozen(np.array([[1, 0], [0, -1]], dtype=complex))
_PAULI = (PAULI_X, PAULI_Y, PAULI_Z)


@dataclass(frozen=True, eq=False)
class Projector:
    """Hermitian idempotent operator with its (integer) rank cached."""

    matrix: np.ndarray
    rank: int

    @classmethod
    def build(cls, matrix, tol: Tolerances = DEFAULT_TOLERANCES) -> "Projector":
        """Validate and wrap a projector matrix."""
        m = as_operator(matrix, name="projector")
        report = linalg.validate(m, "projector", tol)
        # the projector identities share tol.proj
        for name, value in report.violations.items():
            if value > tol.proj:
                raise ValueError(f"projector: {name} violation {value:.3e}")
        trace = float(np.trace(m).real)
        rank = round(trace)
        if abs(trace - rank) >= tol.proj:
            raise ValueError(f"projector: trace {trace!r} is not near an integer")
        return cls(matrix=m, rank=rank)

    @classmethod
    def trusted(cls, matrix: np.ndarray, rank: int) -> "Projector":
        """Wrap a freshly built matrix without numerical checks.

        Only for constructions that preserve the projector identities exactly
        (Kronecker products and sums of validated orthogonal projectors);
        avoids O(dim^3) re-verification and copies on large tensor-product
        models. The input array is frozen in place.
        """
        return cls(matrix=freeze_owned(matrix), rank=int(rank))

    @classmethod
    def from_state(cls, v, tol: Tolerances = DEFAULT_TOLERANCES) -> "Projector":
        """Rank-1 projector |v><v| onto a unit vector."""
        vec = linalg.as_state(v, tol, name="projector state")
        return cls(matrix=freeze_owned(np.outer(vec, vec.conj())), rank=1)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def spin_projector(direction: Sequence[float], sign: int, tol: Tolerances = DEFAULT_TOLERANCES) -> Projector:
    """Projector onto the +-1/2 eigenstate of the spin component along ``direction``.

    ``(I + sign * n.sigma) / 2`` on a two-dimensional space. ``sign`` is +1 or
    -1 and ``direction`` must be a unit 3-vector within 1e-9.
    """
    n = np.asarray(direction, dtype=float).reshape(-1)
    if n.shape != (3,):
        raise ValueError(f"direction must be a 3-vector, got shape {n.shape}")
    nrm = float(np.linalg.norm(n))
    if abs(nrm - 1.0) > 1e-9:
        raise ValueError(f"direction must be a unit vector, |n| = {nrm!r}")
    if sign not in (+1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign!r}")
    n_sigma = sum(c * p for c, p in zip(n, _PAULI))
    return Projector(matrix=frozen((np.eye(2) + sign * n_sigma) / 2.0), rank=1)


@dataclass(frozen=True, eq=False)
class Decomposition:
    """Ordered, labeled projective decomposition of the identity."""

    dim: int
    projectors: tuple[Projector, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.projectors) != len(self.labels):
            raise ValueError("each projector needs exactly one label")
        if not self.projectors:
            raise ValueError("decomposition must contain at least one projector")

    @property
    def size(self) -> int:
        return len(self.projectors)

    def __iter__(self):
        return iter(self.projectors)


def make_decomposition(
    projectors: Sequence[Projector],
    labels: Sequence[str],
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> Decomposition:
    """Validate the exhaustive-exclusive invariants and build a Decomposition.

    Rejects on pairwise orthogonality failure (reporting the worst pair) or on
    completeness failure (reporting ``max_abs(sum P - I)``).
    """
    projectors = tuple(projectors)
    labels = tuple(str(s) for s in labels)
    if len(projectors) != len(labels):
        raise ValueError("each projector needs exactly one label")
    dims = {p.dim for p in projectors}
    if len(dims) != 1:
        raise ValueError(f"projectors have mixed dimensions {sorted(dims)}")
    dim = dims.pop()
    worst_pair, worst = None, 0.0
    for i in range(len(projectors)):
        for j in range(i + 1, len(projectors)):
            v = max_abs(projectors[i].matrix @ projectors[j].matrix)
            if v > worst:
                worst_pair, worst = (labels[i], labels[j]), v
    if worst > tol.orth:
        raise ValueError(
            f"orthogonality violation: |{worst_pair[0]} . {worst_pair[1]}| = {worst:.6e}"
        )
    total = np.zeros((dim, dim), dtype=complex)
    for p in projectors:
        total = total + p.matrix
    completeness = max_abs(total - np.eye(dim))
    if completeness > tol.orth:
        raise ValueError(f"completeness violation: |sum P - I| = {completeness:.6e}")
    return Decomposition(dim=dim, projectors=projectors, labels=labels)


def trusted_decomposition(projectors: Sequence[Projector], labels: Sequence[str]) -> Decomposition:
    """Build without numerical checks; see ``Projector.trusted`` for when."""
    projectors = tuple(projectors)
    return Decomposition(dim=projectors[0].dim, projectors=projectors, labels=tuple(labels))


def trivial_decomposition(dim: int, label: str = "I") -> Decomposition:
    """The degenerate decomposition ``{I}``, usable as a neutral time slot."""
    return Decomposition(
        dim=dim,
        projectors=(Projector.trusted(np.eye(dim, dtype=complex), dim),),
        labels=(label,),
    )


def spin_decomposition(
    direction: Sequence[float], name: str, tol: Tolerances = DEFAULT_TOLERANCES
) -> Decomposition:
    """Two-projector decomposition along a spin axis, labeled ``name+``/``name-``."""
    plus = spin_projector(direction, +1, tol)
    minus = spin_projector(direction, -1, tol)
    return make_decomposition([plus, minus], [f"{name}+", f"{name}-"], tol)


def basis_decomposition(
    vectors: Sequence[np.ndarray],
    labels: Sequence[str],
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> Decomposition:
    """Rank-1 decomposition built from an orthonormal basis."""
    projectors = [Projector.from_state(v, tol) for v in vectors]
    return make_decomposition(projectors, labels, tol)


def coarse_grain(
    d: Decomposition,
    partition: Sequence[Sequence[int]],
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> Decomposition:
    """Sum the projectors of each partition block into one coarser alternative.

    ``partition`` must be a set partition of ``range(d.size)``; block labels
    are joined with ``+``. The output is re-validated, so it always satisfies
    the decomposition invariants.
    """
    blocks = [tuple(int(i) for i in block) for block in partition]
    flat = [i for block in blocks for i in block]
    if sorted(flat) != list(range(d.size)):
        raise ValueError(
            f"partition must cover indices 0..{d.size - 1} exactly once, got {blocks}"
        )
    projectors = []
    labels = []
    for block in blocks:
        total = np.zeros((d.dim, d.dim), dtype=complex)
        rank = 0
        for i in block:
            total = total + d.projectors[i].matrix
            rank += d.projectors[i].rank
        projectors.append(Projector.trusted(total, rank))
        labels.append("+".join(d.labels[i] for i in block))
    return make_decomposition(projectors, labels, tol)
