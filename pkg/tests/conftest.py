"""Shared generators and independent oracles for the test suite."""

from __future__ import annotations

import itertools

import numpy as np

from qhist import events, histories, linalg


def brute_force_decoherence(f: histories.Family) -> np.ndarray:
    """Independent oracle: explicit chain products and the raw trace formula.

    Deliberately avoids the engine's prefix-sharing vector recursion and
    Gram-matrix assembly.
    """
    chains = []
    for indices in itertools.product(*(range(d.size) for d in f.slots)):
        k = np.eye(f.dim, dtype=complex)
        for slot, i in enumerate(indices):
            _, u = f.dynamics.segments[slot]
            k = f.slots[slot].projectors[i].matrix @ (u @ k)
        chains.append(k)
    rho = f.initial.matrix
    n = len(chains)
    d = np.empty((n, n), dtype=complex)
    for a in range(n):
        for b in range(n):
            d[a, b] = np.trace(chains[a] @ rho @ chains[b].conj().T)
    return d


def spin_probabilities_oracle(init_direction, measure_direction) -> tuple[float, float]:
    """Independent Born-rule oracle via explicit half-angle eigenvectors."""

    def eigvecs(n):
        theta = np.arccos(np.clip(n[2], -1.0, 1.0))
        phi = np.arctan2(n[1], n[0])
        plus = np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])
        minus = np.array([np.sin(theta / 2), -np.exp(1j * phi) * np.cos(theta / 2)])
        return plus, minus

    psi, _ = eigvecs(np.asarray(init_direction, dtype=float))
    w_plus, w_minus = eigvecs(np.asarray(measure_direction, dtype=float))
    return float(abs(np.vdot(w_plus, psi)) ** 2), float(abs(np.vdot(w_minus, psi)) ** 2)


def random_unit_direction(rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


def random_partition(n: int, rng: np.random.Generator) -> list[list[int]]:
    """Random set partition of range(n), blocks in first-appearance order."""
    labels = rng.integers(0, n, size=n)
    blocks: dict[int, list[int]] = {}
    for i, label in enumerate(labels):
        blocks.setdefault(int(label), []).append(i)
    return list(blocks.values())


def random_decomposition(
    dim: int, rng: np.random.Generator, coarse: bool = False
) -> events.Decomposition:
    basis = linalg.random_orthonormal_basis(dim, rng)
    dec = events.basis_decomposition(list(basis), [f"e{i}" for i in range(dim)])
    if coarse:
        dec = events.coarse_grain(dec, random_partition(dim, rng))
    return dec


def random_family(
    dim: int,
    n_times: int,
    rng: np.random.Generator,
    pure: bool = False,
    coarse: bool = False,
) -> histories.Family:
    """Random family: random decompositions, unitaries, and initial state."""
    dynamics = histories.Dynamics.build(
        [(1.0, linalg.random_unitary(dim, rng)) for _ in range(n_times)]
    )
    slots = [random_decomposition(dim, rng, coarse) for _ in range(n_times)]
    initial = linalg.random_density(dim, rng, pure=pure)
    return histories.family_on_grid(dynamics, slots, initial)


# Frozen truth-functional nonexistence witness: nine single-time families in
# dimension 4 whose rank-1 events are shared pairwise across families. Every
# family is consistent and every event has weight 1/4 under the maximally
# mixed initial state, yet exhaustive search (262144 assignments) finds no
# admissible truth assignment: each shared event would have to be true in
# both of its families, making the total count of true events even, while
# nine families require exactly nine.
KS_VECTORS = {
    1: (0, 0, 0, 1),
    2: (0, 0, 1, 0),
    3: (1, 1, 0, 0),
    4: (1, -1, 0, 0),
    5: (0, 1, 0, 0),
    6: (1, 0, 1, 0),
    7: (1, 0, -1, 0),
    8: (1, -1, 1, -1),
    9: (1, -1, -1, 1),
    10: (0, 0, 1, 1),
    11: (1, 1, 1, 1),
    12: (0, 1, 0, -1),
    13: (1, 0, 0, 1),
    14: (1, 0, 0, -1),
    15: (0, 1, -1, 0),
    16: (1, 1, -1, 1),
    17: (1, 1, 1, -1),
    18: (-1, 1, 1, 1),
}
KS_BASES = (
    (1, 2, 3, 4),
    (1, 5, 6, 7),
    (8, 9, 3, 10),
    (8, 11, 7, 12),
    (2, 5, 13, 14),
    (9, 11, 14, 15),
    (16, 17, 4, 10),
    (16, 18, 6, 12),
    (17, 18, 13, 15),
)


def shared_event_families() -> tuple[list[histories.Family], list[str]]:
    """Build the frozen nonexistence witness as nine single-time families."""
    dynamics = histories.Dynamics.trivial(4, 1)
    initial = linalg.DensityOperator.from_matrix(np.eye(4) / 4.0)
    families, names = [], []
    for k, basis in enumerate(KS_BASES):
        vectors = []
        for idx in basis:
            v = np.asarray(KS_VECTORS[idx], dtype=complex)
            vectors.append(v / np.linalg.norm(v))
        dec = events.basis_decomposition(vectors, [f"u{idx}" for idx in basis])
        families.append(histories.family_on_grid(dynamics, [dec], initial))
        names.append(f"B{k + 1}")
    return families, names


def random_consistent_family(
    dim: int,
    n_times: int,
    rng: np.random.Generator,
    pure: bool = False,
    coarse: bool = True,
) -> histories.Family:
    """Random family that is consistent by construction.

    Every slot projects onto the dynamics-evolved image of one fixed basis,
    optionally coarse-grained, so distinct chain operators have disjoint
    supports and all off-diagonal entries vanish identically.
    """
    dynamics = histories.Dynamics.build(
        [(1.0, linalg.random_unitary(dim, rng)) for _ in range(n_times)]
    )
    basis = linalg.random_orthonormal_basis(dim, rng)
    slots = []
    evolved = np.eye(dim, dtype=complex)
    for k in range(n_times):
        evolved = dynamics.segments[k][1] @ evolved
        vectors = [evolved @ b for b in basis]
        dec = events.basis_decomposition(vectors, [f"b{i}" for i in range(dim)])
        if coarse and rng.random() < 0.7:
            dec = events.coarse_grain(dec, random_partition(dim, rng))
        slots.append(dec)
    initial = linalg.random_density(dim, rng, pure=pure)
    return histories.family_on_grid(dynamics, slots, initial)
