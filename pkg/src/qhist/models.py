"""Built-in scenario builders: single spin, spin measurement with a pointer
and environment, and a cat-state decoherence toy.

The measurement model is a pure-state pre-measurement chain: the measured
component is copied onto a pointer qubit, which is then copied into each
environment qubit. The cat model couples each environment qubit to the
"dead" branch through a rotation of tunable angle, which makes the
consistent-to-inconsistent crossover quantitative: the coherence between the
branches falls off as |cos(theta)|^n with n environment qubits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import linalg
from .errors import DimensionCapExceeded
from .events import (
    Decomposition,
    PAULI_X,
    Projector,
    spin_decomposition,
    spin_projector,
    trivial_decomposition,
    trusted_decomposition,
)
from .histories import (
    Dynamics,
    Family,
    decoherence_matrix,
    family_on_grid,
    is_consistent,
    probabilities,
)
from .linalg import DEFAULT_TOLERANCES, DensityOperator, Tolerances, tensor, tensor_state

ENV_QUBIT_CAP = 10

_KET0 = np.array([1.0, 0.0], dtype=complex)
_KET1 = np.array([0.0, 1.0], dtype=complex)


@dataclass(frozen=True, eq=False)
class Scenario:
    """A named, serializable bundle of state, dynamics, decompositions, families."""

    name: str
    dim: int
    t0: float
    initial: DensityOperator
    dynamics: Dynamics
    decompositions: dict[str, Decomposition]
    families: dict[str, Family]
    tolerances: Tolerances = DEFAULT_TOLERANCES
    consistency_tol: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        dims = {self.initial.dim, self.dynamics.dim}
        dims.update(d.dim for d in self.decompositions.values())
        dims.update(f.dim for f in self.families.values())
        if dims != {self.dim}:
            raise ValueError(f"scenario members have mixed dimensions {sorted(dims)}")


def _unit_direction(v, name: str = "direction") -> np.ndarray:
    n = np.asarray(v, dtype=float).reshape(-1)
    if n.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector")
    nrm = float(np.linalg.norm(n))
    if abs(nrm - 1.0) > 1e-9:
        raise ValueError(f"{name} must be a unit vector, |n| = {nrm!r}")
    return n


def spin_state(direction) -> np.ndarray:
    """+1/2 eigenstate of the spin component along ``direction`` (dim 2)."""
    n = _unit_direction(direction)
    theta = math.acos(max(-1.0, min(1.0, n[2])))
    phi = math.atan2(n[1], n[0])
    return np.array(
        [math.cos(theta / 2.0), math.sin(theta / 2.0) * complex(math.cos(phi), math.sin(phi))],
        dtype=complex,
    )


def spin_axis_decompositions(tol: Tolerances = DEFAULT_TOLERANCES) -> dict[str, Decomposition]:
    """The standard z, x, y decompositions of a two-dimensional space."""
    return {
        name: spin_decomposition(axis, name, tol)
        for name, axis in (("z", (0, 0, 1)), ("x", (1, 0, 0)), ("y", (0, 1, 0)))
    }


def build_single_spin(
    init_direction=(0, 0, 1), tol: Tolerances = DEFAULT_TOLERANCES
) -> Scenario:
    """Single spin-1/2 with one event time, identity dynamics.

    Provides the z, x, y decompositions plus the trivial one, and one
    single-time family per axis. Further axes can be added through
    ``qhist.events.spin_decomposition`` or the ``spin:`` shorthand of the
    scenario file format.
    """
    init = _unit_direction(init_direction, "init_direction")
    initial = DensityOperator.from_state(spin_state(init), tol)
    dynamics = Dynamics.trivial(2, 1)
    decompositions = spin_axis_decompositions(tol)
    decompositions["trivial"] = trivial_decomposition(2)
    families = {
        name: family_on_grid(dynamics, [decompositions[name]], initial)
        for name in ("z", "x", "y")
    }
    return Scenario(
        name="single-spin",
        dim=2,
        t0=0.0,
        initial=initial,
        dynamics=dynamics,
        decompositions=decompositions,
        families=families,
        tolerances=tol,
        meta={"kind": "single-spin", "init_direction": [float(c) for c in init]},
    )


def _kron_all(*mats: np.ndarray) -> np.ndarray:
    out = mats[0]
    for m in mats[1:]:
        out = tensor(out, m)
    return out


def _kron_with_identity(small: np.ndarray, block_dim: int) -> np.ndarray:
    """``kron(small, I)`` materialized without touching its zero blocks.

    Large tensor-product operators are mostly zeros; writing only the block
    diagonals keeps both construction time and resident memory proportional
    to the nonzero content instead of dim^2.
    """
    k = small.shape[0]
    total = k * block_dim
    if total > linalg.dim_cap():
        raise DimensionCapExceeded(
            f"tensor product dimension {total} exceeds cap {linalg.dim_cap()}"
        )
    out = np.zeros((total, total), dtype=complex)
    for i in range(k):
        for j in range(k):
            c = small[i, j]
            if c != 0:
                view = out[
                    i * block_dim : (i + 1) * block_dim, j * block_dim : (j + 1) * block_dim
                ]
                np.fill_diagonal(view, c)
    return out


def _embedded_spin_decomposition(
    direction, label: str, rest_dim: int
) -> Decomposition:
    """Spin decomposition on spin (x) rest, labels ``label+``/``label-``."""
    plus = spin_projector(direction, +1)
    minus = spin_projector(direction, -1)
    return trusted_decomposition(
        [
            Projector.trusted(_kron_with_identity(plus.matrix, rest_dim), rest_dim),
            Projector.trusted(_kron_with_identity(minus.matrix, rest_dim), rest_dim),
        ],
        [f"{label}+", f"{label}-"],
    )


def build_stern_gerlach(
    w=(0, 0, 1),
    env_qubits: int = 0,
    init_direction=(0, 0, 1),
    v_candidates: Sequence[tuple[str, Sequence[float]]] = (),
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> Scenario:
    """Spin coupled to a pointer qubit and ``env_qubits`` copy qubits.

    The grid is t0 < t1 < t2: free evolution up to t1, then a controlled copy
    in the ``w`` eigenbasis writes the spin component onto the pointer and
    clones the pointer into every environment qubit. The ``w`` family asks
    for the spin component at t1 and the pointer at t2; each candidate in
    ``v_candidates`` (label, direction) adds a framework asking instead for
    the spin component along that axis at t1.
    """
    if not 0 <= env_qubits <= ENV_QUBIT_CAP:
        raise DimensionCapExceeded(
            f"env_qubits must be between 0 and {ENV_QUBIT_CAP}, got {env_qubits}"
        )
    w = _unit_direction(w, "w")
    init = _unit_direction(init_direction, "init_direction")
    m = int(env_qubits)
    env_dim = 2**m
    dim = 4 * env_dim

    x_all = _kron_all(*([PAULI_X] * m)) if m else np.eye(1, dtype=complex)
    p0 = np.array([[1, 0], [0, 0]], dtype=complex)
    p1 = np.array([[0, 0], [0, 1]], dtype=complex)

    # pointer + environment action per spin branch:
    #   w+ : copy the (untouched) pointer into the environment
    #   w- : flip the pointer, then copy it into the environment
    a_plus = np.zeros((2 * env_dim, 2 * env_dim), dtype=complex)
    np.fill_diagonal(a_plus[:env_dim, :env_dim], 1.0)
    a_plus[env_dim:, env_dim:] = x_all
    a_minus = np.zeros((2 * env_dim, 2 * env_dim), dtype=complex)
    np.fill_diagonal(a_minus[:env_dim, env_dim:], 1.0)
    a_minus[env_dim:, :env_dim] = x_all
    w_plus = spin_projector(w, +1)
    w_minus = spin_projector(w, -1)
    u_measure = tensor(w_plus.matrix, a_plus) + tensor(w_minus.matrix, a_minus)
    dynamics = Dynamics.trusted(
        [(1.0, np.eye(dim, dtype=complex)), (1.0, u_measure)]
    )

    initial = DensityOperator.from_state(
        tensor_state(spin_state(init), tensor_state(_KET0, _unit_env_state(m))), tol
    )

    decompositions: dict[str, Decomposition] = {
        "spin-w": _embedded_spin_decomposition(w, "w", 2 * env_dim),
        "pointer": trusted_decomposition(
            [
                Projector.trusted(
                    _kron_with_identity(np.kron(np.eye(2, dtype=complex), p0), env_dim),
                    2 * env_dim,
                ),
                Projector.trusted(
                    _kron_with_identity(np.kron(np.eye(2, dtype=complex), p1), env_dim),
                    2 * env_dim,
                ),
            ],
            ["ptr+", "ptr-"],
        ),
        "trivial": trivial_decomposition(dim),
    }
    families = {
        "w": family_on_grid(
            dynamics, [decompositions["spin-w"], decompositions["pointer"]], initial
        )
    }
    v_meta = []
    for label, direction in v_candidates:
        direction = _unit_direction(direction, f"candidate {label!r}")
        decompositions[f"spin-{label}"] = _embedded_spin_decomposition(
            direction, label, 2 * env_dim
        )
        families[label] = family_on_grid(
            dynamics, [decompositions[f"spin-{label}"], decompositions["pointer"]], initial
        )
        v_meta.append([label, [float(c) for c in direction]])

    return Scenario(
        name="stern-gerlach",
        dim=dim,
        t0=0.0,
        initial=initial,
        dynamics=dynamics,
        decompositions=decompositions,
        families=families,
        tolerances=tol,
        meta={
            "kind": "stern-gerlach",
            "w": [float(c) for c in w],
            "env_qubits": m,
            "init_direction": [float(c) for c in init],
            "v_candidates": v_meta,
        },
    )


def _unit_env_state(m: int) -> np.ndarray:
    state = np.array([1.0], dtype=complex)
    for _ in range(m):
        state = tensor_state(state, _KET0)
    return state


@dataclass(frozen=True)
class FrameworkSelectionRow:
    label: str
    consistent: bool
    witness: float
    probabilities: tuple[tuple[str, float], ...] | None


@dataclass(frozen=True)
class FrameworkSelectionReport:
    """Per-candidate consistency verdicts for alternative spin frameworks."""

    scenario_name: str
    rows: tuple[FrameworkSelectionRow, ...]


def measurement_framework_selection_report(
    scenario: Scenario,
    candidates: Sequence[tuple[str, Sequence[float]]],
    tol: float | None = None,
) -> FrameworkSelectionReport:
    """Consistency verdict and witness for each candidate measurement axis.

    Once the apparatus couples in the ``w`` basis, only the candidates
    aligned with +-w stay consistent; the report exposes each witness
    magnitude so the falloff with misalignment can be inspected directly.
    """
    if scenario.meta.get("kind") != "stern-gerlach":
        raise ValueError("framework selection report needs a stern-gerlach scenario")
    rest_dim = scenario.dim // 2
    rows = []
    if tol is None:
        tol = scenario.consistency_tol
    for label, direction in candidates:
        direction = _unit_direction(direction, f"candidate {label!r}")
        spin_dec = _embedded_spin_decomposition(direction, label, rest_dim)
        family = family_on_grid(
            scenario.dynamics,
            [spin_dec, scenario.decompositions["pointer"]],
            scenario.initial,
            scenario.t0,
        )
        d = decoherence_matrix(family, scenario.tolerances)
        report = is_consistent(d, tol)
        probs = tuple(probabilities(d, tol)) if report.consistent else None
        rows.append(
            FrameworkSelectionRow(
                label=label,
                consistent=report.consistent,
                witness=report.max_offdiag,
                probabilities=probs,
            )
        )
    return FrameworkSelectionReport(scenario_name=scenario.name, rows=tuple(rows))


def build_cat(
    env_qubits: int,
    coupling_angle: float,
    amplitudes: tuple[complex, complex] = (1 / math.sqrt(2), 1 / math.sqrt(2)),
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> Scenario:
    """Source qubit copied onto a cat qubit, monitored by ``env_qubits`` qubits.

    Each environment qubit rotates by ``coupling_angle`` about its x axis
    when the cat is in the "dead" branch, so the environment records the
    branch with per-qubit overlap cos(theta). Provides the always-consistent
    "cat" family ({live, dead} at the final time), the "superposition" family
    (projectors onto the live +- dead branch superpositions), and the
    "cat-then-superposition" refinement whose normalized off-diagonal between
    the live and dead histories equals |cos(theta)|^env_qubits.
    """
    if not 1 <= env_qubits <= ENV_QUBIT_CAP:
        raise DimensionCapExceeded(
            f"env_qubits must be between 1 and {ENV_QUBIT_CAP}, got {env_qubits}"
        )
    theta = float(coupling_angle)
    if not 0.0 < theta <= math.pi / 2:
        raise ValueError(f"coupling_angle must lie in (0, pi/2], got {theta}")
    a, b = complex(amplitudes[0]), complex(amplitudes[1])
    source = linalg.as_state([a, b], tol, name="source amplitudes")

    m = int(env_qubits)
    env_dim = 2**m
    dim = 4 * env_dim
    eye2 = np.eye(2, dtype=complex)
    p_live = np.array([[1, 0], [0, 0]], dtype=complex)  # cat |0> = live
    p_dead = np.array([[0, 0], [0, 1]], dtype=complex)

    copy_sc = np.kron(p_live, eye2) + np.kron(p_dead, PAULI_X)  # cat flips iff source is |1>
    u_copy = _kron_with_identity(copy_sc, env_dim)
    rot = np.array(
        [[math.cos(theta), -1j * math.sin(theta)], [-1j * math.sin(theta), math.cos(theta)]],
        dtype=complex,
    )  # exp(-i theta X)
    rot_env = _kron_all(*([rot] * m))
    # block diagonal over (source, cat): identity on the environment while the
    # cat is live, the collective rotation while it is dead
    u_monitor = np.zeros((dim, dim), dtype=complex)
    for s in range(2):
        base = 2 * s * env_dim
        live = slice(base, base + env_dim)
        dead = slice(base + env_dim, base + 2 * env_dim)
        np.fill_diagonal(u_monitor[live, live], 1.0)
        u_monitor[dead, dead] = rot_env
    dynamics = Dynamics.trusted([(1.0, u_copy), (1.0, u_monitor)])

    initial = DensityOperator.from_state(
        tensor_state(source, tensor_state(_KET0, _unit_env_state(m))), tol
    )

    live_sc = np.kron(_KET0, _KET0)  # source |0>, cat live
    dead_sc = np.kron(_KET1, _KET1)  # source |1>, cat dead
    branch_plus = (live_sc + dead_sc) / math.sqrt(2)
    branch_minus = (live_sc - dead_sc) / math.sqrt(2)
    proj_plus = np.outer(branch_plus, branch_plus.conj())
    proj_minus = np.outer(branch_minus, branch_minus.conj())
    proj_other = np.eye(4, dtype=complex) - proj_plus - proj_minus

    decompositions: dict[str, Decomposition] = {
        "cat": trusted_decomposition(
            [
                Projector.trusted(
                    _kron_with_identity(np.kron(eye2, p_live), env_dim), 2 * env_dim
                ),
                Projector.trusted(
                    _kron_with_identity(np.kron(eye2, p_dead), env_dim), 2 * env_dim
                ),
            ],
            ["live", "dead"],
        ),
        "superposition": trusted_decomposition(
            [
                Projector.trusted(_kron_with_identity(proj_plus, env_dim), env_dim),
                Projector.trusted(_kron_with_identity(proj_minus, env_dim), env_dim),
                Projector.trusted(_kron_with_identity(proj_other, env_dim), 2 * env_dim),
            ],
            ["live+dead", "live-dead", "other"],
        ),
        "trivial": trivial_decomposition(dim),
    }
    families = {
        "cat": family_on_grid(
            dynamics, [decompositions["trivial"], decompositions["cat"]], initial
        ),
        "superposition": family_on_grid(
            dynamics, [decompositions["trivial"], decompositions["superposition"]], initial
        ),
        "cat-then-superposition": family_on_grid(
            dynamics, [decompositions["cat"], decompositions["superposition"]], initial
        ),
    }
    return Scenario(
        name="cat",
        dim=dim,
        t0=0.0,
        initial=initial,
        dynamics=dynamics,
        decompositions=decompositions,
        families=families,
        tolerances=tol,
        meta={
            "kind": "cat",
            "env_qubits": m,
            "coupling_angle": theta,
            "amplitudes": [[a.real, a.imag], [b.real, b.imag]],
        },
    )


def cat_offdiagonal_suppression(scenario: Scenario) -> float:
    """Normalized coherence between the live and dead branch histories.

    Computed on the "cat-then-superposition" family as
    ``|D(live, dead)| / sqrt(D(live, live) D(dead, dead))`` over the history
    pair that shares the live+dead superposition event at the final time; the
    closed form is |cos(theta)|^env_qubits. Requires both branch weights to
    be nonzero.
    """
    if scenario.meta.get("kind") != "cat":
        raise ValueError("suppression is defined for cat scenarios")
    family = scenario.families["cat-then-superposition"]
    d = decoherence_matrix(family, scenario.tolerances)
    live = d.index_tuples.index((0, 0))
    dead = d.index_tuples.index((1, 0))
    diag = d.diagonal_weights()
    denominator = math.sqrt(max(diag[live], 0.0) * max(diag[dead], 0.0))
    if denominator <= scenario.tolerances.null:
        raise ValueError("a branch has zero weight; suppression is undefined")
    return float(abs(d.entries[live, dead]) / denominator)


def cat_suppression_curve(
    coupling_angle: float,
    env_qubits: int,
    amplitudes: tuple[complex, complex] = (1 / math.sqrt(2), 1 / math.sqrt(2)),
) -> list[tuple[int, float]]:
    """Suppression factor for 1..env_qubits environment qubits."""
    out = []
    for n in range(1, int(env_qubits) + 1):
        scenario = build_cat(n, coupling_angle, amplitudes)
        out.append((n, cat_offdiagonal_suppression(scenario)))
    return out
