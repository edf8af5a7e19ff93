"""Dense complex operator algebra on finite Hilbert spaces.

Operators are plain square ``numpy`` arrays of ``complex128``; state vectors
are 1-D arrays. Everything returned by this module is marked read-only so
values can be shared freely across threads. Violation magnitudes are always
measured in the entrywise max-abs norm.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import DimensionCapExceeded

DIM_CAP_ENV = "QHIST_DIM_CAP"
DEFAULT_DIM_CAP = 4096


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances used by validators throughout the package.

    The defaults sit comfortably above double-precision accumulation error
    for dimensions up to the default cap of 4096.
    """

    norm: float = 1e-10      # state / density normalization
    herm: float = 1e-10      # hermiticity
    orth: float = 1e-10      # orthogonality and completeness of decompositions
    proj: float = 1e-10      # projector idempotency
    unitary: float = 1e-10   # U^dag U = I
    psd: float = 1e-9        # floor on eigenvalues of positive operators
    comm: float = 1e-10      # commutator norms for compatibility checks
    null: float = 1e-12      # cutoff below which an outcome weight is null

    def merged(self, overrides: dict[str, float]) -> "Tolerances":
        """Return a copy with the given fields replaced."""
        unknown = set(overrides) - set(self.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown tolerance fields: {sorted(unknown)}")
        return replace(self, **{k: float(v) for k, v in overrides.items()})


DEFAULT_TOLERANCES = Tolerances()


def dim_cap() -> int:
    """Configured Hilbert-space dimension cap (env ``QHIST_DIM_CAP`` wins)."""
    raw = os.environ.get(DIM_CAP_ENV)
    if raw is None:
        return DEFAULT_DIM_CAP
    try:
        cap = int(raw)
    except ValueError as exc:
        raise ValueError(f"{DIM_CAP_ENV} must be an integer, got {raw!r}") from exc
    if cap <= 0:
        raise ValueError(f"{DIM_CAP_ENV} must be positive, got {cap}")
    return cap


def max_abs(a: np.ndarray) -> float:
    """Entrywise max-abs norm, the violation measure used everywhere."""
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a)))


def frozen(a: np.ndarray) -> np.ndarray:
    """Return a read-only C-contiguous copy of ``a``."""
    out = np.ascontiguousarray(a).copy()
    out.setflags(write=False)
    return out


def freeze_owned(a: np.ndarray) -> np.ndarray:
    """Mark a freshly constructed array read-only without copying.

    Only for arrays the caller just built and owns outright; unlike
    :func:`frozen` the input itself is made immutable. Avoids redundant
    copies of large tensor-product operators.
    """
    out = np.ascontiguousarray(a, dtype=complex)
    out.setflags(write=False)
    return out


def as_operator(m, name: str = "operator") -> np.ndarray:
    """Coerce ``m`` to a validated square complex matrix (read-only copy)."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {a.shape}")
    if a.shape[0] == 0:
        raise ValueError(f"{name} must have positive dimension")
    if not np.all(np.isfinite(a.view(float))):
        raise ValueError(f"{name} contains non-finite entries")
    return frozen(a)


def as_state(v, tol: Tolerances = DEFAULT_TOLERANCES, name: str = "state") -> np.ndarray:
    """Coerce ``v`` to a validated unit vector (read-only copy)."""
    a = np.asarray(v, dtype=complex).reshape(-1)
    if a.size == 0:
        raise ValueError(f"{name} must have positive dimension")
    if not np.all(np.isfinite(a.view(float))):
        raise ValueError(f"{name} contains non-finite entries")
    nrm = float(np.linalg.norm(a))
    if abs(nrm - 1.0) > tol.norm:
        raise ValueError(f"{name}: norm violation, |v| = {nrm!r} is not 1 within {tol.norm}")
    return frozen(a)


def adjoint(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return a.conj().T


def tensor(a: np.ndarray, b: np.ndarray, cap: int | None = None) -> np.ndarray:
    """Kronecker product of two operators, guarded by the dimension cap.

    Raises ``DimensionCapExceeded`` when ``a.dim * b.dim`` overflows the cap,
    which signals that a scenario is too large for dense evaluation.
    """
    if cap is None:
        cap = dim_cap()
    out_dim = a.shape[0] * b.shape[0]
    if out_dim > cap:
        raise DimensionCapExceeded(
            f"tensor product dimension {out_dim} exceeds cap {cap}"
        )
    return np.kron(a, b)


def tensor_state(a: np.ndarray, b: np.ndarray, cap: int | None = None) -> np.ndarray:
    """Kronecker product of two state vectors, guarded by the dimension cap."""
    if cap is None:
        cap = dim_cap()
    out_dim = a.shape[0] * b.shape[0]
    if out_dim > cap:
        raise DimensionCapExceeded(
            f"tensor product dimension {out_dim} exceeds cap {cap}"
        )
    return np.kron(a, b)


def expansion_coefficients(
    state: np.ndarray,
    basis: Sequence[np.ndarray],
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> np.ndarray:
    """Coefficients of ``state`` in an orthonormal basis.

    Returns ``c_k = <basis_k|state>``; by Parseval the squared magnitudes sum
    to 1 for a unit input. The basis must be orthonormal within ``tol.orth``
    and span the space (length equal to the dimension).
    """
    dim = state.shape[0]
    if len(basis) != dim:
        raise ValueError(f"basis length {len(basis)} does not match dimension {dim}")
    mat = np.asarray(basis, dtype=complex)
    gram = mat.conj() @ mat.T
    worst = max_abs(gram - np.eye(dim))
    if worst > tol.orth:
        raise ValueError(f"non-orthonormal basis: max Gram deviation {worst:.3e}")
    return mat.conj() @ state


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of checking an operator against a defining algebraic identity.

    ``violations`` maps each identity name to its max-abs violation;
    ``thresholds`` holds the tolerance each violation was compared against.
    """

    kind: str
    violations: dict[str, float]
    thresholds: dict[str, float]

    @property
    def passed(self) -> bool:
        return all(self.violations[k] <= self.thresholds[k] for k in self.violations)

    @property
    def worst(self) -> tuple[str, float]:
        name = max(self.violations, key=lambda k: self.violations[k])
        return name, self.violations[name]

    def __str__(self) -> str:
        status = "pass" if self.passed else "fail"
        details = ", ".join(f"{k}={v:.3e}" for k, v in self.violations.items())
        return f"{self.kind}: {status} ({details})"


def hermiticity_violation(a: np.ndarray) -> float:
    return max_abs(a - adjoint(a))


def min_eigenvalue(a: np.ndarray) -> float:
    """Smallest eigenvalue of a (numerically) Hermitian operator."""
    return float(np.linalg.eigvalsh(a)[0])


def validate(op: np.ndarray, kind: str, tol: Tolerances = DEFAULT_TOLERANCES) -> ValidationReport:
    """Check ``op`` against the defining identity of ``kind``.

    ``kind`` is one of ``hermitian``, ``unitary``, ``projector``, ``density``.
    Report-only: never raises on violation.
    """
    a = np.asarray(op, dtype=complex)
    dim = a.shape[0]
    eye = np.eye(dim)
    if kind == "hermitian":
        violations = {"hermiticity": hermiticity_violation(a)}
        thresholds = {"hermiticity": tol.herm}
    elif kind == "unitary":
        violations = {"unitarity": max_abs(adjoint(a) @ a - eye)}
        thresholds = {"unitarity": tol.unitary}
    elif kind == "projector":
        violations = {
            "hermiticity": hermiticity_violation(a),
            "idempotency": max_abs(a @ a - a),
        }
        thresholds = {"hermiticity": tol.proj, "idempotency": tol.proj}
    elif kind == "density":
        herm = hermiticity_violation(a)
        # eigvalsh needs a Hermitian input; symmetrize only for the PSD probe
        sym = (a + adjoint(a)) / 2.0
        violations = {
            "hermiticity": herm,
            "positivity": max(0.0, -min_eigenvalue(sym)),
            "unit-trace": abs(complex(np.trace(a)) - 1.0),
        }
        thresholds = {"hermiticity": tol.herm, "positivity": tol.psd, "unit-trace": tol.norm}
    else:
        raise ValueError(f"unknown operator kind {kind!r}")
    return ValidationReport(kind=kind, violations=violations, thresholds=thresholds)


class DensityOperator:
    """Initial condition of a family: Hermitian, positive, trace one.

    Pure states should be built with :meth:`from_state`, which keeps the
    underlying vector; downstream code then evaluates decoherence functionals
    by propagating vectors instead of full matrices, which is what makes
    large tensor-product models affordable.
    """

    __slots__ = ("_matrix", "_vector", "dim")

    def __init__(self, matrix: np.ndarray | None, vector: np.ndarray | None):
        if matrix is None and vector is None:
            raise ValueError("density operator needs a matrix or a vector")
        self._matrix = matrix
        self._vector = vector
        self.dim = int(vector.shape[0] if matrix is None else matrix.shape[0])

    @classmethod
    def from_state(cls, v, tol: Tolerances = DEFAULT_TOLERANCES) -> "DensityOperator":
        """Pure density |v><v| from a unit vector; validates the norm only."""
        vec = as_state(v, tol, name="initial state")
        return cls(None, vec)

    @classmethod
    def from_matrix(cls, m, tol: Tolerances = DEFAULT_TOLERANCES) -> "DensityOperator":
        """General density matrix; validates hermiticity, positivity, trace."""
        mat = as_operator(m, name="density matrix")
        report = validate(mat, "density", tol)
        if not report.passed:
            name, value = report.worst
            raise ValueError(f"density matrix: {name} violation {value:.3e}")
        return cls(mat, None)

    @property
    def vector(self) -> np.ndarray | None:
        """Underlying state vector when the density is known pure, else None."""
        return self._vector

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = freeze_owned(np.outer(self._vector, self._vector.conj()))
        return self._matrix

    def eigen_mixture(self) -> tuple[np.ndarray, np.ndarray]:
        """Decompose into weighted orthonormal pure states.

        Returns ``(weights, vectors)`` with vectors as rows; weights are
        clipped at zero and components below 1e-14 are dropped.
        """
        if self._vector is not None:
            return np.array([1.0]), self._vector[None, :]
        w, v = np.linalg.eigh(self._matrix)
        keep = w > 1e-14
        return np.clip(w[keep], 0.0, None), v[:, keep].T.copy()

    def is_pure(self) -> bool:
        if self._vector is not None:
            return True
        return abs(float(np.trace(self.matrix @ self.matrix).real) - 1.0) < 1e-9

    def __repr__(self) -> str:
        tag = "pure" if self._vector is not None else "mixed"
        return f"DensityOperator(dim={self.dim}, {tag})"


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Random Hermitian matrix with Gaussian entries."""
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (a + adjoint(a)) / 2.0


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Random unitary built by exponentiating a random Hermitian generator."""
    return evolution_unitary(random_hermitian(dim, rng), 1.0)


def random_orthonormal_basis(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Rows are an orthonormal basis drawn from a random unitary."""
    return random_unitary(dim, rng).T.copy()


def random_density(dim: int, rng: np.random.Generator, pure: bool = False) -> DensityOperator:
    """Random density operator (pure or full-rank mixed)."""
    if pure:
        v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        return DensityOperator.from_state(v / np.linalg.norm(v))
    w = rng.random(dim)
    w /= w.sum()
    basis = random_orthonormal_basis(dim, rng)
    rho = (basis.T * w) @ basis.conj()
    rho = (rho + adjoint(rho)) / 2.0
    return DensityOperator.from_matrix(rho)


def evolution_unitary(generator: np.ndarray, duration: float) -> np.ndarray:
    """Propagator ``exp(-i H t)`` of a Hermitian generator, via eigendecomposition."""
    h = np.asarray(generator, dtype=complex)
    herm = hermiticity_violation(h)
    if herm > 1e-9:
        raise ValueError(f"generator is not Hermitian (violation {herm:.3e})")
    w, v = np.linalg.eigh((h + adjoint(h)) / 2.0)
    phases = np.exp(-1j * w * duration)
    return (v * phases) @ adjoint(v)
