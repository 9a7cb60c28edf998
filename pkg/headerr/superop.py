"""
Superoperators acting on row-major vectorized density matrices.

With ``vec(rho) = rho.reshape(-1)`` the identities used throughout are
``vec(A rho B) = kron(A, B.T) vec(rho)`` and ``Tr(A rho) = vec(A.T) . vec(rho)``.
"""

from dataclasses import dataclass

import numpy as np

from .spin_algebra import BasisError, LabeledOperator


def vec(rho):
    return np.asarray(rho, dtype=complex).reshape(-1)


def unvec(v, d=None):
    v = np.asarray(v)
    if d is None:
        d = int(round(np.sqrt(v.size)))
    return v.reshape(d, d)


def _matrix(op):
    return op.matrix if isinstance(op, LabeledOperator) else np.asarray(op)


def spre(a):
    "rho -> A rho"
    a = _matrix(a)
    return np.kron(a, np.eye(a.shape[0]))


def spost(b):
    "rho -> rho B"
    b = _matrix(b)
    return np.kron(np.eye(b.shape[0]), b.T)


def sandwich(a, b):
    "rho -> A rho B"
    return np.kron(_matrix(a), _matrix(b).T)


def commutator_matrix(h):
    "rho -> -i[H, rho]"
    return -1j * (spre(h) - spost(h))


def lindblad_matrix(c, rate=1.0):
    r"rho -> rate (2 C rho C^\dagger - {rho, C^\dagger C})"
    c = _matrix(c)
    cdc = c.conj().T @ c
    return rate * (2.0 * np.kron(c, c.conj()) - spre(cdc) - spost(cdc))


def expectation_row(op):
    "Row vector r with r . vec(rho) = Tr(A rho)."
    return _matrix(op).T.reshape(-1).astype(complex)


@dataclass(frozen=True, eq=False)
class Superoperator:
    """
    Dense generator on the superspace of a :class:`HyperfineBasis`.

    `sector` follows :class:`LabeledOperator`: ``"full"`` acts on
    (4(2I+1))^2-dimensional vectors, ``"ground"`` on (2(2I+1))^2.
    """

    basis: object
    matrix: np.ndarray
    sector: str = "full"

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        d = self.dim
        if m.shape != (d * d, d * d):
            raise BasisError(
                "superoperator shape %s does not match %s dimension %d"
                % (m.shape, self.sector, d)
            )

    @property
    def dim(self):
        "Operator-space dimension d."
        return self.basis.dim if self.sector == "full" else self.basis.ground_dim

    def _check(self, other):
        if other.basis != self.basis or other.sector != self.sector:
            raise BasisError("superoperators live on different bases or sectors")

    def __add__(self, other):
        self._check(other)
        return Superoperator(self.basis, self.matrix + other.matrix, self.sector)

    def __sub__(self, other):
        self._check(other)
        return Superoperator(self.basis, self.matrix - other.matrix, self.sector)

    def __neg__(self):
        return Superoperator(self.basis, -self.matrix, self.sector)

    def __mul__(self, c):
        return Superoperator(self.basis, c * self.matrix, self.sector)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, Superoperator):
            self._check(other)
            return Superoperator(self.basis, self.matrix @ other.matrix, self.sector)
        return self.matrix @ np.asarray(other)

    def apply(self, rho):
        "Action on a density matrix, returned as a matrix."
        return unvec(self.matrix @ vec(rho), self.dim)

    def trace_vector(self):
        return vec(np.eye(self.dim))

    def trace_residual(self):
        "max |Tr(L rho)| over basis elements, relative to the largest entry."
        scale = max(np.max(np.abs(self.matrix), initial=0.0), 1e-300)
        return np.max(np.abs(self.trace_vector() @ self.matrix), initial=0.0) / scale

    def conjugated(self, v):
        "Generator of rho -> V L(V^-1 rho V^-1 ^dagger) V^dagger for unitary V."
        v = np.asarray(v)
        w = np.kron(v, v.conj())
        w_inv = np.kron(v.conj().T, v.T)
        return Superoperator(self.basis, w @ self.matrix @ w_inv, self.sector)

    def eigenvalues(self):
        return np.linalg.eigvals(self.matrix)


def zero_superop(basis, sector="full"):
    d = basis.dim if sector == "full" else basis.ground_dim
    return Superoperator(basis, np.zeros((d * d, d * d)), sector)


def commutator_superop(h):
    """
    Coherent generator -i[H, .] of a :class:`LabeledOperator`.

    Args:
        h (:class:`LabeledOperator`): Hamiltonian, rad/s

    Returns:
        :class:`Superoperator` : generator on the same sector
    """
    return Superoperator(h.basis, commutator_matrix(h.matrix), h.sector)


def lindblad_superop(jumps, rate):
    """
    Sum of Lindblad terms rate (2 C rho C^dagger - {rho, C^dagger C}).

    Args:
        jumps (list of :class:`LabeledOperator`): jump operators on one sector
        rate (float): common rate, 1/s

    Returns:
        :class:`Superoperator` : dissipator
    """
    first = jumps[0]
    total = sum(lindblad_matrix(c.matrix, rate) for c in jumps)
    return Superoperator(first.basis, total, first.sector)
