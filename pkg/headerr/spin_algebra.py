"""
Coupled hyperfine basis, angular-momentum operators and D1 dipole jump
operators.

Quantum numbers are carried as doubled integers (2F, 2m) so that half-integer
labels never pass through floating point.
"""

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import NamedTuple, Tuple

import numpy as np
from scipy.linalg import block_diag, expm
from sympy import Rational
from sympy.physics.quantum.cg import CG

from .species import AlkaliSpecies

HERMITIAN_TOL = 1e-12
SECTORS = ("S", "P")
MANIFOLDS = ("a", "b")


class BasisError(RuntimeError):
    "Exception raised for basis bookkeeping errors."
    pass


class BasisLabel(NamedTuple):
    sector: str
    manifold: str
    twice_F: int
    twice_m: int

    @property
    def F(self):
        return self.twice_F / 2

    @property
    def m(self):
        return self.twice_m / 2


@dataclass(frozen=True)
class HyperfineBasis:
    """
    Ordered |F m> states of the S (ground) and P (excited) sectors.

    Ordering: sector S then P; within a sector F=a then F=b; m ascending.
    Ground states therefore occupy the first :attr:`ground_dim` rows.
    """

    species: AlkaliSpecies
    labels: Tuple[BasisLabel, ...]

    @property
    def dim(self):
        return len(self.labels)

    @property
    def ground_dim(self):
        return self.dim // 2

    @cached_property
    def _positions(self):
        return {label: i for i, label in enumerate(self.labels)}

    def index(self, sector, manifold, m):
        """
        Row of the state |F m> in `sector`.

        Args:
            sector (str): ``"S"`` or ``"P"``
            manifold (str): ``"a"`` or ``"b"``
            m (float): magnetic quantum number

        Returns:
            int : row index

        Raises:
            BasisError: no such state
        """
        twice_F = self.species.twice_a if manifold == "a" else self.species.twice_b
        label = BasisLabel(sector, manifold, twice_F, int(round(2 * m)))
        if label not in self._positions:
            raise BasisError("no state %s in basis" % (label,))
        return self._positions[label]

    def indices(self, sector=None, manifold=None):
        "Rows matching the given sector and/or manifold, in basis order."
        return np.array(
            [
                i
                for i, label in enumerate(self.labels)
                if (sector is None or label.sector == sector)
                and (manifold is None or label.manifold == manifold)
            ],
            dtype=np.int64,
        )

    @property
    def ground_labels(self):
        return self.labels[: self.ground_dim]

    def twice_m(self, sector="S"):
        "Doubled m values of one sector, in basis order."
        return np.array([lab.twice_m for lab in self.labels if lab.sector == sector])


def build_basis(species):
    """
    Enumerate the hyperfine states of both sectors.

    Args:
        species (:class:`AlkaliSpecies`): atom

    Returns:
        :class:`HyperfineBasis` : basis of dimension 4(2I+1)
    """
    labels = []
    for sector in SECTORS:
        for manifold, twice_F in (("a", species.twice_a), ("b", species.twice_b)):
            for twice_m in range(-twice_F, twice_F + 1, 2):
                labels.append(BasisLabel(sector, manifold, twice_F, twice_m))
    return HyperfineBasis(species, tuple(labels))


@dataclass(frozen=True, eq=False)
class LabeledOperator:
    """
    Dense operator on a :class:`HyperfineBasis`.

    `sector` is ``"full"`` for operators on both sectors and ``"ground"`` for
    operators restricted to the S sector.
    """

    basis: HyperfineBasis
    matrix: np.ndarray
    sector: str = "full"
    hermitian: bool = False

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        expected = self.basis.dim if self.sector == "full" else self.basis.ground_dim
        if m.shape != (expected, expected):
            raise BasisError(
                "operator shape %s does not match %s dimension %d"
                % (m.shape, self.sector, expected)
            )
        if self.hermitian:
            residual = np.max(np.abs(m - m.conj().T), initial=0.0)
            if residual >= HERMITIAN_TOL * max(1.0, np.max(np.abs(m), initial=0.0)):
                raise BasisError("operator flagged Hermitian has residual %g" % residual)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def dag(self):
        return LabeledOperator(self.basis, self.matrix.conj().T, self.sector, self.hermitian)

    def _check(self, other):
        if other.basis != self.basis or other.sector != self.sector:
            raise BasisError("operators live on different bases or sectors")

    def __add__(self, other):
        self._check(other)
        return LabeledOperator(
            self.basis,
            self.matrix + other.matrix,
            self.sector,
            self.hermitian and other.hermitian,
        )

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, c):
        real = np.isreal(c)
        return LabeledOperator(self.basis, c * self.matrix, self.sector, self.hermitian and real)

    __rmul__ = __mul__

    def __matmul__(self, other):
        self._check(other)
        return LabeledOperator(self.basis, self.matrix @ other.matrix, self.sector)

    def ground(self):
        "Restriction to the S sector."
        if self.sector == "ground":
            return self
        n = self.basis.ground_dim
        return LabeledOperator(self.basis, self.matrix[:n, :n], "ground", self.hermitian)

    def embed(self):
        "Extension of a ground operator to the full space, zero on P."
        if self.sector == "full":
            return self
        n = self.basis.ground_dim
        m = np.zeros((self.basis.dim, self.basis.dim), dtype=complex)
        m[:n, :n] = self.matrix
        return LabeledOperator(self.basis, m, "full", self.hermitian)

    def expectation(self, rho):
        "Tr(A rho) for a density matrix of matching dimension."
        return np.trace(self.matrix @ np.asarray(rho))


def zero_operator(basis, sector="full"):
    n = basis.dim if sector == "full" else basis.ground_dim
    return LabeledOperator(basis, np.zeros((n, n)), sector, True)


@lru_cache(maxsize=None)
def angular_momentum(twice_j):
    """
    Spin-j matrices in the |j m> basis with m ascending.

    Args:
        twice_j (int): 2j

    Returns:
        tuple : (j_x, j_y, j_z, j_+, j_-) as numpy arrays
    """
    ms = np.arange(-twice_j, twice_j + 1, 2) / 2.0
    j = twice_j / 2.0
    jp = np.zeros((len(ms), len(ms)), dtype=complex)
    for k in range(len(ms) - 1):
        jp[k + 1, k] = np.sqrt(j * (j + 1) - ms[k] * (ms[k] + 1))
    jm = jp.conj().T
    jx = 0.5 * (jp + jm)
    jy = -0.5j * (jp - jm)
    jz = np.diag(ms).astype(complex)
    return jx, jy, jz, jp, jm


@lru_cache(maxsize=None)
def clebsch_gordan(twice_j1, twice_m1, twice_j2, twice_m2, twice_J, twice_M):
    """
    Exact Clebsch-Gordan coefficient <j1 m1; j2 m2 | J M> (Condon-Shortley).

    Args:
        twice_j1 (int): 2 j1
        twice_m1 (int): 2 m1
        twice_j2 (int): 2 j2
        twice_m2 (int): 2 m2
        twice_J (int): 2 J
        twice_M (int): 2 M

    Returns:
        float : coefficient
    """
    if twice_m1 + twice_m2 != twice_M:
        return 0.0
    value = CG(
        Rational(twice_j1, 2),
        Rational(twice_m1, 2),
        Rational(twice_j2, 2),
        Rational(twice_m2, 2),
        Rational(twice_J, 2),
        Rational(twice_M, 2),
    ).doit()
    return float(value)


@lru_cache(maxsize=None)
def recoupling_matrix(twice_I):
    """
    Change of basis from |m_J, m_I> (J = 1/2 first, both m ascending) to the
    coupled |F m> states of one sector in basis order.

    Args:
        twice_I (int): 2I

    Returns:
        array : real orthogonal matrix, columns are coupled states
    """
    n_i = twice_I + 1
    twice_ms_I = range(-twice_I, twice_I + 1, 2)
    columns = []
    for twice_F in (twice_I + 1, twice_I - 1):
        for twice_m in range(-twice_F, twice_F + 1, 2):
            col = np.zeros(2 * n_i)
            for jj, twice_mJ in enumerate((-1, 1)):
                for ii, twice_mI in enumerate(twice_ms_I):
                    col[jj * n_i + ii] = clebsch_gordan(
                        1, twice_mJ, twice_I, twice_mI, twice_F, twice_m
                    )
            columns.append(col)
    return np.array(columns).T


def _sector_operator(basis, uncoupled):
    u = recoupling_matrix(basis.species.twice_I)
    return u.T @ uncoupled @ u


@dataclass(frozen=True, eq=False)
class SpinOperatorSet:
    """
    Electron (S), nuclear (I) and total (F) angular momentum on both sectors,
    plus the excited-state electronic angular momentum J^P (zero on S).
    """

    basis: HyperfineBasis
    S_x: LabeledOperator
    S_y: LabeledOperator
    S_z: LabeledOperator
    S_plus: LabeledOperator
    S_minus: LabeledOperator
    I_x: LabeledOperator
    I_y: LabeledOperator
    I_z: LabeledOperator
    F_x: LabeledOperator
    F_y: LabeledOperator
    F_z: LabeledOperator
    J_P: Tuple[LabeledOperator, LabeledOperator, LabeledOperator] = field(repr=False)

    def ground(self, name):
        "Ground-sector block of the named operator, as a numpy array."
        return getattr(self, name).ground().matrix

    @property
    def S_vector(self):
        return (self.S_x, self.S_y, self.S_z)


@lru_cache(maxsize=None)
def spin_operators(basis):
    """
    Angular-momentum operators in the coupled basis.

    Built in the product basis |m_J> x |m_I> of each sector and recoupled with
    :func:`recoupling_matrix`; every operator is block diagonal per sector.

    Args:
        basis (:class:`HyperfineBasis`): basis

    Returns:
        :class:`SpinOperatorSet` : operators
    """
    twice_I = basis.species.twice_I
    eye_j = np.eye(2)
    eye_i = np.eye(twice_I + 1)
    s_ops = angular_momentum(1)
    i_ops = angular_momentum(twice_I)

    def both(uncoupled, hermitian=True):
        block = _sector_operator(basis, uncoupled)
        return LabeledOperator(basis, block_diag(block, block), "full", hermitian)

    def excited(uncoupled):
        block = _sector_operator(basis, uncoupled)
        zero = np.zeros_like(block)
        return LabeledOperator(basis, block_diag(zero, block), "full", True)

    s = [np.kron(op, eye_i) for op in s_ops]
    i = [np.kron(eye_j, op) for op in i_ops]
    return SpinOperatorSet(
        basis=basis,
        S_x=both(s[0]),
        S_y=both(s[1]),
        S_z=both(s[2]),
        S_plus=both(s[3], False),
        S_minus=both(s[4], False),
        I_x=both(i[0]),
        I_y=both(i[1]),
        I_z=both(i[2]),
        F_x=both(s[0] + i[0]),
        F_y=both(s[1] + i[1]),
        F_z=both(s[2] + i[2]),
        J_P=(excited(s[0]), excited(s[1]), excited(s[2])),
    )


@dataclass(frozen=True, eq=False)
class DipoleSet:
    """
    Ground <- excited jump operators of the D1 line.

    A_0+ = |+>_S<+|_P and A_0- = |->_S<-|_P (pi channels),
    A_+ = |->_S<+|_P and A_- = |+>_S<-|_P (sigma channels), each tensored
    with the nuclear identity.
    """

    A0_plus: LabeledOperator
    A0_minus: LabeledOperator
    A_plus: LabeledOperator
    A_minus: LabeledOperator

    def channels(self):
        return (self.A0_plus, self.A0_minus, self.A_plus, self.A_minus)


@lru_cache(maxsize=None)
def dipole_jump_operators(basis):
    """
    Build the four jump operators in the coupled basis.

    Args:
        basis (:class:`HyperfineBasis`): basis

    Returns:
        :class:`DipoleSet` : jump operators
    """
    eye_i = np.eye(basis.species.twice_I + 1)
    n = basis.ground_dim

    def jump(row, col):
        # Fine states are ordered m_J = -1/2 (index 0), +1/2 (index 1).
        fine = np.zeros((2, 2))
        fine[row, col] = 1.0
        full = np.zeros((basis.dim, basis.dim), dtype=complex)
        full[:n, n:] = _sector_operator(basis, np.kron(fine, eye_i))
        return LabeledOperator(basis, full)

    return DipoleSet(
        A0_plus=jump(1, 1),
        A0_minus=jump(0, 0),
        A_plus=jump(0, 1),
        A_minus=jump(1, 0),
    )


def rotation_operator(basis, axis, angle):
    """
    exp(-i angle F_axis) on the full space.

    Args:
        basis (:class:`HyperfineBasis`): basis
        axis (str): ``"x"``, ``"y"`` or ``"z"``
        angle (float): rotation angle, rad

    Returns:
        array : unitary matrix
    """
    generator = getattr(spin_operators(basis), "F_" + axis).matrix
    return expm(-1j * angle * generator)


def excited_parity(basis):
    "Diagonal Z2 operator: +1 on the S sector, -1 on the P sector."
    n = basis.ground_dim
    return np.diag(np.r_[np.ones(n), -np.ones(basis.dim - n)]).astype(complex)
