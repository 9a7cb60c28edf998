import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis.strategies import data

from headerr import (
    BasisError,
    LabeledOperator,
    angular_momentum,
    build_basis,
    clebsch_gordan,
    dipole_jump_operators,
    get_species,
    recoupling_matrix,
    rotation_operator,
    spin_operators,
)

from .strategies import assert_close, assert_close_array, species_names, twice_spins


def commutator(a, b):
    return a @ b - b @ a


@given(data())
@settings(max_examples=20)
@pytest.mark.spin_algebra
def test_basis_layout(data):
    "Ground states come first, a before b, m ascending."
    species = get_species(data.draw(species_names))
    basis = build_basis(species)
    n = species.manifold_dim
    assert basis.dim == 2 * n
    assert basis.ground_dim == n
    assert all(label.sector == "S" for label in basis.ground_labels)
    a = basis.indices("S", "a")
    b = basis.indices("S", "b")
    assert len(a) == species.twice_a + 1
    assert len(b) == species.twice_b + 1
    assert a.max() < b.min()
    assert list(basis.twice_m()[a]) == sorted(basis.twice_m()[a])
    for i, label in enumerate(basis.labels):
        assert basis.index(label.sector, label.manifold, label.m) == i


@pytest.mark.spin_algebra
def test_missing_state():
    basis = build_basis(get_species("Rb87"))
    with pytest.raises(BasisError):
        basis.index("S", "b", 2)


@given(twice_spins)
@pytest.mark.spin_algebra
def test_angular_momentum_algebra(twice_j):
    "[j_x, j_y] = i j_z and j^2 = j(j+1)."
    jx, jy, jz, jp, jm = angular_momentum(twice_j)
    j = twice_j / 2
    assert_close_array(commutator(jx, jy), 1j * jz)
    assert_close_array(jx @ jx + jy @ jy + jz @ jz, j * (j + 1) * np.eye(twice_j + 1))
    assert_close_array(jp, jx + 1j * jy)


@pytest.mark.spin_algebra
def test_clebsch_gordan_values():
    assert_close(clebsch_gordan(1, 1, 1, -1, 2, 0), 1 / np.sqrt(2))
    assert_close(clebsch_gordan(1, 1, 1, -1, 0, 0), 1 / np.sqrt(2))
    assert clebsch_gordan(1, 1, 1, 1, 2, 0) == 0.0


@given(twice_spins)
@pytest.mark.spin_algebra
def test_recoupling_orthogonal(twice_I):
    u = recoupling_matrix(twice_I)
    assert_close_array(u.T @ u, np.eye(u.shape[0]))


@given(data())
@settings(max_examples=10)
@pytest.mark.spin_algebra
def test_coupled_operators(data):
    "F_z is diagonal in the coupled basis and F^2 = F(F+1) on each manifold."
    basis = build_basis(get_species(data.draw(species_names)))
    ops = spin_operators(basis)
    m = np.array([label.m for label in basis.labels])
    assert_close_array(ops.F_z.matrix, np.diag(m))
    f2 = ops.F_x.matrix @ ops.F_x.matrix + ops.F_y.matrix @ ops.F_y.matrix
    f2 = f2 + ops.F_z.matrix @ ops.F_z.matrix
    expected = [label.F * (label.F + 1) for label in basis.labels]
    assert_close_array(f2, np.diag(expected), abs_tol=1e-10)
    s2 = sum(s.matrix @ s.matrix for s in ops.S_vector)
    assert_close_array(s2, 0.75 * np.eye(basis.dim), abs_tol=1e-10)
    assert_close_array(commutator(ops.S_x.matrix, ops.S_y.matrix), 1j * ops.S_z.matrix)


@pytest.mark.spin_algebra
def test_dipole_completeness():
    "sum_j A_j^dagger A_j = 2 on the P sector, 0 on S."
    basis = build_basis(get_species("Rb85"))
    total = sum(a.matrix.conj().T @ a.matrix for a in dipole_jump_operators(basis).channels())
    n = basis.ground_dim
    expected = np.diag(np.r_[np.zeros(n), 2 * np.ones(n)])
    assert_close_array(total, expected, abs_tol=1e-12)


@pytest.mark.spin_algebra
def test_labeled_operator_checks():
    basis = build_basis(get_species("Rb87"))
    with pytest.raises(BasisError):
        LabeledOperator(basis, np.triu(np.ones((basis.dim, basis.dim))), hermitian=True)
    with pytest.raises(BasisError):
        LabeledOperator(basis, np.eye(3))
    op = spin_operators(basis).S_z
    assert op.ground().embed().matrix[: basis.ground_dim, : basis.ground_dim].trace() == 0
    other = spin_operators(build_basis(get_species("Rb85"))).S_z
    with pytest.raises(BasisError):
        op + other


@given(data())
@settings(max_examples=10)
@pytest.mark.spin_algebra
def test_rotation_unitary(data):
    basis = build_basis(get_species("Rb87"))
    angle = data.draw(twice_spins) * 0.3
    u = rotation_operator(basis, "y", angle)
    assert_close_array(u @ u.conj().T, np.eye(basis.dim), abs_tol=1e-10)


@given(data())
@settings(max_examples=10)
@pytest.mark.spin_algebra
def test_dipole_operators_match_product_basis(data):
    "A_+ = S_-, A_- = S_+, A_0+- = 1/2 +- S_z as S <- P blocks."
    basis = build_basis(get_species(data.draw(species_names)))
    n = basis.ground_dim
    ops = spin_operators(basis)
    dip = dipole_jump_operators(basis)
    half = 0.5 * np.eye(n)
    expected = {
        "A_plus": ops.ground("S_minus"),
        "A_minus": ops.ground("S_plus"),
        "A0_plus": half + ops.ground("S_z"),
        "A0_minus": half - ops.ground("S_z"),
    }
    for name, block in expected.items():
        matrix = getattr(dip, name).matrix
        assert_close_array(matrix[:n, n:], block, abs_tol=1e-12)
        assert np.all(matrix[n:, :] == 0) and np.all(matrix[:n, :n] == 0)


@pytest.mark.spin_algebra
def test_dipole_matrix_elements():
    "<S F m| A_+ |P F' m+1> from the Clebsch-Gordan expansion over m_I."
    basis = build_basis(get_species("Rb85"))
    twice_I = basis.species.twice_I
    a_plus = dipole_jump_operators(basis).A_plus.matrix
    n = basis.ground_dim
    for i, lower in enumerate(basis.ground_labels):
        for j, upper in enumerate(basis.ground_labels):
            expected = sum(
                clebsch_gordan(1, -1, twice_I, twice_mI, lower.twice_F, lower.twice_m)
                * clebsch_gordan(1, 1, twice_I, twice_mI, upper.twice_F, upper.twice_m)
                for twice_mI in range(-twice_I, twice_I + 1, 2)
            )
            assert_close(np.real(a_plus[i, n + j]), expected, abs_tol=1e-12)


@given(data())
@settings(max_examples=10)
@pytest.mark.spin_algebra
def test_pi_rotation_reverses_m(data):
    "exp(-i pi F_y) sends |F m> to a phase times |F -m> in the same sector."
    basis = build_basis(get_species(data.draw(species_names)))
    u = rotation_operator(basis, "y", np.pi)
    for j, label in enumerate(basis.labels):
        target = basis.index(label.sector, label.manifold, -label.m)
        column = np.abs(u[:, j])
        assert_close(column[target], 1.0, abs_tol=1e-10)
        assert np.sum(column ** 2) - column[target] ** 2 < 1e-12
