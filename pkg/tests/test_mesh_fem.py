import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from tdglobal import fem, mesh as M


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_embedding_round_trip(a, b):
    s1, s3 = a, b * (1 - a)
    x, y = M.to_xy(s1, s3)
    back = M.from_xy(x, y)
    assert np.allclose(back, (s1, s3), atol=1e-14)


def test_gradient_maps_are_inverse():
    g = M.grad_xy_to_s(*M.grad_s_to_xy(0.3, -1.7))
    assert np.allclose(g, (0.3, -1.7))


def test_lattice_counts():
    assert M.lattice_size(4) == 15
    s1, s3 = M.lattice_saturations(4)
    assert len(s1) == 15 and np.all(s1 + s3 <= 1 + 1e-15)
    on_boundary = sum(1 for tags in M.boundary_classification(4) if tags)
    assert on_boundary == 12


def test_mesh_area():
    mesh = M.make_mesh(6)
    assert mesh.element_areas().sum() == pytest.approx(np.sqrt(3) / 4)
    assert len(mesh.elements) == 36


def test_p2_basis_partition_of_unity():
    xi, eta = 0.2, 0.3
    assert np.sum(M.p2_basis(xi, eta)) == pytest.approx(1.0)
    assert np.allclose(np.sum(M.p2_grad_ref(xi, eta), axis=0), 0.0)


def _laplace(n):
    mesh = M.make_mesh(n)
    fld = fem.solve_laplace(mesh, lambda e, t: oracles.harmonic(*oracles.edge_s(e, t)))
    return fem.l2_error(fld, oracles.harmonic)


def test_laplace_second_order():
    errs = [_laplace(n) for n in (4, 8, 16)]
    orders = fem.observed_orders([1 / 4, 1 / 8, 1 / 16], errs)
    assert np.all(orders > 1.9)


def test_laplace_reproduces_linear_data():
    mesh = M.make_mesh(5)
    exact = lambda s1, s3: 2.0 * s1 - 3.0 * s3 + 1.0  # noqa: E731
    fld = fem.solve_laplace(mesh, lambda e, t: exact(*oracles.edge_s(e, t)))
    assert fem.l2_error(fld, exact) < 1e-12


def _biharm(n, exact, normal, dirichlet=None):
    mesh = M.make_mesh(n)
    dirichlet = dirichlet or (lambda e, t: exact(*oracles.edge_s(e, t)))
    fld = fem.solve_biharmonic(mesh, dirichlet, normal)
    return fem.l2_error(fld, exact), fld


def test_biharmonic_reproduces_lin_closed_form():
    err, fld = _biharm(8, oracles.lin_closed_form, oracles.lin_normal)
    assert err < 1e-9 * 1e4
    g1, g3 = fld.gradient(np.array([0.3]), np.array([0.2]))
    assert g1[0] == pytest.approx(1e4 * 0.3, rel=1e-8)
    assert g3[0] == pytest.approx(2e4 * 0.2, rel=1e-8)


def test_biharmonic_cubic_converges():
    errs = [_biharm(n, oracles.cubic, oracles.cubic_normal)[0] for n in (4, 8, 16)]
    assert errs[0] > errs[1] > errs[2]
    assert np.all(fem.observed_orders([1 / 4, 1 / 8, 1 / 16], errs) > 1.5)


def test_solution_minimises_discrete_energy():
    mesh = M.make_mesh(4)
    _, fld = _biharm(4, oracles.cubic, oracles.cubic_normal)
    e0 = fem.discrete_energy(mesh, fld, oracles.cubic_normal)
    free = np.array([not tags for tags in M.boundary_classification(8)])
    rng = np.random.default_rng(0)
    for _ in range(5):
        v = fld.values.copy()
        v[free] += 1e-3 * rng.standard_normal(free.sum())
        assert fem.discrete_energy(mesh, fem.NodalField(mesh, v, order=2), oracles.cubic_normal) > e0


def test_reduced_systems_are_symmetric():
    for kind in ("laplace", "biharmonic"):
        A = fem.reduced_system(M.make_mesh(4), kind)
        A = A.toarray() if hasattr(A, "toarray") else np.asarray(A)
        assert np.allclose(A, A.T, atol=1e-10 * np.abs(A).max())
        assert np.min(np.linalg.eigvalsh(A)) > 0
