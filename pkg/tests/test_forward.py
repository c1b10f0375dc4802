import math

import numpy as np
import pytest

from fincond.forward import (
    FaceData,
    FinSolver,
    PhysicalParams,
    assemble_system,
    boundary_of_solution,
    contact_mask,
    solve_forward,
    solve_system,
)
from fincond.grid import ConductivityField, constant_field, extract_boundary, make_mesh


@pytest.fixture
def mesh10():
    return make_mesh(10, 10, 4.0, 4.0)


@pytest.fixture
def phys():
    return PhysicalParams()


class TestPhysicalParams:
    def test_defaults(self, phys):
        assert phys.H > 0 and phys.delta > 0 and phys.q >= 0

    @pytest.mark.parametrize(
        "kwargs", [{"H": 0.0}, {"delta": -1.0}, {"q": -0.1}, {"contact_fraction": 0.0}]
    )
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ValueError):
            PhysicalParams(**kwargs)

    def test_contact_segment_nonempty(self, mesh10, phys):
        assert contact_mask(mesh10, phys).sum() >= 1

    def test_contact_is_bottom_half_of_left_edge(self, mesh10, phys):
        mask = contact_mask(mesh10, phys)
        assert not mask[:, 1:].any()
        y = mesh10.y_coords()
        np.testing.assert_array_equal(mask[:, 0], y <= mesh10.Ly / 2 + 1e-12 * mesh10.Ly)


class TestAssembleSystem:
    def test_dimension_and_bandwidth(self, mesh10, phys):
        system = assemble_system(constant_field(mesh10, 1.0), mesh10, phys)
        assert system.dimension == 100
        assert system.bandwidth == 10

    def test_zero_flux_zero_rhs(self, mesh10):
        phys = PhysicalParams(q=0.0)
        system = assemble_system(constant_field(mesh10, 1.0), mesh10, phys)
        assert np.all(system.rhs == 0.0)

    def test_rhs_zero_off_contact(self, mesh10, phys):
        system = assemble_system(constant_field(mesh10, 2.0), mesh10, phys)
        contact = contact_mask(mesh10, phys).ravel()
        assert np.all(system.rhs[~contact] == 0.0)
        assert np.all(system.rhs[contact] != 0.0)

    def test_strict_diagonal_dominance(self, mesh10, phys):
        # oracle: check every row of the dense matrix directly
        system = assemble_system(constant_field(mesh10, 1.68), mesh10, phys)
        A = system.to_dense()
        diag = np.abs(np.diag(A))
        off = np.abs(A).sum(axis=1) - diag
        assert np.all(diag > off)

    def test_rejects_conductivity_at_floor(self, mesh10, phys):
        values = np.ones((10, 10))
        values[3, 3] = 1e-7
        K = ConductivityField.unchecked(mesh10, values)
        with pytest.raises(ValueError, match="floor"):
            assemble_system(K, mesh10, phys)

    def test_assembly_is_pure(self, mesh10, phys):
        K = constant_field(mesh10, 1.3)
        s1 = assemble_system(K, mesh10, phys)
        s2 = assemble_system(K, mesh10, phys)
        assert np.array_equal(s1.ab, s2.ab) and np.array_equal(s1.rhs, s2.rhs)

    def test_node_index_map(self, mesh10, phys):
        system = assemble_system(constant_field(mesh10, 1.0), mesh10, phys)
        assert system.node_index(1, 1) == 0
        assert system.node_index(10, 1) == 9
        assert system.node_index(1, 2) == 10
        assert system.node_index(10, 10) == 99


class TestSolveForward:
    def test_zero_flux_zero_solution(self, mesh10):
        phys = PhysicalParams(q=0.0)
        u = solve_forward(constant_field(mesh10, 1.68), mesh10, phys)
        assert np.abs(u.values).max() <= 1e-10

    def test_residual_bound(self, mesh10, phys):
        K = constant_field(mesh10, 1.68)
        u = solve_forward(K, mesh10, phys)
        system = assemble_system(K, mesh10, phys)
        resid = np.abs(system.matvec(u.values.ravel()) - system.rhs).max()
        assert resid <= 1e-10 * (1 + np.abs(system.rhs).max())

    def test_deterministic(self, mesh10, phys):
        K = constant_field(mesh10, 1.3)
        u1 = solve_forward(K, mesh10, phys)
        u2 = solve_forward(K, mesh10, phys)
        assert np.array_equal(u1.values, u2.values)

    def test_midline_symmetry_with_full_contact(self, mesh10):
        # full left edge contact + K symmetric about the horizontal midline
        phys = PhysicalParams(contact_fraction=1.0)
        rng = np.random.default_rng(3)
        half = np.exp(rng.normal(size=(5, 10)) * 0.1)
        values = np.vstack([half, half[::-1]])
        u = solve_forward(ConductivityField(mesh10, values), mesh10, phys).values
        assert np.abs(u - u[::-1, :]).max() <= 1e-8

    def test_nonnegative_temperatures(self, mesh10, phys):
        K = constant_field(mesh10, 1.68)
        u = solve_forward(K, mesh10, phys)
        assert u.values.min() >= -1e-8

    def test_linearity_in_flux(self, mesh10):
        K = constant_field(mesh10, 1.5)
        u1 = solve_forward(K, mesh10, PhysicalParams(q=0.1)).values
        u2 = solve_forward(K, mesh10, PhysicalParams(q=0.3)).values
        u3 = solve_forward(K, mesh10, PhysicalParams(q=0.4)).values
        np.testing.assert_allclose(u1 + u2, u3, rtol=1e-10, atol=1e-12)


class TestBoundaryOfSolution:
    def test_matches_composition(self, mesh10, phys):
        K = constant_field(mesh10, 1.68)
        direct = boundary_of_solution(K, mesh10, phys)
        composed = extract_boundary(solve_forward(K, mesh10, phys))
        assert np.array_equal(direct.values, composed.values)

    def test_zero_flux_zero_trace(self, mesh10):
        trace = boundary_of_solution(
            constant_field(mesh10, 1.0), mesh10, PhysicalParams(q=0.0)
        )
        assert np.abs(trace.values).max() <= 1e-12

    def test_doubling_flux_doubles_trace(self, mesh10):
        K = constant_field(mesh10, 1.68)
        t1 = boundary_of_solution(K, mesh10, PhysicalParams(q=5.0)).values
        t2 = boundary_of_solution(K, mesh10, PhysicalParams(q=10.0)).values
        np.testing.assert_allclose(2 * t1, t2, rtol=1e-12)


class TestFinSolver:
    def test_matches_module_function(self, mesh10, phys):
        K = constant_field(mesh10, 1.2)
        solver = FinSolver(mesh10, phys)
        u = solver.solve_flat(K.values.ravel())
        np.testing.assert_array_equal(
            u.reshape(10, 10), solve_forward(K, mesh10, phys).values
        )

    def test_workspace_reuse_is_clean(self, mesh10, phys):
        # back-to-back solves with different K must not contaminate each other
        solver = FinSolver(mesh10, phys)
        Ka = np.full(100, 1.2)
        Kb = np.full(100, 2.4)
        ua = solver.solve_flat(Ka).copy()
        solver.solve_flat(Kb)
        np.testing.assert_array_equal(solver.solve_flat(Ka), ua)


def _mms_error(nodes: int) -> tuple[float, float]:
    """Max-norm error and spacing for the manufactured solution.

    Oracle: substitute u* = cos(pi x / Lx) cos(pi y / Ly) into the PDE
    and Robin conditions analytically, feed the resulting volume source
    and boundary forcing to the assembler, and compare the solve to u*.
    """
    mesh = make_mesh(nodes, nodes, 4.0, 4.0)
    phys = PhysicalParams()
    Kc = 1.3
    K = constant_field(mesh, Kc)
    a, b = math.pi / mesh.Lx, math.pi / mesh.Ly
    x, y = mesh.x_coords(), mesh.y_coords()
    exact = np.cos(a * x)[None, :] * np.cos(b * y)[:, None]

    reaction = 2 * phys.H / (Kc * phys.delta)
    source = (-(a * a + b * b) - reaction) * exact
    n, m = mesh.n, mesh.m
    h_x = np.zeros((n, m))
    h_y = np.zeros((n, m))
    r_x = np.zeros((n, m))
    r_y = np.zeros((n, m))
    h_x[:, 0] = h_x[:, m - 1] = phys.H
    h_y[0, :] = h_y[n - 1, :] = phys.H
    # r = K du*/dn_out + H u* per face; du*/dn_out vanishes for this u*
    r_x[:, 0] = Kc * a * math.sin(0.0) * np.cos(b * y) + phys.H * exact[:, 0]
    r_x[:, m - 1] = -Kc * a * math.sin(a * mesh.Lx) * np.cos(b * y) + phys.H * exact[:, m - 1]
    r_y[0, :] = Kc * b * math.sin(0.0) * np.cos(a * x) + phys.H * exact[0, :]
    r_y[n - 1, :] = -Kc * b * math.sin(b * mesh.Ly) * np.cos(a * x) + phys.H * exact[n - 1, :]
    face = FaceData(h_x.ravel(), h_y.ravel(), r_x.ravel(), r_y.ravel())

    system = assemble_system(K, mesh, phys, volume_source=source.ravel(), face_data=face)
    u = solve_system(system)
    return float(np.abs(u - exact.ravel()).max()), mesh.dx


def test_manufactured_solution_second_order():
    errors = dict((nodes, _mms_error(nodes)) for nodes in (10, 20, 40))
    (e1, h1), (e2, h2), (e3, h3) = errors[10], errors[20], errors[40]
    p12 = math.log(e1 / e2) / math.log(h1 / h2)
    p23 = math.log(e2 / e3) / math.log(h2 / h3)
    assert p12 >= 1.8
    assert p23 >= 1.8
