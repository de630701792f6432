import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.integrate import quad
from scipy.linalg import expm

from polyfrag.eigen import (
    assemble_operator,
    dense_eigenpair,
    mean_size,
    principal_eigenpair,
    read_solution,
    solve_normalized,
    write_solution,
)
from polyfrag.errors import ConvergenceError, DomainError
from polyfrag.grid import SizeGrid, make_grid, uniform_grid
from polyfrag.model import FragmentationKernel

UNIFORM = FragmentationKernel.uniform()


def moment_closure_oracle():
    """For beta(x) = x and constant tau: d/dt (P, M) = [[0, 1], [1, 0]] (P, M)."""
    vals, vecs = np.linalg.eig(np.array([[0.0, 1.0], [1.0, 0.0]]))
    k = np.argmax(vals)
    return vals[k], vecs[1, k] / vecs[0, k]


# ---- grid ---------------------------------------------------------------

def test_make_grid_geometric():
    g = make_grid(1e-3, 1e3, 512)
    assert g.n == 512
    ratios = g.nodes[1:] / g.nodes[:-1]
    np.testing.assert_allclose(ratios, ratios[0], rtol=1e-12)
    assert g.x_min == pytest.approx(1e-3, rel=1e-15) and g.x_max == pytest.approx(1e3, rel=1e-15)


@pytest.mark.parametrize("factory", [make_grid, uniform_grid])
def test_grid_weights_integrate_constant(factory):
    g = factory(1e-3, 1e3, 512)
    assert g.integrate(np.ones(g.n)) == pytest.approx(g.x_max - g.x_min, rel=1e-10)
    assert np.all(g.weights > 0)


@pytest.mark.parametrize("args", [(1, 1, 64), (0, 1, 64), (2, 1, 64), (1e-3, 1, 16), (1e-3, 1, 40.5)])
def test_make_grid_rejects_bad_input(args):
    with pytest.raises(DomainError):
        make_grid(*args)


def test_size_grid_validation():
    with pytest.raises(DomainError):
        SizeGrid.from_nodes([0.0, 1.0, 2.0])
    with pytest.raises(DomainError):
        SizeGrid.from_nodes([1.0, 3.0, 2.0])


# ---- operator -----------------------------------------------------------

@pytest.fixture(scope="module")
def op512():
    return assemble_operator(make_grid(1e-4, 50, 512), UNIFORM, 1.0, 0.0)


def test_operator_is_linear_at_zero(op512):
    np.testing.assert_array_equal(op512.apply(np.zeros(op512.grid.n)), 0.0)


def test_operator_rejects_ill_posed_exponents():
    with pytest.raises(DomainError, match="gamma \\+ 1 - nu > 0"):
        assemble_operator(make_grid(1e-4, 50, 64), UNIFORM, 0.0, 1.0)


def test_fragmentation_conserves_mass(op512):
    u = np.exp(-op512.grid.nodes)
    assert op512.mass_balance_residual(u) <= 1e-3


@pytest.mark.parametrize("kernel", [FragmentationKernel.power_pair(2.0),
                                    FragmentationKernel.tabulated([0, 0.5, 1], [0.5, 1.5, 0.5])])
@pytest.mark.parametrize("gamma, nu", [(1.0, 0.0), (2.0, 0.5), (0.5, -0.5)])
def test_mass_conservation_other_kernels(kernel, gamma, nu):
    op = assemble_operator(make_grid(1e-4, 50, 512), kernel, gamma, nu)
    assert op.mass_balance_residual(np.exp(-op.grid.nodes)) <= 1e-3


def test_number_production(op512):
    # each split adds one polymer: int (gain - loss) u = int x^gamma u
    g = op512.grid
    u = np.exp(-g.nodes)
    produced = g.integrate(op512.fragmentation(u))
    expected = quad(lambda x: x * np.exp(-x), g.x_min, g.x_max, epsabs=1e-13)[0]
    assert produced == pytest.approx(expected, rel=1e-2)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, 64, elements=st.floats(0, 1e3)))
def test_gain_preserves_nonnegativity(u):
    op = assemble_operator(make_grid(1e-3, 20, 64), FragmentationKernel.power_pair(1.0), 1.0, 0.0)
    assert np.all(op.gain_term(u) >= 0)
    m = op.matrix
    off = m - np.diag(np.diag(m))
    assert np.all(off >= 0)
    shifted = m + op.positivity_shift * np.eye(op.grid.n)
    assert np.all(shifted @ u >= -1e-12 * max(1.0, np.max(u)))


def test_apply_is_deterministic(op512):
    u = np.random.default_rng(1).random(op512.grid.n)
    a = op512.apply(u)
    b = op512.apply(u.copy())
    assert a.tobytes() == b.tobytes()


def test_apply_matches_matrix(op512):
    u = np.random.default_rng(2).random(op512.grid.n)
    scaled = op512.with_coefficients(beta0=2.0, v_tau0=0.5, mu0=0.1)
    np.testing.assert_allclose(scaled.apply(u), scaled.matrix @ u, rtol=1e-12, atol=1e-9)


# ---- eigenpair ----------------------------------------------------------

def test_oracle_eigenvalue_and_mean_size(oracle_solution):
    r_exact, ratio = moment_closure_oracle()
    assert r_exact == pytest.approx(1.0) and ratio == pytest.approx(1.0)
    sol = oracle_solution
    assert abs(sol.eigenvalue - r_exact) <= 1e-2
    assert abs(sol.mean_size - ratio) <= 1e-2


@pytest.mark.parametrize("nu, x_min", [(-0.482, 1e-4), (0.0, 1e-4), (0.316, 1e-7)])
def test_density_vanishes_near_zero(nu, x_min):
    # U behaves like x**(1 - nu) near 0, so positive nu needs a smaller x_min
    sol = solve_normalized(1.0, nu, grid=make_grid(x_min, 50.0, 1024))
    assert sol.density[0] <= 1e-3 * sol.density.max()


def test_eigen_solution_invariants(oracle_solution):
    sol = oracle_solution
    assert np.all(sol.density >= 0)
    assert sol.grid.integrate(sol.density) == pytest.approx(1.0, abs=1e-10)
    assert sol.density[0] <= 1e-3 * sol.density.max()
    assert sol.residual <= 10 * 1e-10


def test_constant_fragmentation_rate_gives_unit_eigenvalue():
    # gamma = 0: every polymer splits at rate 1 so P grows exactly like e^t
    sol = principal_eigenpair(assemble_operator(make_grid(1e-4, 50, 1024), UNIFORM, 0.0, 0.0))
    assert sol.eigenvalue == pytest.approx(1.0, abs=1e-3)


def test_gamma_two_matches_semigroup_log_slope():
    grid = make_grid(1e-3, 20, 256)
    op = assemble_operator(grid, UNIFORM, 2.0, 0.0)
    sol = principal_eigenpair(op)
    step = expm(0.5 * op.matrix)
    t = np.linspace(0, 20, 41)
    u = np.exp(-grid.nodes)
    number = [grid.integrate(u)]
    for _ in t[1:]:
        u = step @ u
        number.append(grid.integrate(u))
    number = np.array(number)
    slope = np.polyfit(t[20:], np.log(number[20:]), 1)[0]
    assert sol.eigenvalue == pytest.approx(slope, rel=1e-2)


@pytest.mark.parametrize("gamma, nu, kernel", [
    (1.0, 0.0, UNIFORM),
    (2.0, 0.0, FragmentationKernel.power_pair(2.0)),
    (1.0, -0.482, UNIFORM),
    (1.0, 0.316, FragmentationKernel.power_pair(0.5)),
])
def test_inverse_iteration_agrees_with_dense_solver(gamma, nu, kernel):
    op = assemble_operator(make_grid(1e-3, 30, 256), kernel, gamma, nu)
    a = principal_eigenpair(op)
    b = dense_eigenpair(op)
    assert a.eigenvalue == pytest.approx(b.eigenvalue, rel=1e-9)
    assert op.grid.integrate(np.abs(a.density - b.density)) <= 1e-6


def test_shifted_power_iteration_agrees_on_coarse_grid():
    op = assemble_operator(uniform_grid(0.2, 12.8, 64), UNIFORM, 1.0, 0.0)
    a = principal_eigenpair(op, method="power", tol=1e-11, max_iter=100_000)
    b = principal_eigenpair(op)
    assert a.method == "power"
    assert a.eigenvalue == pytest.approx(b.eigenvalue, rel=1e-8)


def test_non_convergence_carries_last_iterate():
    op = assemble_operator(uniform_grid(0.2, 12.8, 64), UNIFORM, 1.0, 0.0)
    with pytest.raises(ConvergenceError) as info:
        principal_eigenpair(op, method="power", tol=1e-10, max_iter=3)
    assert info.value.density is not None and info.value.residual is not None


@pytest.mark.parametrize("tol", [0.0, 0.1])
def test_rejects_bad_tolerance(op512, tol):
    with pytest.raises(DomainError):
        principal_eigenpair(op512, tol=tol)


@pytest.mark.slow
def test_grid_refinement_is_first_order():
    values = []
    for n in (256, 512, 1024):
        op = assemble_operator(make_grid(1e-4, 50, n), UNIFORM, 1.0, 0.0)
        values.append(principal_eigenpair(op).eigenvalue)
    d1, d2 = abs(values[1] - values[0]), abs(values[2] - values[1])
    assert d2 < d1
    assert np.log2(d1 / d2) >= 0.8


@pytest.mark.slow
def test_truncation_insensitivity(oracle_solution):
    # same geometric ratio, twice the domain
    n = 1024
    q = (50 / 1e-4) ** (1 / (n - 1))
    extra = int(round(np.log(2) / np.log(q)))
    grid = make_grid(1e-4, 50 * q**extra, n + extra)
    sol = principal_eigenpair(assemble_operator(grid, UNIFORM, 1.0, 0.0))
    assert abs(sol.eigenvalue - oracle_solution.eigenvalue) <= 1e-3 * oracle_solution.eigenvalue


# ---- mean size ----------------------------------------------------------

def test_mean_size_uniform_density():
    g = uniform_grid(1e-9, 2.0, 2001)
    density = np.full(g.n, 1.0 / (g.x_max - g.x_min))
    assert mean_size(g, density) == pytest.approx(1.0, rel=1e-6)


def test_mean_size_point_mass():
    g = uniform_grid(0.01, 10, 1000)
    i = 400
    density = np.zeros(g.n)
    density[i] = 1.0 / g.weights[i]
    assert mean_size(g, density) == pytest.approx(g.nodes[i])


def test_mean_size_rejects_unnormalized():
    g = uniform_grid(0.01, 10, 100)
    with pytest.raises(DomainError):
        mean_size(g, np.ones(g.n))


def test_oracle_mean_size(oracle_solution):
    assert mean_size(oracle_solution.grid, oracle_solution.density) == pytest.approx(1.0, abs=1e-2)


def test_solution_table_round_trip(tmp_path, oracle_solution):
    path = tmp_path / "u1.tsv"
    write_solution(oracle_solution, path)
    back = read_solution(path)
    assert back.eigenvalue == oracle_solution.eigenvalue
    assert back.mean_size == oracle_solution.mean_size
    np.testing.assert_array_equal(back.density, oracle_solution.density)
    np.testing.assert_array_equal(back.nodes, oracle_solution.nodes)
    assert path.read_text().startswith("# eigenvalue:")
