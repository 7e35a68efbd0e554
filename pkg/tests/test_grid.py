import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustshape.grid import RectDomain, build_mesh, interpolate, piecewise_x, unit_square_mesh


@pytest.mark.parametrize("n, nodes, tris, bnd", [(1, 4, 2, 4), (2, 9, 8, 8), (50, 2601, 5000, 200)])
def test_counts(n, nodes, tris, bnd):
    mesh = unit_square_mesh(n)
    assert mesh.n_nodes == nodes
    assert mesh.n_triangles == tris
    assert mesh.boundary_mask.sum() == bnd


def test_partition_of_unit_square():
    mesh = unit_square_mesh(50)
    areas = mesh.triangle_areas()
    assert np.all(areas > 0)
    assert areas.sum() == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(
    nx=st.integers(1, 12),
    ny=st.integers(1, 12),
    x0=st.floats(-5, 5),
    y0=st.floats(-5, 5),
    w=st.floats(0.1, 10),
    h=st.floats(0.1, 10),
)
def test_mesh_invariants(nx, ny, x0, y0, w, h):
    dom = RectDomain(x0, y0, x0 + w, y0 + h)
    mesh = build_mesh(dom, nx, ny)
    assert mesh.n_nodes == (nx + 1) * (ny + 1)
    assert mesh.n_triangles == 2 * nx * ny
    assert mesh.boundary_mask.sum() == 2 * (nx + ny)
    areas = mesh.triangle_areas()
    assert np.all(areas > 0)
    assert areas.sum() == pytest.approx(dom.area, rel=1e-12)
    i, j = 3 % (nx + 1), 2 % (ny + 1)
    k = mesh.node_index(i, j)
    assert mesh.nodes[k] == pytest.approx([x0 + i * w / nx, y0 + j * h / ny])


def test_incidence_counts():
    mesh = unit_square_mesh(4)
    count = np.bincount(mesh.triangles.ravel(), minlength=mesh.n_nodes)
    grid = mesh.as_grid(count)
    assert np.all(grid[1:-1, 1:-1] == 6)
    # lower-left and upper-right corners sit on a cell diagonal
    assert grid[0, 0] == 2 and grid[-1, -1] == 2
    assert grid[0, -1] == 1 and grid[-1, 0] == 1


def test_deterministic():
    a = unit_square_mesh(7)
    b = unit_square_mesh(7)
    assert np.array_equal(a.nodes, b.nodes)
    assert np.array_equal(a.triangles, b.triangles)
    assert a.nodes.tobytes() == b.nodes.tobytes()


def test_immutable():
    mesh = unit_square_mesh(2)
    with pytest.raises(ValueError):
        mesh.nodes[0, 0] = 1.0


@pytest.mark.parametrize("nx, ny", [(0, 1), (1, 0), (-2, 3)])
def test_rejects_bad_counts(nx, ny):
    with pytest.raises(ValueError):
        build_mesh(RectDomain(), nx, ny)


def test_rejects_degenerate_domain():
    with pytest.raises(ValueError):
        RectDomain(0, 0, 0, 1)
    with pytest.raises(ValueError):
        RectDomain(0, 1, 1, 1)


def test_interpolate_constant():
    mesh = unit_square_mesh(5)
    assert np.all(interpolate(mesh, 1.0) == 1.0)


def test_interpolate_linear():
    mesh = unit_square_mesh(2)
    g = mesh.as_grid(interpolate(mesh, lambda x, y: x))
    for row in g:
        assert list(row) == [0.0, 0.5, 1.0]


def test_interpolate_piecewise_source():
    mesh = unit_square_mesh(50)
    f = interpolate(mesh, piecewise_x(1.0, 2.0, 0.5))
    assert np.all(f[mesh.x <= 0.5] == 1.0)
    assert np.all(f[mesh.x > 0.5] == 2.0)
    # the column x = 0.5 is a grid line and takes the left value
    on_line = np.isclose(mesh.x, 0.5)
    assert on_line.sum() == 51
    assert np.all(f[on_line] == 1.0)
