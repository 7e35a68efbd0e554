import numpy as np
import pytest

from robustshape.grid import RectDomain, build_mesh
from robustshape.radial import (
    RadialProblem,
    ball_radius,
    encode_shape,
    radial_energy,
    radial_state,
    standard_candidates,
    symmetrization_check,
)


def test_unit_disc_closed_form():
    assert radial_energy(RadialProblem(R=1.0, nr=1000)) == pytest.approx(-np.pi / 16, rel=1e-4)


def test_state_profile():
    r, u, _, _ = radial_state(RadialProblem(R=1.0, nr=400))
    assert u == pytest.approx((1 - r**2) / 4, abs=1e-5)


@pytest.mark.parametrize("m", [0.3, 1.0])
def test_measure_formula(m):
    R = ball_radius(m)
    assert np.pi * R * R == pytest.approx(m)
    assert radial_energy(RadialProblem(R=R)) == pytest.approx(-m * m / (16 * np.pi), rel=1e-4)


def test_delta_raises_energy():
    assert radial_energy(RadialProblem(delta=0.25)) > -np.pi / 16


def test_second_order_convergence():
    errs = [abs(radial_energy(RadialProblem(nr=n)) + np.pi / 16) for n in (20, 40, 80, 160)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 2) < 0.2)


def test_three_dimensional_ball():
    # -Δu = 1 on the unit ball in R^3: u = (1 - r^2)/6, E = -1/2 int u = -2π/45
    assert radial_energy(RadialProblem(d=3)) == pytest.approx(-2 * np.pi / 45, rel=1e-4)


def test_rejects_increasing_profile():
    with pytest.raises(ValueError):
        RadialProblem(f_r=lambda r: r)


def test_candidate_areas():
    for ind in standard_candidates(0.3).values():
        mesh = build_mesh(RectDomain(-1, -1, 1, 1), 400, 400)
        V = encode_shape(mesh, ind, 1.0, erosion=0.0)
        # nodal sampling area, one cell per node
        assert (V == 0).sum() * mesh.hx * mesh.hy == pytest.approx(0.3, rel=0.03)


@pytest.mark.parametrize("delta", [0.0, 0.25])
def test_ball_wins(delta):
    rows = symmetrization_check(0.3, delta=delta, nx=100)
    assert all(r.passes for r in rows)
    disc = next(r for r in rows if r.name == "disc")
    others = [r.energy for r in rows if r.name != "disc"]
    assert disc.energy < min(others)


def test_radial_source_profile():
    f_r = lambda r: np.maximum(1.5 - r, 0.0)  # noqa: E731
    rows = symmetrization_check(0.3, f_r=f_r, delta=0.1, nx=100)
    assert all(r.passes for r in rows)
