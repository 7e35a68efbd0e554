import pytest

from oracles import SQUARE_INT_U, SQUARE_MAX_U, poisson_square_series


def test_frozen_series_values():
    umax, uint = poisson_square_series(4000)
    assert umax == pytest.approx(SQUARE_MAX_U, abs=1e-9)
    assert uint == pytest.approx(SQUARE_INT_U, abs=1e-9)


def test_series_converged():
    a = poisson_square_series(2000)
    b = poisson_square_series(4000)
    assert abs(a[0] - b[0]) < 1e-7
    assert abs(a[1] - b[1]) < 1e-10
