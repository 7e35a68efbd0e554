"""Shape functionals evaluated on potential-encoded domains.

A generalized domain is a nodal potential ``V >= 0``: ``V = 0`` is material,
large ``V`` is void. Sign conventions:

* ``dirichlet_energy``  ``E = min J = -1/2 int f u``
* ``worstcase_energy``  ``E_δ = min J + δ ||u||_{p'}`` (sup of ``E`` over ``||g||_p <= δ``)
* ``compliance_objective``   ``F = -int f u + δ ||u||_2``, equal to ``2 E_δ`` at the state
* ``linear_worstcase``  ``-int f w + δ ||w||_{p'}`` with ``-Δw + V w = h``
"""
from dataclasses import dataclass, field

import numpy as np

from . import fem
from .errors import NonConvergence
from .state import (
    StateConfig,
    conjugate_exponent,
    solve_linear_state,
    solve_worstcase_state,
)


@dataclass
class FunctionalValue:
    value: float
    quadratic: float
    potential: float
    linear: float
    norm: float
    state: np.ndarray | None = field(default=None, repr=False)

    def reassembled(self) -> float:
        return self.quadratic + self.potential - self.linear + self.norm


def energy_breakdown(mesh, V, f, u, delta=0.0, p=2.0) -> FunctionalValue:
    """Evaluate ``J(V, u, f) + δ ||u||_{p'}`` term by term at a given ``u``."""
    w = fem.lumped_weights(mesh)
    u = np.where(mesh.boundary_mask, 0.0, u)
    quad = 0.5 * fem.dirichlet_integral(mesh, u)
    pot = 0.5 * float(np.sum(w * V * u * u))
    lin = fem.integrate_product(mesh, f, u)
    nrm = delta * fem.lp_norm(mesh, u, conjugate_exponent(p)) if delta else 0.0
    return FunctionalValue(quad + pot - lin + nrm, quad, pot, lin, nrm, u)


def dirichlet_energy(mesh, V, f, tol=1e-12) -> float:
    u = solve_linear_state(mesh, V, f, tol=tol)
    return -0.5 * fem.integrate_product(mesh, f, u)


def _converged_state(mesh, V, f, delta, p, cfg, u0=None):
    sol = solve_worstcase_state(mesh, V, f, delta, p, cfg, u0=u0)
    if not sol.converged:
        raise NonConvergence(
            f"worst-case state did not converge in {sol.iterations} iterations",
            sol.residual,
            sol.iterations,
        )
    return sol


def worstcase_energy(mesh, V, f, delta, p=2.0, cfg: StateConfig | None = None) -> FunctionalValue:
    """Worst-case Dirichlet energy of the potential ``V``.

    For ``delta = 0`` the value is returned as ``-1/2 int f u`` so that it
    coincides with :func:`dirichlet_energy`; the breakdown is still filled in.
    """
    f = fem.check_field(mesh, f, "source")
    V = fem.check_field(mesh, V, "potential")
    sol = _converged_state(mesh, V, f, delta, p, cfg)
    out = energy_breakdown(mesh, V, f, sol.u, delta, p)
    if delta == 0:
        out.value = -0.5 * out.linear
    return out


def objective_and_state(mesh, V, f, delta, cfg=None, u0=None):
    """``(F, state)`` with ``F = -int f u + δ ||u||_2``."""
    sol = _converged_state(mesh, V, f, delta, 2.0, cfg, u0=u0)
    value = -fem.integrate_product(mesh, f, sol.u)
    if delta:
        value += delta * fem.lp_norm(mesh, sol.u, 2.0)
    return value, sol


def compliance_objective(mesh, V, f, delta, cfg: StateConfig | None = None) -> float:
    f = fem.check_field(mesh, f, "source")
    V = fem.check_field(mesh, V, "potential")
    return objective_and_state(mesh, V, f, delta, cfg)[0]


def linear_worstcase(mesh, V, f, h, delta, p=2.0, tol=1e-12) -> float:
    """Worst case of ``-int h u_{f+g}`` over ``||g||_p <= δ``; one linear solve."""
    q = conjugate_exponent(p)
    w = solve_linear_state(mesh, V, h, tol=tol)
    return -fem.integrate_product(mesh, f, w) + delta * fem.lp_norm(mesh, w, q)


def tracking_response(mesh, V, h, source, tol=1e-12) -> float:
    """``-int h u`` where ``u`` solves the linear state with the given source."""
    u = solve_linear_state(mesh, V, source, tol=tol)
    return -fem.integrate_product(mesh, h, u)


def torsion_state(mesh, V, tol=1e-12) -> np.ndarray:
    return solve_linear_state(mesh, V, np.ones(mesh.n_nodes), tol=tol)


def gamma_distance(mesh, V1, V2, tol=1e-12) -> float:
    """L1 distance between the torsion states of two potentials."""
    w1 = torsion_state(mesh, V1, tol)
    w2 = torsion_state(mesh, V2, tol)
    return fem.lp_norm(mesh, w1 - w2, 1.0)


def random_perturbations(mesh, n, delta, p, rng=None, scale_to=None):
    """Yield ``n`` standard-normal nodal fields rescaled to ``||g||_p = δ``.

    ``scale_to`` may be a callable returning a target norm in ``[0, δ]`` for
    sampling the interior of the ball.
    """
    rng = np.random.default_rng(rng)
    for _ in range(n):
        g = rng.standard_normal(mesh.n_nodes)
        target = delta if scale_to is None else scale_to(rng)
        yield g * (target / fem.lp_norm(mesh, g, p))
