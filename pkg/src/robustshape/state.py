"""State solvers for the potential-relaxed Dirichlet problem.

The worst-case state solves ``-Δu + V u = f - Φ(u)`` in ``H^1_0(D)`` where
``Φ(u) = δ sign(u) |u|^(p'-1) / ||u||_{p'}^(p'-1)`` is minus the worst source
perturbation. It is computed by freezing ``Φ`` at the previous iterate.
"""
from dataclasses import dataclass, replace

import numpy as np

from . import fem
from .errors import DegenerateState
from .grid import StructuredMesh


def conjugate_exponent(p: float) -> float:
    if not (1.0 < p < np.inf):
        raise ValueError(f"p must lie in (1, inf), got {p}")
    return p / (p - 1.0)


@dataclass(frozen=True)
class StateConfig:
    fixed_point_tol: float = 1e-8
    fixed_point_max_iter: int = 200
    linear_tol: float = 1e-12
    zero_norm_guard: float | None = None  # default 1e-12 * sqrt(|D|)
    relaxation: float = 1.0

    def __post_init__(self):
        if self.fixed_point_tol <= 0 or self.linear_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.fixed_point_max_iter < 1:
            raise ValueError("fixed_point_max_iter must be at least 1")
        if self.zero_norm_guard is not None and self.zero_norm_guard <= 0:
            raise ValueError("zero_norm_guard must be positive")
        if not (0.0 < self.relaxation <= 1.0):
            raise ValueError("relaxation must lie in (0, 1]")

    def guard(self, mesh: StructuredMesh) -> float:
        if self.zero_norm_guard is not None:
            return self.zero_norm_guard
        return 1e-12 * np.sqrt(mesh.domain.area)

    def with_(self, **kw) -> "StateConfig":
        return replace(self, **kw)


@dataclass
class StateSolution:
    u: np.ndarray
    iterations: int
    converged: bool
    residual: float


def solve_linear_state(mesh, V, rhs, tol=1e-12, x0=None) -> np.ndarray:
    """Solve ``(A + diag(w V)) u = W rhs`` with ``u = 0`` on the boundary."""
    V = fem.check_field(mesh, V, "potential")
    if np.any(V < 0):
        raise ValueError("potential must be nonnegative")
    K = fem.potential_operator(mesh, V)
    b = np.where(mesh.boundary_mask, 0.0, fem.assemble_load(mesh, rhs))
    return fem.cg_solve(K, b, tol=tol, x0=x0)


def nonlinear_rhs_term(mesh, u, delta, p, guard=None) -> np.ndarray:
    """Return ``Φ(u)``; the zero field when ``δ = 0`` or ``||u||_{p'} < guard``."""
    q = conjugate_exponent(p)
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    u = fem.check_field(mesh, u, "state")
    if guard is None:
        guard = StateConfig().guard(mesh)
    if delta == 0:
        return np.zeros_like(u)
    norm = fem.lp_norm(mesh, u, q)
    if norm < guard:
        return np.zeros_like(u)
    return delta * np.sign(u) * (np.abs(u) / norm) ** (q - 1.0)


def worst_perturbation(mesh, u, delta, p, guard=None) -> np.ndarray:
    """Maximising source perturbation ``g`` with ``||g||_p = δ`` for the state ``u``."""
    q = conjugate_exponent(p)
    if guard is None:
        guard = StateConfig().guard(mesh)
    if fem.lp_norm(mesh, u, q) <= guard:
        raise DegenerateState("state norm below the zero-norm guard, perturbation undefined")
    return -nonlinear_rhs_term(mesh, u, delta, p, guard=0.0)


def state_residual(mesh, V, f, u, delta, p, guard=None) -> float:
    """Relative L2 residual of the discrete worst-case state equation."""
    K = fem.potential_operator(mesh, V)
    load = fem.assemble_load(mesh, f)
    rhs = fem.assemble_load(mesh, f - nonlinear_rhs_term(mesh, u, delta, p, guard))
    res = np.where(mesh.boundary_mask, 0.0, K @ u - rhs)
    scale = np.linalg.norm(np.where(mesh.boundary_mask, 0.0, load))
    return float(np.linalg.norm(res) / scale) if scale > 0 else float(np.linalg.norm(res))


def solve_worstcase_state(mesh, V, f, delta, p=2.0, cfg: StateConfig | None = None, u0=None):
    """Fixed-point iteration for the worst-case state.

    Starts from the ``δ = 0`` solution unless a warm start ``u0`` is given.
    A non-converged run is returned with ``converged=False``.
    """
    cfg = cfg or StateConfig()
    conjugate_exponent(p)
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    f = fem.check_field(mesh, f, "source")
    V = fem.check_field(mesh, V, "potential")
    if np.any(V < 0):
        raise ValueError("potential must be nonnegative")
    guard = cfg.guard(mesh)
    K = fem.potential_operator(mesh, V)
    interior = ~mesh.boundary_mask
    w = fem.lumped_weights(mesh)

    def solve(rhs, x0):
        return fem.cg_solve(K, np.where(interior, w * rhs, 0.0), tol=cfg.linear_tol, x0=x0)

    u = solve(f, u0)
    if delta == 0:
        return StateSolution(u, 1, True, 0.0)
    if not np.any(f[interior]):
        return StateSolution(np.zeros_like(u), 1, True, 0.0)

    q = conjugate_exponent(p)
    if u0 is None and fem.lp_norm(mesh, u, q) < guard:
        raise DegenerateState("unperturbed state vanishes although the source does not")
    theta = cfg.relaxation
    change = np.inf
    for k in range(1, cfg.fixed_point_max_iter + 1):
        phi = nonlinear_rhs_term(mesh, u, delta, p, guard)
        u_new = solve(f - phi, u)
        if theta < 1.0:
            u_new = (1.0 - theta) * u + theta * u_new
        ref = max(fem.lp_norm(mesh, u, 2.0), guard)
        change = fem.lp_norm(mesh, u_new - u, 2.0) / ref
        u = u_new
        if fem.lp_norm(mesh, u, q) < guard:
            raise DegenerateState("state collapsed to zero during the fixed-point iteration")
        if change <= cfg.fixed_point_tol:
            return StateSolution(u, k, True, float(change))
    return StateSolution(u, cfg.fixed_point_max_iter, False, float(change))
