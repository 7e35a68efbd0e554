"""Minimisation of the worst-case objective over bounded nodal potentials.

Problem::

    min_V  F(V) = -int f u + δ ||u||_2
    s.t.   int_D exp(-α V) <= m,   0 <= V <= M

where ``u`` is the worst-case state of ``V``. The gradient follows from the
envelope theorem (``F = 2 min_u J``): ``dF/dV_i = w_i u_i^2``.

Two update rules share the driver :func:`optimize`: a projected gradient
step and a single-constraint MMA step. Both pick the constraint multiplier by
bisection on the *exact* volume, so every iterate is feasible.
"""
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import fem
from .errors import NonConvergence, Stalled, StateNotConverged
from .functionals import objective_and_state
from .state import StateConfig, StateSolution

log = logging.getLogger(__name__)

OPTIMIZERS = ("mma", "pg")


@dataclass(frozen=True)
class OptimizationConfig:
    M: float = 1000.0
    alpha: float = 0.01
    m: float = 0.3
    optimizer: str = "mma"
    max_outer_iter: int = 400
    move_limit: float = 0.1  # fraction of [0, M]
    kkt_tol: float = 1e-4
    objective_tol: float = 1e-7
    patience: int = 10  # consecutive small objective changes before stopping
    asymptote_init: float = 0.5
    asymptote_shrink: float = 0.7
    asymptote_grow: float = 1.2

    def __post_init__(self):
        if self.M <= 0 or self.alpha <= 0 or self.m <= 0:
            raise ValueError("M, alpha and m must be positive")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if not (0 < self.move_limit <= 1):
            raise ValueError("move_limit must lie in (0, 1]")
        if self.max_outer_iter < 0:
            raise ValueError("max_outer_iter must be nonnegative")

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass
class OptimizationResult:
    V_opt: np.ndarray
    u_opt: np.ndarray
    objective_history: list = field(default_factory=list)
    constraint_history: list = field(default_factory=list)
    kkt_history: list = field(default_factory=list)
    state_iterations: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    reason: str = ""
    multiplier: float = 0.0
    wall_time: float = 0.0

    @property
    def objective(self) -> float:
        return self.objective_history[-1]

    def rows(self):
        """Per-iteration ``(iter, objective, constraint, kkt, state_iters)`` rows."""
        return list(
            zip(
                range(len(self.objective_history)),
                self.objective_history,
                self.constraint_history,
                self.kkt_history,
                self.state_iterations,
            )
        )


def volume(mesh, V, alpha) -> float:
    return float(fem.lumped_weights(mesh) @ np.exp(-alpha * np.asarray(V, dtype=float)))


def constraint_gradient(mesh, V, alpha) -> np.ndarray:
    return -alpha * fem.lumped_weights(mesh) * np.exp(-alpha * np.asarray(V, dtype=float))


def objective_gradient(mesh, V, u, delta=0.0) -> np.ndarray:
    """Envelope gradient ``w_i u_i^2`` of the objective w.r.t. nodal ``V``.

    ``u`` may be a :class:`StateSolution`; a non-converged one is rejected.
    The value of ``delta`` does not enter the formula, only the state does.
    """
    if isinstance(u, StateSolution):
        if not u.converged:
            raise StateNotConverged("gradient requested at a non-converged state")
        u = u.u
    u = fem.check_field(mesh, u, "state")
    return np.where(mesh.boundary_mask, 0.0, fem.lumped_weights(mesh) * u * u)


def initial_potential(mesh, cfg: OptimizationConfig) -> np.ndarray:
    """Uniform potential that makes the volume constraint exactly active."""
    v0 = np.log(mesh.domain.area / cfg.m) / cfg.alpha
    return np.full(mesh.n_nodes, float(np.clip(v0, 0.0, cfg.M)))


def kkt_residual(mesh, V, dF, cfg, scale):
    """Projected-gradient KKT residual in ``x = V / M`` and its multiplier estimate.

    The multiplier is the least-squares fit of ``dF + λ dc = 0`` on the free
    nodes, clipped at zero. Gradients are taken per unit area and scaled by
    ``M / scale`` so the residual is a dimensionless move in ``x``.
    """
    w = fem.lumped_weights(mesh)
    x = V / cfg.M
    g = dF / w * (cfg.M / scale)
    c = -cfg.alpha * np.exp(-cfg.alpha * V) * (cfg.M / scale)
    free = (V > 1e-9 * cfg.M) & (V < (1 - 1e-9) * cfg.M) & ~mesh.boundary_mask
    lam = 0.0
    if np.any(free):
        lam = max(0.0, -float(np.sum(w[free] * g[free] * c[free]) / np.sum(w[free] * c[free] ** 2)))
    r = g + lam * c
    proj = np.clip(x - r, 0.0, 1.0) - x
    # area-weighted RMS so the value is mesh independent
    return float(np.sqrt(np.sum(w * proj**2) / np.sum(w))), lam


def _bisect_multiplier(x_of, vol_of, target, lam_hi=1.0, iters=200):
    """Smallest ``λ >= 0`` with ``vol_of(x_of(λ)) <= target``; raises Stalled if none."""
    x0 = x_of(0.0)
    if vol_of(x0) <= target:
        return 0.0, x0
    while vol_of(x_of(lam_hi)) > target:
        lam_hi *= 10.0
        if lam_hi > 1e300:
            raise Stalled("no multiplier makes the update feasible")
    lo, hi = 0.0, lam_hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if vol_of(x_of(mid)) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return hi, x_of(hi)


class _ProjectedGradient:
    def __init__(self, n, cfg):
        self.cfg = cfg
        self.step = 1.0

    def update(self, x, g, c, vol_of, target, improved):
        # g, c: scaled gradients per unit area in x; step adapts on success
        self.step = min(self.step * 1.5, 1e6) if improved else max(self.step * 0.5, 1e-8)
        gmax = max(np.abs(g).max(), 1e-300)
        s = self.step / gmax
        lo = np.maximum(0.0, x - self.cfg.move_limit)
        hi = np.minimum(1.0, x + self.cfg.move_limit)

        def x_of(lam):
            return np.clip(x - s * (g + lam * c), lo, hi)

        return _bisect_multiplier(x_of, vol_of, target, lam_hi=gmax)


class _MMA:
    """Svanberg's moving asymptotes for one constraint, variables in [0, 1]."""

    raa0 = 1e-5

    def __init__(self, n, cfg):
        self.cfg = cfg
        self.k = 0
        self.x1 = self.x2 = None
        self.low = self.upp = None

    def _asymptotes(self, x):
        cfg = self.cfg
        if self.k <= 2:
            self.low = x - cfg.asymptote_init
            self.upp = x + cfg.asymptote_init
        else:
            sign = (x - self.x1) * (self.x1 - self.x2)
            factor = np.ones_like(x)
            factor[sign > 0] = cfg.asymptote_grow
            factor[sign < 0] = cfg.asymptote_shrink
            self.low = x - factor * (self.x1 - self.low)
            self.upp = x + factor * (self.upp - self.x1)
            self.low = np.clip(self.low, x - 10.0, x - 0.01)
            self.upp = np.clip(self.upp, x + 0.01, x + 10.0)

    def _pq(self, x, df):
        dpos, dneg = np.maximum(df, 0.0), np.maximum(-df, 0.0)
        p = (self.upp - x) ** 2 * (1.001 * dpos + 0.001 * dneg + self.raa0)
        q = (x - self.low) ** 2 * (0.001 * dpos + 1.001 * dneg + self.raa0)
        return p, q

    def update(self, x, g, c, vol_of, target, improved):
        self.k += 1
        self._asymptotes(x)
        low, upp = self.low, self.upp
        lo = np.maximum.reduce([np.zeros_like(x), low + 0.1 * (x - low), x - self.cfg.move_limit])
        hi = np.minimum.reduce([np.ones_like(x), upp - 0.1 * (upp - x), x + self.cfg.move_limit])
        p0, q0 = self._pq(x, g)
        p1, q1 = self._pq(x, c)

        def x_of(lam):
            sp_ = np.sqrt(p0 + lam * p1)
            sq = np.sqrt(q0 + lam * q1)
            return np.clip((sp_ * low + sq * upp) / (sp_ + sq), lo, hi)

        lam, x_new = _bisect_multiplier(x_of, vol_of, target, lam_hi=1.0)
        self.x2, self.x1 = self.x1, x.copy()
        return lam, x_new


def optimize_potential(mesh, f, delta, cfg: OptimizationConfig | None = None,
                       state_cfg: StateConfig | None = None, V0=None, callback=None):
    """Run the constrained optimisation on a given mesh and nodal source."""
    cfg = cfg or OptimizationConfig()
    state_cfg = state_cfg or StateConfig()
    f = fem.check_field(mesh, f, "source")
    if np.any(f < 0):
        raise ValueError("source must be nonnegative")
    w = fem.lumped_weights(mesh)
    if cfg.m < np.exp(-cfg.alpha * cfg.M) * mesh.domain.area:
        raise Stalled("volume bound below exp(-alpha M) |D|, no feasible potential")
    t0 = time.perf_counter()

    V = initial_potential(mesh, cfg) if V0 is None else np.clip(np.array(V0, dtype=float), 0, cfg.M)
    if volume(mesh, V, cfg.alpha) > cfg.m * (1 + 1e-12):
        raise ValueError("initial potential violates the volume constraint")
    stepper = (_MMA if cfg.optimizer == "mma" else _ProjectedGradient)(mesh.n_nodes, cfg)

    def vol_of(x):
        return float(w @ np.exp(-cfg.alpha * cfg.M * x))

    res = OptimizationResult(V, np.zeros_like(V))
    u_prev = None
    scale = None
    small = 0
    prev_F = None
    for k in range(cfg.max_outer_iter + 1):
        assert np.all((V >= 0) & (V <= cfg.M)), "box constraint violated"
        try:
            F, sol = objective_and_state(mesh, V, f, delta, state_cfg, u0=u_prev)
        except NonConvergence as exc:
            raise StateNotConverged(f"state did not converge at iterate {k}", k) from exc
        u_prev = sol.u
        dF = objective_gradient(mesh, V, sol, delta)
        if scale is None:
            scale = max(abs(F), 1e-300)
        kkt, lam = kkt_residual(mesh, V, dF, cfg, scale)
        res.objective_history.append(F)
        res.constraint_history.append(volume(mesh, V, cfg.alpha) - cfg.m)
        res.kkt_history.append(kkt)
        res.state_iterations.append(sol.iterations)
        res.V_opt, res.u_opt, res.iterations, res.multiplier = V, sol.u, k, lam
        log.debug("iter %d F=%.8g c=%.3e kkt=%.3e", k, F, res.constraint_history[-1], kkt)
        if callback is not None:
            callback(k, V, sol.u, F)

        if kkt <= cfg.kkt_tol:
            res.converged, res.reason = True, "kkt"
            break
        if prev_F is not None and abs(F - prev_F) <= cfg.objective_tol * abs(scale):
            small += 1
            if small >= cfg.patience:
                res.converged, res.reason = True, "objective"
                break
        else:
            small = 0
        if k == cfg.max_outer_iter:
            res.reason = "max_iter"
            break

        improved = prev_F is None or F <= prev_F
        prev_F = F
        x = V / cfg.M
        g = dF / w * (cfg.M / scale)
        c = -cfg.alpha * cfg.M * np.exp(-cfg.alpha * V) / mesh.domain.area
        _, x_new = stepper.update(x, g, c, vol_of, cfg.m, improved)
        V = np.clip(x_new * cfg.M, 0.0, cfg.M)

    res.wall_time = time.perf_counter() - t0
    return res


def optimize(problem, config: OptimizationConfig | None = None, callback=None):
    """Optimise a :class:`~robustshape.problem.ProblemSpec`."""
    mesh = problem.mesh()
    f = problem.source_field(mesh)
    cfg = config or problem.optimization
    return optimize_potential(mesh, f, problem.delta, cfg, problem.state, callback=callback)


def shape_centroid(mesh, V, threshold=1.0):
    """Area-weighted centroid of the nodes with ``V < threshold``."""
    w = fem.lumped_weights(mesh)
    sel = np.asarray(V) < threshold
    if not np.any(sel):
        return float("nan"), float("nan")
    ws = w[sel]
    return float(ws @ mesh.x[sel] / ws.sum()), float(ws @ mesh.y[sel] / ws.sum())


@dataclass
class GradientCheck:
    nodes: np.ndarray
    envelope: np.ndarray
    finite_difference: np.ndarray
    step: np.ndarray

    @property
    def relative_errors(self) -> np.ndarray:
        scale = np.maximum(np.abs(self.finite_difference), 1e-300)
        return np.abs(self.envelope - self.finite_difference) / scale

    @property
    def max_relative_error(self) -> float:
        return float(self.relative_errors.max())


def check_gradient(mesh, V, f, delta, nodes=None, n_nodes=10, steps=(1e-2, 1e-3, 1e-4),
                   state_cfg: StateConfig | None = None, rng=0):
    """Compare the envelope gradient with central differences of the objective.

    Each difference re-solves the worst-case state at ``V ± ε e_i``. For every
    node the step is taken from the flattest part of the sweep: the pair of
    consecutive steps whose estimates agree best.
    """
    state_cfg = state_cfg or StateConfig(fixed_point_tol=1e-13, linear_tol=1e-14,
                                         fixed_point_max_iter=500)
    V = fem.check_field(mesh, V, "potential")
    f = fem.check_field(mesh, f, "source")
    if nodes is None:
        interior = np.flatnonzero(~mesh.boundary_mask)
        nodes = np.random.default_rng(rng).choice(interior, size=n_nodes, replace=False)
    nodes = np.asarray(nodes)
    _, sol = objective_and_state(mesh, V, f, delta, state_cfg)
    grad = objective_gradient(mesh, V, sol, delta)[nodes]
    fd = np.empty(nodes.size)
    used = np.empty(nodes.size)
    for j, i in enumerate(nodes):
        est = []
        for eps in steps:
            e = np.zeros_like(V)
            e[i] = eps
            Fp, _ = objective_and_state(mesh, V + e, f, delta, state_cfg, u0=sol.u)
            Fm, _ = objective_and_state(mesh, np.maximum(V - e, 0.0), f, delta, state_cfg, u0=sol.u)
            est.append((Fp - Fm) / (min(eps, V[i]) + eps))
        est = np.array(est)
        if est.size == 1:
            k = 0
        else:
            k = int(np.argmin(np.abs(np.diff(est)))) + 1
        fd[j], used[j] = est[k], steps[k]
    return GradientCheck(nodes, grad, fd, used)


def shape_metrics(mesh, V, threshold=1.0):
    """Area, centroid and staircase perimeter of the nodal set ``{V < threshold}``.

    The perimeter counts grid edges joining an inside node to an outside one.
    ``isoperimetric`` is ``P^2 / (4 π A)``, equal to 1 for a disc in the limit
    (the staircase itself inflates it by up to 4/π).
    """
    inside = np.asarray(V) < threshold
    area = float(fem.lumped_weights(mesh) @ inside)
    grid = mesh.as_grid(inside).astype(int)
    perimeter = (np.abs(np.diff(grid, axis=0)).sum() * mesh.hx
                 + np.abs(np.diff(grid, axis=1)).sum() * mesh.hy)
    cx, cy = shape_centroid(mesh, V, threshold)
    iso = perimeter**2 / (4 * np.pi * area) if area > 0 else float("nan")
    return {"area": area, "centroid_x": cx, "centroid_y": cy,
            "perimeter": float(perimeter), "isoperimetric": float(iso)}
