"""Radially symmetric worst-case energies and the ball-optimality check.

The radial reduction of ``-Δu = f - Φ(u)`` on the ball of radius ``R`` is
discretised with P1 elements in ``r`` and weight ``|S^{d-1}| r^{d-1}``; the
node ``r = 0`` carries the natural condition, ``r = R`` is Dirichlet.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded
from scipy.special import gamma

from .errors import NonConvergence
from .fem import lumped_weights
from .functionals import worstcase_energy
from .grid import RectDomain, build_mesh, interpolate
from .state import StateConfig, conjugate_exponent

_GAUSS = (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0))


def sphere_measure(d: int) -> float:
    return 2.0 * np.pi ** (d / 2) / gamma(d / 2)


def ball_radius(measure: float, d: int = 2) -> float:
    return (measure * d / sphere_measure(d)) ** (1.0 / d)


@dataclass(frozen=True)
class RadialProblem:
    R: float = 1.0
    f_r: object = 1.0  # constant or callable of r, nonincreasing
    delta: float = 0.0
    p: float = 2.0
    nr: int = 1000
    d: int = 2

    def __post_init__(self):
        if self.R <= 0:
            raise ValueError("R must be positive")
        if self.nr < 2:
            raise ValueError("nr must be at least 2")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        conjugate_exponent(self.p)
        samples = self.source(np.linspace(0.0, self.R, 257))
        if np.any(np.diff(samples) > 1e-12 * max(1.0, np.abs(samples).max())):
            raise ValueError("radial source must be nonincreasing in r")

    def source(self, r):
        r = np.asarray(r, dtype=float)
        if callable(self.f_r):
            return np.broadcast_to(np.asarray(self.f_r(r), dtype=float), r.shape).copy()
        return np.full(r.shape, float(self.f_r))


def _assemble(problem):
    """Tridiagonal stiffness (banded storage) and lumped weights on the radial mesh."""
    r = np.linspace(0.0, problem.R, problem.nr + 1)
    h = np.diff(r)
    S = sphere_measure(problem.d)
    k = problem.d - 1
    left, right = r[:-1], r[1:]
    # 2-point Gauss, exact up to cubic integrands (d <= 3)
    qp = [left + t * h for t in _GAUSS]
    stiff = S * sum(0.5 * h * q**k for q in qp) / h**2
    mass_l = S * sum(0.5 * h * q**k * (right - q) / h for q in qp)
    mass_r = S * sum(0.5 * h * q**k * (q - left) / h for q in qp)

    n = r.size
    diag = np.zeros(n)
    np.add.at(diag, np.arange(n - 1), stiff)
    np.add.at(diag, np.arange(1, n), stiff)
    off = -stiff
    w = np.zeros(n)
    np.add.at(w, np.arange(n - 1), mass_l)
    np.add.at(w, np.arange(1, n), mass_r)
    return r, diag, off, w


def _radial_norm(w, u, q):
    return float((w @ np.abs(u) ** q) ** (1.0 / q))


def radial_state(problem: RadialProblem, cfg: StateConfig | None = None):
    """Return ``(r, u, w, iterations)`` for the radial worst-case state."""
    cfg = cfg or StateConfig()
    r, diag, off, w = _assemble(problem)
    n = r.size
    ab = np.zeros((3, n))
    ab[1] = diag
    ab[0, 1:] = off
    ab[2, :-1] = off
    # Dirichlet at r = R
    ab[1, -1] = 1.0
    ab[0, -1] = 0.0
    ab[2, -2] = 0.0
    f = problem.source(r)

    def solve(rhs):
        b = w * rhs
        b[-1] = 0.0
        return solve_banded((1, 1), ab, b)

    u = solve(f)
    if problem.delta == 0 or not np.any(f[:-1]):
        return r, u, w, 1
    q = conjugate_exponent(problem.p)
    guard = 1e-12
    for it in range(1, cfg.fixed_point_max_iter + 1):
        nrm = _radial_norm(w, u, q)
        if nrm < guard:
            raise NonConvergence("radial state vanished")
        phi = problem.delta * np.sign(u) * (np.abs(u) / nrm) ** (q - 1.0)
        u_new = solve(f - phi)
        change = np.sqrt(w @ (u_new - u) ** 2) / max(np.sqrt(w @ u**2), guard)
        u = u_new
        if change <= cfg.fixed_point_tol:
            return r, u, w, it
    raise NonConvergence("radial fixed point did not converge", change, cfg.fixed_point_max_iter)


def radial_energy(problem: RadialProblem, cfg: StateConfig | None = None) -> float:
    """Worst-case energy of the ball, ``-1/2 int f u + 1/2 δ ||u||_{p'}`` at the state."""
    r, u, w, _ = radial_state(problem, cfg)
    f = problem.source(r)
    value = -0.5 * float(w @ (f * u))
    if problem.delta:
        value += 0.5 * problem.delta * _radial_norm(w, u, conjugate_exponent(problem.p))
    return value


def standard_candidates(measure: float):
    """Centered shapes of the given area: disc, square and 2:1, 4:1 rectangles."""
    R = ball_radius(measure)

    def rect(aspect):
        a = np.sqrt(measure * aspect)
        b = measure / a
        return lambda x, y: (np.abs(x) <= a / 2) & (np.abs(y) <= b / 2)

    return {
        "disc": lambda x, y: np.hypot(x, y) <= R,
        "square": rect(1.0),
        "rect2x1": rect(2.0),
        "rect4x1": rect(4.0),
    }


def encode_shape(mesh, indicator, M, center=None, erosion=0.5):
    """Sharp potential: 0 on nodes inside the shape, ``M`` elsewhere.

    Nodes are tested against the shape eroded by ``erosion`` mesh cells along
    each axis: the discrete support of a P1 state extends to the first ``V = M``
    node, so without erosion the effective shape grows by about half a cell.
    """
    cx, cy = mesh.domain.center if center is None else center
    x, y = mesh.x - cx, mesh.y - cy
    inside = np.ones(mesh.n_nodes, dtype=bool)
    ex, ey = erosion * mesh.hx, erosion * mesh.hy
    for sx, sy in ((ex, 0), (-ex, 0), (0, ey), (0, -ey)):
        inside &= np.asarray(indicator(x + sx, y + sy), dtype=bool)
    return np.where(inside, 0.0, float(M))


@dataclass
class CandidateRow:
    name: str
    energy: float
    discrete_area: float
    ball_energy: float
    relative_gap: float
    passes: bool


def symmetrization_check(m, f_r=1.0, delta=0.0, p=2.0, candidates=None, nx=100, nr=1000,
                         M=1e8, tol=0.02, cfg: StateConfig | None = None, erosion=0.5,
                         workers=1):
    """Compare potential-encoded candidates with the radial ball energy.

    Candidates are centered in a square ``D`` of side ``4 R`` (clearance of one
    ball radius around the ball). A row passes when
    ``E_ball <= E_candidate + tol |E_candidate|``. Failures are reported, not raised.
    """
    cfg = cfg or StateConfig()
    R = ball_radius(m)
    half = 2.0 * R
    mesh = build_mesh(RectDomain(-half, -half, half, half), nx, nx)
    radial = RadialProblem(R=R, f_r=f_r, delta=delta, p=p, nr=nr)
    ball = radial_energy(radial, cfg)
    if callable(f_r):
        f = interpolate(mesh, lambda x, y: radial.source(np.hypot(x, y)))
    else:
        f = interpolate(mesh, float(f_r))
    candidates = candidates or standard_candidates(m)

    def evaluate(item):
        name, ind = item
        V = encode_shape(mesh, ind, M, erosion=erosion)
        e = worstcase_energy(mesh, V, f, delta, p, cfg).value
        area = float(lumped_weights(mesh) @ (V == 0))
        gap = (e - ball) / abs(ball)
        return CandidateRow(name, e, area, ball, gap, ball <= e + tol * abs(e))

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(evaluate, candidates.items()))
