"""Structured P1 triangulations of a rectangle.

Nodes are numbered row by row: node ``(i, j)`` (column ``i``, row ``j``) has
index ``j * (nx + 1) + i``. Every cell is split along its lower-left to
upper-right diagonal, so the lower-left corner of the rectangle belongs to two
triangles and the lower-right corner to one.
"""
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class RectDomain:
    x0: float = 0.0
    y0: float = 0.0
    x1: float = 1.0
    y1: float = 1.0

    def __post_init__(self):
        vals = (self.x0, self.y0, self.x1, self.y1)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("domain corners must be finite")
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate domain {vals}")

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    @property
    def center(self):
        return 0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)


UNIT_SQUARE = RectDomain()


@dataclass(frozen=True, eq=False)
class StructuredMesh:
    domain: RectDomain
    nx: int
    ny: int
    nodes: np.ndarray = field(repr=False)
    triangles: np.ndarray = field(repr=False)
    boundary_mask: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def hx(self) -> float:
        return (self.domain.x1 - self.domain.x0) / self.nx

    @property
    def hy(self) -> float:
        return (self.domain.y1 - self.domain.y0) / self.ny

    @property
    def x(self) -> np.ndarray:
        return self.nodes[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.nodes[:, 1]

    def node_index(self, i, j):
        return j * (self.nx + 1) + i

    def triangle_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def as_grid(self, values) -> np.ndarray:
        """Reshape nodal values to ``(ny + 1, nx + 1)``, row ``j`` is ``y_j``."""
        values = np.asarray(values)
        if values.shape != (self.n_nodes,):
            raise ValueError(f"expected {self.n_nodes} nodal values, got shape {values.shape}")
        return values.reshape(self.ny + 1, self.nx + 1)

    def same_as(self, other) -> bool:
        return (
            self is other
            or (self.domain == other.domain and self.nx == other.nx and self.ny == other.ny)
        )


def build_mesh(domain: RectDomain, nx: int, ny: int) -> StructuredMesh:
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ValueError(f"cell counts must be positive integers, got nx={nx}, ny={ny}")
    nx, ny = int(nx), int(ny)
    xs = np.linspace(domain.x0, domain.x1, nx + 1)
    ys = np.linspace(domain.y0, domain.y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    ll = (j * (nx + 1) + i).ravel()
    lr = ll + 1
    ul = ll + nx + 1
    ur = ul + 1
    lower = np.column_stack([ll, lr, ur])
    upper = np.column_stack([ll, ur, ul])
    triangles = np.empty((2 * nx * ny, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    I, J = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1))
    boundary = ((I == 0) | (I == nx) | (J == 0) | (J == ny)).ravel()

    for arr in (nodes, triangles, boundary):
        arr.setflags(write=False)
    return StructuredMesh(domain, nx, ny, nodes, triangles, boundary)


def unit_square_mesh(n: int) -> StructuredMesh:
    return build_mesh(UNIT_SQUARE, n, n)


def piecewise_x(left=1.0, right=2.0, split=0.5):
    """Source equal to ``left`` for ``x <= split`` and ``right`` beyond it."""

    def f(x, y):
        return np.where(x <= split, left, right).astype(float)

    return f


def interpolate(mesh: StructuredMesh, descriptor) -> np.ndarray:
    """Sample a pointwise function (or a constant) at the mesh nodes."""
    if callable(descriptor):
        values = np.asarray(descriptor(mesh.x, mesh.y), dtype=float)
        values = np.broadcast_to(values, (mesh.n_nodes,)).copy()
    else:
        values = np.full(mesh.n_nodes, float(descriptor))
    if not np.all(np.isfinite(values)):
        raise ValueError("interpolated field contains non-finite values")
    return values
