"""Problem description shared by the optimiser, the config parser and the CLI."""
from dataclasses import dataclass, field

import numpy as np

from .grid import RectDomain, build_mesh, interpolate, piecewise_x
from .optimize import OptimizationConfig
from .state import StateConfig

SOURCE_KINDS = ("constant", "piecewise-x", "radial", "tabulated")


@dataclass(frozen=True)
class SourceSpec:
    """Pointwise source term.

    ``constant``     f = value
    ``piecewise-x``  f = left for x <= split, right otherwise
    ``radial``       f = max(value - slope * |x - c|, 0) about the domain center
    ``tabulated``    nodal values read from a CSV export (``x,y,value``)
    """

    kind: str = "piecewise-x"
    value: float = 1.0
    left: float = 1.0
    right: float = 2.0
    split: float = 0.5
    slope: float = 0.0
    path: str = ""

    def __post_init__(self):
        if self.kind not in SOURCE_KINDS:
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.kind == "radial" and self.slope < 0:
            raise ValueError("radial slope must be nonnegative (profile nonincreasing)")
        if self.kind == "tabulated" and not self.path:
            raise ValueError("tabulated source needs a path")

    def descriptor(self, domain: RectDomain):
        if self.kind == "constant":
            return float(self.value)
        if self.kind == "piecewise-x":
            return piecewise_x(self.left, self.right, self.split)
        if self.kind == "radial":
            cx, cy = domain.center

            def f(x, y):
                return np.maximum(self.value - self.slope * np.hypot(x - cx, y - cy), 0.0)

            return f
        raise ValueError("tabulated sources have no pointwise descriptor")


@dataclass(frozen=True)
class ProblemSpec:
    domain: RectDomain = RectDomain()
    nx: int = 50
    ny: int = 50
    source: SourceSpec = SourceSpec()
    delta: float = 0.0
    p: float = 2.0
    optimization: OptimizationConfig = OptimizationConfig()
    state: StateConfig = StateConfig()
    output_dir: str = "out"
    seed: int = 0
    _mesh_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if not (1.0 < self.p < np.inf):
            raise ValueError("p must exceed 1 and be finite")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("nx and ny must be positive")

    def mesh(self):
        if "mesh" not in self._mesh_cache:
            self._mesh_cache["mesh"] = build_mesh(self.domain, self.nx, self.ny)
        return self._mesh_cache["mesh"]

    def source_field(self, mesh=None) -> np.ndarray:
        mesh = mesh or self.mesh()
        if self.source.kind == "tabulated":
            from .io import read_field

            return read_field(mesh, self.source.path)
        return interpolate(mesh, self.source.descriptor(self.domain))
