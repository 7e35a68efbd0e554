"""P1 finite elements on a :class:`~robustshape.grid.StructuredMesh`.

Matrices are ``scipy.sparse.csr_matrix``; fields are plain float arrays with
one entry per node. Every integral in the package goes through the lumped
(nodal) quadrature defined here.
"""
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import IllConditioned, NonConvergence
from .grid import StructuredMesh


def check_field(mesh: StructuredMesh, values, name="field") -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.n_nodes,):
        raise ValueError(f"{name} has shape {values.shape}, mesh has {mesh.n_nodes} nodes")
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{name} contains non-finite values")
    return values


def _element_gradients(mesh):
    """Return (areas, grads) with grads[t, k] the gradient of hat function k on triangle t."""
    p = mesh.nodes[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    # b_k = y_{k+1} - y_{k+2}, c_k = x_{k+2} - x_{k+1}
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area = 0.5 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
    grads = np.stack([b, c], axis=-1) / (2.0 * area)[:, None, None]
    return area, grads


def assemble_stiffness(mesh: StructuredMesh) -> sp.csr_matrix:
    """Stiffness matrix of the Dirichlet integral, before any boundary condition."""
    area, grads = _element_gradients(mesh)
    local = np.einsum("tkd,tld->tkl", grads, grads) * area[:, None, None]
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(mesh.n_nodes,) * 2).tocsr()
    A.sum_duplicates()
    # drop the exact zeros coming from the right angles so the 5-point pattern is explicit
    A.data[np.abs(A.data) < 1e-14 * np.abs(A.data).max()] = 0.0
    A.eliminate_zeros()
    return A


def assemble_lumped_mass(mesh: StructuredMesh) -> np.ndarray:
    area = mesh.triangle_areas()
    w = np.zeros(mesh.n_nodes)
    np.add.at(w, mesh.triangles.ravel(), np.repeat(area / 3.0, 3))
    return w


def assemble_load(mesh: StructuredMesh, f) -> np.ndarray:
    f = check_field(mesh, f, "source")
    return lumped_weights(mesh) * f


def apply_dirichlet(A, b, boundary_mask):
    """Symmetric elimination of homogeneous Dirichlet nodes.

    Boundary rows and columns are zeroed, their diagonal set to one and the
    matching right-hand side entries set to zero.
    """
    mask = np.asarray(boundary_mask, dtype=bool)
    keep = sp.diags((~mask).astype(float))
    A2 = (keep @ A @ keep + sp.diags(mask.astype(float))).tocsr()
    A2.eliminate_zeros()
    b2 = None
    if b is not None:
        b2 = np.where(mask, 0.0, np.asarray(b, dtype=float))
    return A2, b2


@lru_cache(maxsize=16)
def _operators(mesh):
    w = assemble_lumped_mass(mesh)
    A, _ = apply_dirichlet(assemble_stiffness(mesh), None, mesh.boundary_mask)
    w.setflags(write=False)
    return w, A


def lumped_weights(mesh: StructuredMesh) -> np.ndarray:
    """Cached lumped mass (read-only)."""
    return _operators(mesh)[0]


def dirichlet_stiffness(mesh: StructuredMesh) -> sp.csr_matrix:
    """Cached stiffness with the boundary already eliminated."""
    return _operators(mesh)[1]


def potential_operator(mesh: StructuredMesh, V) -> sp.csr_matrix:
    """``A + diag(w V)`` with Dirichlet elimination; the potential is ignored on the boundary."""
    w, A = _operators(mesh)
    V = check_field(mesh, V, "potential")
    return (A + sp.diags(np.where(mesh.boundary_mask, 0.0, w * V))).tocsr()


def cg_solve(A, b, tol=1e-10, max_iter=None, x0=None, return_info=False):
    """Jacobi-preconditioned conjugate gradients.

    Stops when ``||Ax - b|| <= tol * ||b||``. Raises :class:`NonConvergence`
    when the budget (default ``10 n``) runs out and :class:`IllConditioned`
    when the residual stagnates or a non-positive curvature shows up.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter is None:
        max_iter = 10 * n
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        x = np.zeros(n)
        return (x, 0, 0.0) if return_info else x

    diag = A.diagonal()
    if np.any(diag <= 0):
        raise IllConditioned("non-positive diagonal, matrix is not SPD")
    inv_diag = 1.0 / diag

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    rel = np.linalg.norm(r) / bnorm
    if rel <= tol:
        return (x, 0, rel) if return_info else x
    z = inv_diag * r
    d = z.copy()
    rz = r @ z
    best, since_best = rel, 0
    window = max(200, n)
    for k in range(1, max_iter + 1):
        Ad = A @ d
        dAd = d @ Ad
        if dAd <= 0:
            raise IllConditioned("non-positive curvature in CG", rel, k)
        step = rz / dAd
        x += step * d
        r -= step * Ad
        rel = np.linalg.norm(r) / bnorm
        if rel <= tol:
            return (x, k, rel) if return_info else x
        if rel < 0.99 * best:
            best, since_best = rel, 0
        else:
            since_best += 1
            if since_best >= window:
                raise IllConditioned(f"CG residual stagnated at {rel:.3e}", rel, k)
        z = inv_diag * r
        rz_new = r @ z
        d = z + (rz_new / rz) * d
        rz = rz_new
    raise NonConvergence(f"CG did not reach tol={tol:g} in {max_iter} iterations", rel, max_iter)


def integrate(mesh: StructuredMesh, u) -> float:
    return float(lumped_weights(mesh) @ check_field(mesh, u))


def integrate_product(mesh: StructuredMesh, u, v) -> float:
    return float(lumped_weights(mesh) @ (check_field(mesh, u) * check_field(mesh, v)))


def lp_norm(mesh: StructuredMesh, u, p: float) -> float:
    if p < 1:
        raise ValueError("p must be at least 1")
    u = np.abs(check_field(mesh, u))
    w = lumped_weights(mesh)
    if np.isinf(p):
        return float(u.max())
    scale = u.max()
    if scale == 0.0:
        return 0.0
    # rescale before powering so large p does not underflow
    return float(scale * (w @ (u / scale) ** p) ** (1.0 / p))


def dirichlet_integral(mesh: StructuredMesh, u) -> float:
    """``int |grad u|^2`` for a field vanishing on the boundary."""
    u = check_field(mesh, u)
    return float(u @ (dirichlet_stiffness(mesh) @ u))
