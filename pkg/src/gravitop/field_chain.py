"""Three-field density representation: design -> filtered -> physical.

The design field x is smoothed by a linear-hat density filter (a sparse
row-stochastic operator P built once per mesh) and then sharpened by a
smooth Heaviside projection whose steepness beta grows on a fixed
continuation schedule. Optimization acts on x; the physics sees the
projected field. Gradients are pulled back through the same chain.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
import scipy.sparse as sp

from .errors import ParameterError
from .mesh import Mesh


class FilterOperator:
    """Sparse row-stochastic smoothing operator over element centroids."""

    def __init__(self, matrix: sp.csr_matrix, radius: float):
        self.matrix = matrix
        self.radius = radius

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x

    def apply_transpose(self, v: np.ndarray) -> np.ndarray:
        return self.matrix.T @ v


def build_filter(mesh: Mesh, r_fill: float) -> FilterOperator:
    """Build the density filter for a structured mesh.

    Weights are linear hats w = max(0, 1 - d/r_fill) on centroid
    distances, volume-weighted and row-normalized; rows near the boundary
    renormalize over their truncated neighborhoods. Uniform grids make
    the weight of a neighbor depend only on the index offset, so the
    operator is assembled per offset rather than per element pair.
    """
    if r_fill <= 0.0:
        raise ParameterError(f"filter radius must be positive, got {r_fill}")

    nelx, nely, nelz = mesh.nelx, mesh.nely, mesh.nelz
    hx, hy = mesh.hx, mesh.hy
    hz = mesh.hz if mesh.dim == 3 else 1.0
    reach_x = int(r_fill / hx)
    reach_y = int(r_fill / hy)
    reach_z = int(r_fill / hz) if mesh.dim == 3 else 0

    ex = np.arange(nelx)
    ey = np.arange(nely)
    ez = np.arange(nelz)
    # index arrays laid out (z, y, x) so raveling matches element numbering
    if mesh.dim == 3:
        EZ, EY, EX = np.meshgrid(ez, ey, ex, indexing="ij")
    else:
        EY, EX = np.meshgrid(ey, ex, indexing="ij")
        EZ = np.zeros_like(EX)

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    for dz in range(-reach_z, reach_z + 1):
        for dy in range(-reach_y, reach_y + 1):
            for dx in range(-reach_x, reach_x + 1):
                dist = math.sqrt((dx * hx) ** 2 + (dy * hy) ** 2
                                 + ((dz * hz) ** 2 if mesh.dim == 3 else 0.0))
                w = 1.0 - dist / r_fill
                if w <= 0.0:
                    continue
                ok = ((EX + dx >= 0) & (EX + dx < nelx)
                      & (EY + dy >= 0) & (EY + dy < nely)
                      & (EZ + dz >= 0) & (EZ + dz < nelz))
                src = (EZ + dz) * nelx * nely + (EY + dy) * nelx + (EX + dx)
                dst = EZ * nelx * nely + EY * nelx + EX
                rows.append(dst[ok].ravel())
                cols.append(src[ok].ravel())
                vals.append(np.full(int(ok.sum()), w * mesh.elem_volume))

    P = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(mesh.nel, mesh.nel))
    row_sums = np.asarray(P.sum(axis=1)).ravel()
    P = sp.diags(1.0 / row_sums) @ P
    P = P.tocsr()
    P.sort_indices()

    if P.nnz == mesh.nel:
        warnings.warn(
            f"filter radius {r_fill:.4g} is below the element spacing; "
            "the filter degenerates to the identity", stacklevel=2)
    return FilterOperator(P, r_fill)


def project(x_tilde, beta: float, eta: float = 0.5):
    """Smooth Heaviside projection with threshold eta = 0.5.

    Maps [0, 1] onto [0, 1] strictly increasingly for every beta >= 1,
    pushing values away from the threshold as beta grows.
    """
    xt = np.asarray(x_tilde, dtype=float)
    th = math.tanh(beta * eta)
    den = th + math.tanh(beta * (1.0 - eta))
    return (th + np.tanh(beta * (xt - eta))) / den


def project_deriv(x_tilde, beta: float, eta: float = 0.5):
    """Derivative of :func:`project` with respect to the filtered field."""
    xt = np.asarray(x_tilde, dtype=float)
    t = np.tanh(beta * (xt - eta))
    den = math.tanh(beta * eta) + math.tanh(beta * (1.0 - eta))
    return beta * (1.0 - t * t) / den


def continuation_step(iteration: int, beta_init: float = 1.0,
                      beta_max: float = 256.0, period: int = 25) -> float:
    """Projection sharpness for a 1-based iteration counter.

    Starts at ``beta_init`` and doubles every ``period`` iterations until
    it saturates at ``beta_max``.
    """
    if iteration < 1:
        raise ParameterError(f"iteration counter is 1-based, got {iteration}")
    return min(beta_init * 2.0 ** ((iteration - 1) // period), beta_max)


class FieldChain:
    """Holds the coupled fields x, x_tilde, x_bar and maps gradients back.

    Non-design elements take part in filtering as neighbors, but their own
    design and physical values are re-pinned after every update, and their
    gradient entries are zeroed.
    """

    def __init__(self, mesh: Mesh, filter_op: FilterOperator,
                 beta: float = 1.0, eta: float = 0.5):
        if eta != 0.5:
            raise ParameterError(
                f"only the symmetric projection threshold eta=0.5 is supported, got {eta}")
        self.mesh = mesh
        self.filter_op = filter_op
        self.beta = float(beta)
        self.eta = eta
        self.x = np.zeros(mesh.nel)
        self.x_tilde = np.zeros(mesh.nel)
        self.x_bar = np.zeros(mesh.nel)

    def pin(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).copy()
        x[self.mesh.nondesign_void] = 0.0
        x[self.mesh.nondesign_solid] = 1.0
        return x

    def set_design(self, x: np.ndarray, beta: float | None = None) -> np.ndarray:
        """Update all three fields from a design vector; returns x_bar."""
        if beta is not None:
            if beta < 1.0:
                raise ParameterError(f"projection sharpness must be >= 1, got {beta}")
            self.beta = float(beta)
        self.x = self.pin(x)
        self.x_tilde = self.filter_op.apply(self.x)
        self.x_bar = self.pin(project(self.x_tilde, self.beta, self.eta))
        return self.x_bar

    def map_gradient(self, d_dxbar: np.ndarray) -> np.ndarray:
        """Pull a physical-field gradient back to the design field.

        d/dx = P^T (d/dxbar * dxbar/dxtilde), with non-design entries
        zeroed on both sides of the filter.
        """
        inner = np.asarray(d_dxbar, dtype=float) * project_deriv(
            self.x_tilde, self.beta, self.eta)
        inner[self.mesh.nondesign_void] = 0.0
        inner[self.mesh.nondesign_solid] = 0.0
        out = self.filter_op.apply_transpose(inner)
        out[self.mesh.nondesign_void] = 0.0
        out[self.mesh.nondesign_solid] = 0.0
        return out
