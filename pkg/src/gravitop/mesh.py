"""Structured grids, DOF numbering and boundary conditions.

Meshes are axis-aligned grids of identical Q4 (2D) or H8 (3D) elements.
Numbering is lexicographic with x fastest, then y, then z, for both
elements and nodes; this fixes output ordering across the whole package.
Meshes are immutable after construction (arrays are marked read-only) and
safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

#: element-local corner offsets, counter-clockwise bottom face first
_CORNERS_2D = ((0, 0), (1, 0), (1, 1), (0, 1))
_CORNERS_3D = ((0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
               (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1))


@dataclass(frozen=True)
class Mesh:
    dim: int
    nelx: int
    nely: int
    nelz: int                     # 1 in 2D
    lx: float
    ly: float
    lz: float                     # 0.0 in 2D
    thickness: float              # out-of-plane thickness, 2D only (0.0 in 3D)
    nel: int
    nnode: int
    ndof: int
    hx: float
    hy: float
    hz: float
    elem_volume: float
    node_coords: np.ndarray       # (nnode, dim)
    centroids: np.ndarray         # (nel, dim)
    edof: np.ndarray              # (nel, 4*dim or 8*dim) element -> global dofs
    nondesign_void: np.ndarray    # element indices pinned to 0
    nondesign_solid: np.ndarray   # element indices pinned to 1

    @property
    def lengths(self) -> tuple[float, ...]:
        return (self.lx, self.ly) if self.dim == 2 else (self.lx, self.ly, self.lz)

    @property
    def elem_sizes(self) -> tuple[float, ...]:
        return (self.hx, self.hy) if self.dim == 2 else (self.hx, self.hy, self.hz)

    @property
    def selector_tol(self) -> float:
        """Absolute tolerance used when matching node coordinates."""
        return 1e-9 * max(self.lengths)

    def design_mask(self) -> np.ndarray:
        """Boolean mask of elements free to be optimized."""
        mask = np.ones(self.nel, dtype=bool)
        mask[self.nondesign_void] = False
        mask[self.nondesign_solid] = False
        return mask

    def nodes_where(self, selector: "NodeSelector") -> np.ndarray:
        """Node indices matching a selector (may be empty)."""
        tol = self.selector_tol
        mask = np.ones(self.nnode, dtype=bool)
        for axis, want in enumerate(selector.coords()):
            if axis >= self.dim:
                if want is not None:
                    raise ConfigError(f"selector fixes axis {axis} on a {self.dim}D mesh")
                continue
            if want is not None:
                mask &= np.abs(self.node_coords[:, axis] - want) <= tol
        return np.nonzero(mask)[0]


@dataclass(frozen=True)
class NodeSelector:
    """Matches nodes whose coordinates equal the given values (within the
    mesh tolerance). Leaving a coordinate ``None`` leaves it free, so a
    single value selects a face/edge and a full set selects one point."""

    x: float | None = None
    y: float | None = None
    z: float | None = None

    def coords(self) -> tuple[float | None, float | None, float | None]:
        return (self.x, self.y, self.z)


@dataclass(frozen=True)
class FixedRegion:
    at: NodeSelector
    components: tuple[int, ...]   # displacement components to fix (0=x, 1=y, 2=z)


@dataclass(frozen=True)
class PointLoad:
    at: NodeSelector
    direction: tuple[float, ...]  # unit vector
    magnitude: float              # N; spread equally over matched nodes


@dataclass(frozen=True)
class SymmetryFace:
    """Axis-aligned roller plane: fixes the displacement component normal
    to the face for every node on it."""

    axis: int
    value: float


@dataclass(frozen=True)
class BoundarySpec:
    fixed: tuple[FixedRegion, ...]
    point_loads: tuple[PointLoad, ...] = ()
    symmetry_faces: tuple[SymmetryFace, ...] = ()


def build_mesh(dim: int,
               nel: tuple[int, ...],
               lengths: tuple[float, ...],
               thickness: float = 0.0,
               void_boxes: tuple = (),
               solid_boxes: tuple = ()) -> Mesh:
    """Build a structured 2D/3D grid.

    Parameters
    ----------
    dim:
        2 or 3.
    nel:
        Elements per axis, (nelx, nely) or (nelx, nely, nelz).
    lengths:
        Domain edge lengths in meters, same arity as ``nel``.
    thickness:
        Out-of-plane thickness (m), required positive in 2D.
    void_boxes, solid_boxes:
        Axis-aligned boxes ((lo coords), (hi coords)) in physical
        coordinates; elements whose centroid falls inside are pinned to
        void (0) or solid (1) and excluded from design updates.
    """
    if dim not in (2, 3):
        raise ConfigError(f"dim must be 2 or 3, got {dim}")
    if len(nel) != dim or len(lengths) != dim:
        raise ConfigError(f"expected {dim} element counts and lengths, got {nel}, {lengths}")
    if any(int(n) < 1 for n in nel):
        raise ConfigError(f"element counts must be >= 1, got {nel}")
    if any(l <= 0.0 for l in lengths):
        raise ConfigError(f"lengths must be positive, got {lengths}")
    if dim == 2 and thickness <= 0.0:
        raise ConfigError(f"2D mesh needs a positive thickness, got {thickness}")

    nelx, nely = int(nel[0]), int(nel[1])
    nelz = int(nel[2]) if dim == 3 else 1
    lx, ly = float(lengths[0]), float(lengths[1])
    lz = float(lengths[2]) if dim == 3 else 0.0
    t = float(thickness) if dim == 2 else 0.0

    hx, hy = lx / nelx, ly / nely
    hz = lz / nelz if dim == 3 else 0.0
    n_el = nelx * nely * nelz
    nnx, nny = nelx + 1, nely + 1
    nnz_ = nelz + 1 if dim == 3 else 1
    n_node = nnx * nny * nnz_

    if dim == 2:
        iy, ix = np.divmod(np.arange(n_node), nnx)
        node_coords = np.column_stack([ix * hx, iy * hy])
        ey, ex = np.divmod(np.arange(n_el), nelx)
        centroids = np.column_stack([(ex + 0.5) * hx, (ey + 0.5) * hy])
        n00 = ey * nnx + ex
        corner_nodes = [n00 + dyc * nnx + dxc for dxc, dyc in _CORNERS_2D]
        elem_volume = lx * ly * t / n_el
    else:
        iz, rem = np.divmod(np.arange(n_node), nnx * nny)
        iy, ix = np.divmod(rem, nnx)
        node_coords = np.column_stack([ix * hx, iy * hy, iz * hz])
        ez, rem = np.divmod(np.arange(n_el), nelx * nely)
        ey, ex = np.divmod(rem, nelx)
        centroids = np.column_stack([(ex + 0.5) * hx, (ey + 0.5) * hy, (ez + 0.5) * hz])
        n000 = ez * nnx * nny + ey * nnx + ex
        corner_nodes = [n000 + dzc * nnx * nny + dyc * nnx + dxc
                        for dxc, dyc, dzc in _CORNERS_3D]
        elem_volume = lx * ly * lz / n_el

    nodes = np.stack(corner_nodes, axis=1).astype(np.int64)
    edof = (dim * nodes[:, :, None] + np.arange(dim)).reshape(n_el, -1)

    domain_hi = (lx, ly) if dim == 2 else (lx, ly, lz)
    void = _resolve_boxes(void_boxes, centroids, domain_hi, "void")
    solid = _resolve_boxes(solid_boxes, centroids, domain_hi, "solid")
    overlap = np.intersect1d(void, solid)
    if overlap.size:
        raise ConfigError(f"{overlap.size} elements claimed both void and solid")

    for arr in (node_coords, centroids, edof, void, solid):
        arr.setflags(write=False)

    return Mesh(dim=dim, nelx=nelx, nely=nely, nelz=nelz,
                lx=lx, ly=ly, lz=lz, thickness=t,
                nel=n_el, nnode=n_node, ndof=dim * n_node,
                hx=hx, hy=hy, hz=hz, elem_volume=elem_volume,
                node_coords=node_coords, centroids=centroids, edof=edof,
                nondesign_void=void, nondesign_solid=solid)


def _resolve_boxes(boxes, centroids, domain_hi, kind) -> np.ndarray:
    hits = np.zeros(centroids.shape[0], dtype=bool)
    dim = centroids.shape[1]
    for box in boxes:
        lo, hi = (np.asarray(box[0], dtype=float), np.asarray(box[1], dtype=float))
        if lo.shape != (dim,) or hi.shape != (dim,):
            raise ConfigError(f"{kind} box {box} does not match mesh dimension {dim}")
        if np.any(lo >= hi):
            raise ConfigError(f"{kind} box {box} has empty extent")
        if np.any(hi <= 0.0) or np.any(lo >= np.asarray(domain_hi)):
            raise ConfigError(f"{kind} box {box} lies outside the domain {domain_hi}")
        inside = np.all((centroids >= lo) & (centroids <= hi), axis=1)
        hits |= inside
    return np.nonzero(hits)[0]


def resolve_boundary(mesh: Mesh, spec: BoundarySpec) -> tuple[np.ndarray, np.ndarray]:
    """Resolve a boundary spec on a mesh.

    Returns ``(fixed_dofs, f_ext)``: the sorted unique constrained DOF
    indices and the external load vector (before any load scaling). A
    selector matching no node is a configuration error.
    """
    fixed: list[np.ndarray] = []
    for region in spec.fixed:
        nodes = mesh.nodes_where(region.at)
        if nodes.size == 0:
            raise ConfigError(f"fixed-region selector {region.at} matches no node")
        for comp in region.components:
            if not 0 <= comp < mesh.dim:
                raise ConfigError(f"component {comp} invalid on a {mesh.dim}D mesh")
            fixed.append(mesh.dim * nodes + comp)

    for face in spec.symmetry_faces:
        if not 0 <= face.axis < mesh.dim:
            raise ConfigError(f"symmetry axis {face.axis} invalid on a {mesh.dim}D mesh")
        sel = NodeSelector(**{"xyz"[face.axis]: face.value})
        nodes = mesh.nodes_where(sel)
        if nodes.size == 0:
            raise ConfigError(f"symmetry face {face} matches no node")
        fixed.append(mesh.dim * nodes + face.axis)

    f_ext = np.zeros(mesh.ndof)
    for load in spec.point_loads:
        nodes = mesh.nodes_where(load.at)
        if nodes.size == 0:
            raise ConfigError(f"point-load selector {load.at} matches no node")
        if len(load.direction) != mesh.dim:
            raise ConfigError(f"load direction {load.direction} on a {mesh.dim}D mesh")
        share = load.magnitude / nodes.size
        for comp, d in enumerate(load.direction):
            if d != 0.0:
                np.add.at(f_ext, mesh.dim * nodes + comp, share * d)

    fixed_dofs = (np.unique(np.concatenate(fixed)) if fixed
                  else np.empty(0, dtype=np.int64))
    return fixed_dofs, f_ext
