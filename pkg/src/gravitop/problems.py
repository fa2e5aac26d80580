"""Benchmark problem definitions.

Every built-in benchmark is declared as data (geometry, boundary
conditions, loads, interpolation parameters) so runs are configured, not
coded. Specs serialize to/from plain dicts for the JSON config format
used by the CLI; see docs/config_schema.md.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import ConfigError
from .fem import GRAVITY_ACCEL, ElementKernel, reference_stiffness
from .field_chain import FilterOperator, build_filter
from .material import MassDensityModel, SimpModel
from .mesh import (BoundarySpec, FixedRegion, Mesh, NodeSelector, PointLoad,
                   SymmetryFace, build_mesh, resolve_boundary)

LOAD_RULES = ("none", "absolute", "max_selfweight", "total_selfweight")


@dataclass(frozen=True)
class ProblemSpec:
    """Complete declaration of one optimization problem.

    The external load magnitude is given by a rule: an absolute value in
    newtons, or a multiple of the domain's self-weight. "max_selfweight"
    is the weight of the permitted material (V * gamma_s * vf_star * |g|),
    "total_selfweight" the weight of the fully solid domain. The scalar
    ``kappa`` scales the external load in the state equation.
    """

    name: str
    dim: int
    lengths: tuple[float, ...]
    nel: tuple[int, ...]
    fixed: tuple[FixedRegion, ...]
    vf_star: float
    filter_mult: float
    eta_g: float
    beta_g: float
    move_limit: float
    thickness: float = 0.01
    symmetry_faces: tuple[SymmetryFace, ...] = ()
    load_rule: str = "none"
    load_value: float = 0.0           # N, used when load_rule == "absolute"
    load_at: NodeSelector | None = None
    load_direction: tuple[float, ...] = ()
    kappa: float = 0.0
    g2_enabled: bool = True
    void_boxes: tuple = ()
    solid_boxes: tuple = ()
    e_solid: float = 210e9
    e_contrast: float = 1e-6
    penalty: float = 3.0
    gamma_solid: float = 7850.0
    chi: float = 1e-9
    nu: float = 0.3
    gravity: float = GRAVITY_ACCEL

    def __post_init__(self):
        if not 0.0 < self.vf_star < 1.0:
            raise ConfigError(f"vf_star must lie in (0, 1), got {self.vf_star}")
        if self.filter_mult < 1.0:
            raise ConfigError(f"filter_mult must be >= 1, got {self.filter_mult}")
        if self.load_rule not in LOAD_RULES:
            raise ConfigError(f"unknown load rule {self.load_rule!r}; "
                              f"choose one of {LOAD_RULES}")
        if self.load_rule != "none" and self.load_at is None:
            raise ConfigError("a load rule other than 'none' needs load_at")

    @property
    def domain_volume(self) -> float:
        if self.dim == 2:
            return self.lengths[0] * self.lengths[1] * self.thickness
        return self.lengths[0] * self.lengths[1] * self.lengths[2]

    def load_magnitude(self) -> float:
        """External point-load magnitude (N) after applying the rule."""
        if self.load_rule in ("none",):
            return 0.0
        if self.load_rule == "absolute":
            return self.load_value
        weight = self.domain_volume * self.gamma_solid * abs(self.gravity)
        if self.load_rule == "max_selfweight":
            return weight * self.vf_star
        return weight

    def boundary_spec(self) -> BoundarySpec:
        loads = ()
        if self.load_rule != "none":
            loads = (PointLoad(at=self.load_at, direction=self.load_direction,
                               magnitude=self.load_magnitude()),)
        return BoundarySpec(fixed=self.fixed, point_loads=loads,
                            symmetry_faces=self.symmetry_faces)

    def filter_radius(self) -> float:
        edges = [self.lengths[i] / self.nel[i] for i in range(self.dim)]
        return self.filter_mult * max(edges)

    def models(self) -> tuple[SimpModel, MassDensityModel]:
        simp = SimpModel.from_contrast(self.e_solid, self.e_contrast, self.penalty)
        mass = MassDensityModel(gamma_solid=self.gamma_solid, contrast=self.chi,
                                eta_g=self.eta_g, beta_g=self.beta_g)
        return simp, mass

    def recommendation_warnings(self) -> list[str]:
        _, mass = self.models()
        return mass.recommendation_warnings(self.vf_star, self.penalty)

    def build(self) -> "BuiltProblem":
        mesh = build_mesh(self.dim, self.nel, self.lengths, self.thickness,
                          void_boxes=self.void_boxes, solid_boxes=self.solid_boxes)
        kernel = reference_stiffness(self.dim, mesh.elem_sizes, self.nu,
                                     thickness=self.thickness,
                                     gravity_accel=self.gravity)
        simp, mass = self.models()
        fixed_dofs, f_ext = resolve_boundary(mesh, self.boundary_spec())
        if fixed_dofs.size == 0:
            raise ConfigError(f"problem {self.name!r} has no fixed DOFs")
        filter_op = build_filter(mesh, self.filter_radius())
        return BuiltProblem(spec=self, mesh=mesh, kernel=kernel, simp=simp,
                            mass_model=mass, filter_op=filter_op,
                            fixed_dofs=fixed_dofs, f_ext=f_ext,
                            domain_volume=self.domain_volume)


@dataclass(frozen=True)
class BuiltProblem:
    """A problem spec resolved onto a concrete mesh, ready to optimize."""

    spec: ProblemSpec
    mesh: Mesh
    kernel: ElementKernel
    simp: SimpModel
    mass_model: MassDensityModel
    filter_op: FilterOperator
    fixed_dofs: np.ndarray
    f_ext: np.ndarray
    domain_volume: float


def _arch2d(name: str, nel: tuple[int, int], vf: float, eta_g: float,
            beta_g: float, move: float, filt: float) -> ProblemSpec:
    lx, ly = 2.0, 1.0
    return ProblemSpec(
        name=name, dim=2, lengths=(lx, ly), nel=nel,
        fixed=(FixedRegion(NodeSelector(x=0.0, y=0.0), (0, 1)),
               FixedRegion(NodeSelector(x=lx, y=0.0), (0, 1))),
        vf_star=vf, filter_mult=filt, eta_g=eta_g, beta_g=beta_g,
        move_limit=move)


def _builtins() -> dict[str, ProblemSpec]:
    specs = {}
    # self-weight loaded arch, both bottom corners pinned, no external load
    specs["arch2d_coarse"] = _arch2d("arch2d_coarse", (100, 50), 0.25,
                                     eta_g=0.01, beta_g=8.0, move=0.1, filt=2.5)
    specs["arch2d_fine"] = _arch2d("arch2d_fine", (200, 100), 0.25,
                                   eta_g=0.01, beta_g=8.0, move=0.1, filt=2.5)
    specs["arch2d_400"] = _arch2d("arch2d_400", (400, 200), 0.40,
                                  eta_g=0.1, beta_g=8.0, move=0.05, filt=3.5)

    # half MBB beam: symmetry rollers on the left edge, roller support at
    # the outer bottom corner, center load on the symmetry line
    lx, ly = 2.0, 1.0
    specs["mbb_half"] = ProblemSpec(
        name="mbb_half", dim=2, lengths=(lx, ly), nel=(320, 160),
        fixed=(FixedRegion(NodeSelector(x=lx, y=0.0), (1,)),),
        symmetry_faces=(SymmetryFace(axis=0, value=0.0),),
        load_rule="max_selfweight", load_at=NodeSelector(x=0.0, y=ly),
        load_direction=(0.0, -1.0), kappa=1.0,
        vf_star=0.25, filter_mult=3.0, eta_g=0.01, beta_g=8.0, move_limit=0.05)

    # half tower: outer bottom corner pinned, top-center load on the
    # symmetry line, load magnitude tied to the permitted self-weight
    lx, ly = 0.5, 2.5
    specs["tower2d"] = ProblemSpec(
        name="tower2d", dim=2, lengths=(lx, ly), nel=(110, 550),
        fixed=(FixedRegion(NodeSelector(x=lx, y=0.0), (0, 1)),),
        symmetry_faces=(SymmetryFace(axis=0, value=0.0),),
        load_rule="max_selfweight", load_at=NodeSelector(x=0.0, y=ly),
        load_direction=(0.0, -1.0), kappa=1.0,
        vf_star=0.25, filter_mult=5.6, eta_g=0.01, beta_g=8.0, move_limit=0.05)

    # house arch: square domain with a bottom-centered non-design void
    # opening, pinned at both bottom corners, self-weight only
    lx, ly = 2.0, 2.0
    specs["house_arch"] = ProblemSpec(
        name="house_arch", dim=2, lengths=(lx, ly), nel=(240, 240),
        fixed=(FixedRegion(NodeSelector(x=0.0, y=0.0), (0, 1)),
               FixedRegion(NodeSelector(x=lx, y=0.0), (0, 1))),
        void_boxes=(((lx / 2 - 7 * lx / 16, 0.0), (lx / 2 + 7 * lx / 16, ly / 2)),),
        vf_star=0.40, filter_mult=3.6, eta_g=0.01, beta_g=8.0, move_limit=0.05)

    # 3D arch: half domain cut at the span midplane, supported along the
    # full bottom edge of the outer end face, self-weight only
    lx, ly, lz = 1.0, 1.0, 1.0
    specs["arch3d"] = ProblemSpec(
        name="arch3d", dim=3, lengths=(lx, ly, lz), nel=(50, 50, 50),
        thickness=0.0,
        fixed=(FixedRegion(NodeSelector(x=0.0, z=0.0), (0, 1, 2)),),
        symmetry_faces=(SymmetryFace(axis=0, value=lx),),
        vf_star=0.35, filter_mult=4.8, eta_g=0.040, beta_g=12.0,
        move_limit=0.05)

    # 3D tower: quarter domain, two symmetry planes, outer bottom corner
    # pinned, central top load on the symmetry corner
    lx, ly, lz = 0.5, 0.5, 2.5
    specs["tower3d"] = ProblemSpec(
        name="tower3d", dim=3, lengths=(lx, ly, lz), nel=(40, 40, 200),
        thickness=0.0,
        fixed=(FixedRegion(NodeSelector(x=lx, y=ly, z=0.0), (0, 1, 2)),),
        symmetry_faces=(SymmetryFace(axis=0, value=0.0),
                        SymmetryFace(axis=1, value=0.0)),
        load_rule="max_selfweight", load_at=NodeSelector(x=0.0, y=0.0, z=lz),
        load_direction=(0.0, 0.0, -1.0), kappa=1.0,
        vf_star=0.1, filter_mult=2.0 * math.sqrt(3.0), eta_g=0.001, beta_g=8.0,
        move_limit=0.05)
    return specs


_REGISTRY = _builtins()


def builtin_names() -> tuple[str, ...]:
    return tuple(_REGISTRY)


def builtin(name: str) -> ProblemSpec:
    """Return a built-in benchmark by name; raises ConfigError otherwise."""
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ConfigError(
            f"unknown problem {name!r}; valid names: {', '.join(_REGISTRY)}"
        ) from None


def with_overrides(spec: ProblemSpec, overrides: dict) -> ProblemSpec:
    """Apply field overrides to a spec, type-checking field names."""
    if not overrides:
        return spec
    valid = set(spec.__dataclass_fields__)
    unknown = set(overrides) - valid
    if unknown:
        raise ConfigError(f"unknown spec fields in overrides: {sorted(unknown)}")
    return replace(spec, **{k: _coerce_field(spec, k, v)
                            for k, v in overrides.items()})


def _coerce_field(spec: ProblemSpec, key: str, value):
    current = getattr(spec, key)
    if key in ("nel",):
        return tuple(int(v) for v in _as_seq(value))
    if key in ("lengths", "load_direction"):
        return tuple(float(v) for v in _as_seq(value))
    if isinstance(current, bool):
        if isinstance(value, str):
            return value.lower() in ("1", "true", "yes", "on")
        return bool(value)
    if isinstance(current, int) and not isinstance(current, bool):
        return int(value)
    if isinstance(current, float):
        return float(value)
    return value


def _as_seq(value):
    if isinstance(value, str):
        return [v for v in value.replace(",", " ").split() if v]
    return value


# --- serialization ---------------------------------------------------------

def spec_to_dict(spec: ProblemSpec) -> dict:
    d = asdict(spec)
    d["fixed"] = [_region_to_dict(r) for r in spec.fixed]
    d["symmetry_faces"] = [{"axis": f.axis, "value": f.value}
                           for f in spec.symmetry_faces]
    d["load_at"] = _selector_to_dict(spec.load_at)
    d["nel"] = list(spec.nel)
    d["lengths"] = list(spec.lengths)
    d["load_direction"] = list(spec.load_direction)
    d["void_boxes"] = [[list(lo), list(hi)] for lo, hi in spec.void_boxes]
    d["solid_boxes"] = [[list(lo), list(hi)] for lo, hi in spec.solid_boxes]
    return d


def spec_from_dict(d: dict) -> ProblemSpec:
    d = dict(d)
    d["fixed"] = tuple(_region_from_dict(r) for r in d.get("fixed", ()))
    d["symmetry_faces"] = tuple(SymmetryFace(axis=int(f["axis"]),
                                             value=float(f["value"]))
                                for f in d.get("symmetry_faces", ()))
    d["load_at"] = _selector_from_dict(d.get("load_at"))
    d["nel"] = tuple(int(v) for v in d["nel"])
    d["lengths"] = tuple(float(v) for v in d["lengths"])
    d["load_direction"] = tuple(float(v) for v in d.get("load_direction", ()))
    d["void_boxes"] = tuple((tuple(lo), tuple(hi))
                            for lo, hi in d.get("void_boxes", ()))
    d["solid_boxes"] = tuple((tuple(lo), tuple(hi))
                             for lo, hi in d.get("solid_boxes", ()))
    try:
        return ProblemSpec(**d)
    except TypeError as exc:
        raise ConfigError(f"bad problem spec: {exc}") from exc


def _selector_to_dict(sel: NodeSelector | None) -> dict | None:
    if sel is None:
        return None
    return {k: v for k, v in (("x", sel.x), ("y", sel.y), ("z", sel.z))
            if v is not None}


def _selector_from_dict(d: dict | None) -> NodeSelector | None:
    if d is None:
        return None
    return NodeSelector(**{k: float(v) for k, v in d.items()})


def _region_to_dict(region: FixedRegion) -> dict:
    return {"at": _selector_to_dict(region.at),
            "components": list(region.components)}


def _region_from_dict(d: dict) -> FixedRegion:
    return FixedRegion(at=_selector_from_dict(d["at"]),
                       components=tuple(int(c) for c in d["components"]))
