"""Finite element kernels, assembly and linear solves.

Plane-stress Q4 elements in 2D and trilinear H8 elements in 3D, both
integrated with full Gauss quadrature on the actual element geometry.
Gravity enters as an equal per-node split of the element weight. Fixed
DOFs are eliminated by reduction (rows/columns removed), which keeps the
reduced operator positive definite for the iterative solver. 2D systems
go through a sparse Cholesky/LU factorization; 3D systems use conjugate
gradients preconditioned with a zero-fill incomplete Cholesky factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AnalysisError, ParameterError
from .material import MassDensityModel, SimpModel
from .mesh import Mesh

GRAVITY_ACCEL = -9.81  # m/s^2, acts along -y (2D) or -z (3D)

_GP = (-1.0 / np.sqrt(3.0), 1.0 / np.sqrt(3.0))


@dataclass(frozen=True)
class ElementKernel:
    """Reference element operators for unit Young's modulus."""

    dim: int
    ke0: np.ndarray          # (8,8) or (24,24) stiffness for E=1
    lg: np.ndarray           # gravity stencil: g/4 (2D) or g/8 (3D) per node
    nu: float
    gravity_accel: float = GRAVITY_ACCEL


def reference_stiffness(dim: int, elem_size: tuple[float, ...], nu: float,
                        thickness: float = 1.0,
                        gravity_accel: float = GRAVITY_ACCEL) -> ElementKernel:
    """Integrate the reference stiffness and build the gravity stencil.

    ``elem_size`` is (hx, hy) or (hx, hy, hz). 2D uses plane stress with
    the given thickness; 3D ignores it.
    """
    if not 0.0 < nu < 0.5:
        raise ParameterError(f"Poisson ratio must lie in (0, 0.5), got {nu}")
    if dim == 2:
        ke0 = _q4_stiffness(elem_size[0], elem_size[1], nu, thickness)
        lg = np.zeros(8)
        lg[1::2] = gravity_accel / 4.0
    elif dim == 3:
        ke0 = _h8_stiffness(elem_size[0], elem_size[1], elem_size[2], nu)
        lg = np.zeros(24)
        lg[2::3] = gravity_accel / 8.0
    else:
        raise ParameterError(f"dim must be 2 or 3, got {dim}")
    ke0 = 0.5 * (ke0 + ke0.T)
    ke0.setflags(write=False)
    lg.setflags(write=False)
    return ElementKernel(dim=dim, ke0=ke0, lg=lg, nu=nu, gravity_accel=gravity_accel)


def _q4_stiffness(hx: float, hy: float, nu: float, t: float) -> np.ndarray:
    d = np.array([[1.0, nu, 0.0],
                  [nu, 1.0, 0.0],
                  [0.0, 0.0, (1.0 - nu) / 2.0]]) / (1.0 - nu * nu)
    ke = np.zeros((8, 8))
    for xi in _GP:
        for et in _GP:
            dn = 0.25 * np.array([
                [-(1 - et), (1 - et), (1 + et), -(1 + et)],
                [-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)]])
            # rectangle: diagonal Jacobian
            dndx = dn[0] * 2.0 / hx
            dndy = dn[1] * 2.0 / hy
            b = np.zeros((3, 8))
            b[0, 0::2] = dndx
            b[1, 1::2] = dndy
            b[2, 0::2] = dndy
            b[2, 1::2] = dndx
            ke += b.T @ d @ b * (hx * hy / 4.0) * t
    return ke


def _h8_stiffness(hx: float, hy: float, hz: float, nu: float) -> np.ndarray:
    c = np.zeros((6, 6))
    c[:3, :3] = nu
    np.fill_diagonal(c[:3, :3], 1.0 - nu)
    c[3:, 3:] = np.eye(3) * (1.0 - 2.0 * nu) / 2.0
    c /= (1.0 + nu) * (1.0 - 2.0 * nu)
    ke = np.zeros((24, 24))
    for xi in _GP:
        for et in _GP:
            for ze in _GP:
                dn = 0.125 * np.array([
                    [-(1 - et) * (1 - ze), (1 - et) * (1 - ze),
                     (1 + et) * (1 - ze), -(1 + et) * (1 - ze),
                     -(1 - et) * (1 + ze), (1 - et) * (1 + ze),
                     (1 + et) * (1 + ze), -(1 + et) * (1 + ze)],
                    [-(1 - xi) * (1 - ze), -(1 + xi) * (1 - ze),
                     (1 + xi) * (1 - ze), (1 - xi) * (1 - ze),
                     -(1 - xi) * (1 + ze), -(1 + xi) * (1 + ze),
                     (1 + xi) * (1 + ze), (1 - xi) * (1 + ze)],
                    [-(1 - xi) * (1 - et), -(1 + xi) * (1 - et),
                     -(1 + xi) * (1 + et), -(1 - xi) * (1 + et),
                     (1 - xi) * (1 - et), (1 + xi) * (1 - et),
                     (1 + xi) * (1 + et), (1 - xi) * (1 + et)]])
                dndx = dn[0] * 2.0 / hx
                dndy = dn[1] * 2.0 / hy
                dndz = dn[2] * 2.0 / hz
                b = np.zeros((6, 24))
                b[0, 0::3] = dndx
                b[1, 1::3] = dndy
                b[2, 2::3] = dndz
                b[3, 0::3] = dndy
                b[3, 1::3] = dndx
                b[4, 1::3] = dndz
                b[4, 2::3] = dndy
                b[5, 0::3] = dndz
                b[5, 2::3] = dndx
                ke += b.T @ c @ b * (hx * hy * hz / 8.0)
    return ke


class Assembler:
    """Caches the COO scatter indices of a mesh for repeated assemblies."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        ndpe = mesh.edof.shape[1]
        self.rows = np.repeat(mesh.edof, ndpe, axis=1).ravel()
        self.cols = np.tile(mesh.edof, (1, ndpe)).ravel()

    def stiffness(self, kernel: ElementKernel, simp: SimpModel,
                  x_bar: np.ndarray) -> sp.csc_matrix:
        e_mod = simp.young_modulus(x_bar)
        vals = (kernel.ke0.ravel()[None, :] * e_mod[:, None]).ravel()
        k = sp.coo_matrix((vals, (self.rows, self.cols)),
                          shape=(self.mesh.ndof, self.mesh.ndof))
        return k.tocsc()


def assemble_stiffness(mesh: Mesh, kernel: ElementKernel, simp: SimpModel,
                       x_bar: np.ndarray) -> sp.csc_matrix:
    """Global stiffness K(x_bar) with SIMP-interpolated moduli (full size;
    fixed DOFs are removed later inside the solve)."""
    return Assembler(mesh).stiffness(kernel, simp, x_bar)


def assemble_gravity(mesh: Mesh, kernel: ElementKernel,
                     mass_model: MassDensityModel,
                     x_bar: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Self-weight load vector and its per-element derivative scale.

    Returns ``(f_g, df_scale)`` where f_g is the global gravity load and
    ``df_scale[e] * kernel.lg`` is the derivative of element e's load
    stencil with respect to its physical density.
    """
    gamma = mass_model.mass_density(x_bar)
    nz = np.nonzero(kernel.lg)[0]
    weight = kernel.lg[nz[0]]  # equal split: every carrying slot holds g/nodes
    per_node = gamma * mesh.elem_volume * weight
    f_g = np.bincount(mesh.edof[:, nz].ravel(),
                      weights=np.repeat(per_node, nz.size),
                      minlength=mesh.ndof)
    df_scale = mass_model.mass_density_deriv(x_bar) * mesh.elem_volume
    return f_g, df_scale


@dataclass
class FeState:
    """Assembled operators and solution of one analysis."""

    stiffness: sp.csc_matrix
    f_gravity: np.ndarray
    f_external: np.ndarray
    kappa: float
    displacement: np.ndarray
    gravity_accel: float = GRAVITY_ACCEL
    cg_iterations: int = 0

    @property
    def load(self) -> np.ndarray:
        return self.f_gravity + self.kappa * self.f_external


def compliance(u: np.ndarray, f_g: np.ndarray, f_ext: np.ndarray,
               kappa: float) -> float:
    """Structural compliance (F_g + kappa*F_ext)^T u, in N*m."""
    return float((f_g + kappa * f_ext) @ u)


def solve_system(k_full: sp.csc_matrix, rhs: np.ndarray,
                 fixed_dofs: np.ndarray, dim: int,
                 cg_tol: float = 1e-8,
                 cg_maxiter: int | None = None) -> tuple[np.ndarray, int]:
    """Solve K u = rhs with fixed DOFs eliminated by reduction.

    Returns the full-length displacement (zeros at fixed DOFs) and the CG
    iteration count (0 for direct solves). Raises
    :class:`~gravitop.errors.AnalysisError` on singular systems or CG
    non-convergence.
    """
    ndof = k_full.shape[0]
    free = np.setdiff1d(np.arange(ndof), fixed_dofs, assume_unique=False)
    if free.size == 0:
        raise AnalysisError("all DOFs are fixed")
    k_red = k_full[free][:, free]
    b = rhs[free]
    u = np.zeros(ndof)
    if not np.any(b):
        return u, 0
    if dim == 2:
        u_red = _solve_direct(k_red.tocsc(), b)
        iters = 0
    else:
        u_red, iters = _solve_pcg(k_red.tocsr(), b, cg_tol, cg_maxiter)
    res = np.linalg.norm(k_red @ u_red - b) / np.linalg.norm(b)
    if not np.isfinite(res) or res > max(cg_tol, 1e-7):
        raise AnalysisError(
            f"linear solve residual {res:.3e} exceeds tolerance; "
            "system is likely singular or ill-conditioned")
    u[free] = u_red
    return u, iters


def _solve_direct(k_red: sp.csc_matrix, b: np.ndarray) -> np.ndarray:
    try:
        import cvxopt
        import cvxopt.cholmod

        coo = k_red.tocoo()
        kcv = cvxopt.spmatrix(coo.data, coo.row.astype(int), coo.col.astype(int))
        sol = cvxopt.matrix(b)
        cvxopt.cholmod.linsolve(kcv, sol)
        return np.asarray(sol).ravel()
    except ImportError:
        pass
    except ArithmeticError as exc:  # cholmod raises on non-positive-definite
        raise AnalysisError(f"sparse Cholesky factorization failed: {exc}") from exc
    try:
        lu = spla.splu(k_red, permc_spec="MMD_AT_PLUS_A",
                       options=dict(SymmetricMode=True))
        return lu.solve(b)
    except RuntimeError as exc:
        raise AnalysisError(f"sparse factorization failed: {exc}") from exc


def _solve_pcg(k_red: sp.csr_matrix, b: np.ndarray, tol: float,
               maxiter: int | None) -> tuple[np.ndarray, int]:
    from . import _ichol

    n = k_red.shape[0]
    if maxiter is None:
        maxiter = int(10 * np.sqrt(n)) + 1
    k_red.sort_indices()
    lower = sp.tril(k_red, format="csr")
    lower.sort_indices()

    shift = 0.0
    lx, bad = _ichol.ic0_factor(n, lower.indptr, lower.indices, lower.data, shift)
    while bad >= 0:
        shift = max(2.0 * shift, 1e-3)
        if shift > 1.0:
            raise AnalysisError("incomplete Cholesky failed even with heavy shifting; "
                                "reduced stiffness is not positive definite")
        lx, bad = _ichol.ic0_factor(n, lower.indptr, lower.indices, lower.data, shift)

    def precond(r: np.ndarray) -> np.ndarray:
        y = _ichol.solve_lower(n, lower.indptr, lower.indices, lx, r)
        return _ichol.solve_lower_transpose(n, lower.indptr, lower.indices, lx, y)

    norm_b = np.linalg.norm(b)
    x = np.zeros(n)
    r = b.copy()
    z = precond(r)
    p = z.copy()
    rz = r @ z
    iters = 0
    while iters < maxiter:
        kp = k_red @ p
        pkp = p @ kp
        if pkp <= 0.0 or not np.isfinite(pkp):
            raise AnalysisError(
                f"CG breakdown at iteration {iters}: p^T K p = {pkp:.3e}")
        alpha = rz / pkp
        x += alpha * p
        r -= alpha * kp
        iters += 1
        if np.linalg.norm(r) <= tol * norm_b:
            # recurrence residual can drift; accept only on the true one
            r = b - k_red @ x
            if np.linalg.norm(r) <= tol * norm_b:
                return x, iters
        z = precond(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = np.linalg.norm(b - k_red @ x) / norm_b
    raise AnalysisError(
        f"CG did not reach relative residual {tol:.1e} in {maxiter} iterations "
        f"(achieved {res:.3e})")


def analyze(mesh: Mesh, kernel: ElementKernel, simp: SimpModel,
            mass_model: MassDensityModel, x_bar: np.ndarray,
            fixed_dofs: np.ndarray, f_ext: np.ndarray, kappa: float,
            assembler: Assembler | None = None,
            cg_tol: float = 1e-8) -> FeState:
    """Assemble and solve one equilibrium state at the given design."""
    assembler = assembler if assembler is not None else Assembler(mesh)
    k = assembler.stiffness(kernel, simp, x_bar)
    f_g, _ = assemble_gravity(mesh, kernel, mass_model, x_bar)
    rhs = f_g + kappa * f_ext
    u, iters = solve_system(k, rhs, fixed_dofs, mesh.dim, cg_tol=cg_tol)
    return FeState(stiffness=k, f_gravity=f_g, f_external=f_ext, kappa=kappa,
                   displacement=u, cg_iterations=iters)
