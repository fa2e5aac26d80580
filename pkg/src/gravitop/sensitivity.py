"""Adjoint gradients of compliance and the two constraints.

Because the gravity load depends on the design, the compliance gradient
carries a load term in addition to the usual stiffness term:

    d f0 / d xbar_e = -u_e^T (dE_e ke0) u_e + 2 u_e^T (dgamma_e V_e lg)

The adjoint vector for the compliance objective is -2u, so no extra
solve is needed. All gradients here are with respect to the physical
field; the caller maps them back through the field chain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import ElementKernel
from .material import MassDensityModel, SimpModel
from .mesh import Mesh


@dataclass(frozen=True)
class GradientBundle:
    """Design-space gradients of the objective and constraints; entries of
    non-design elements are exactly zero."""

    d_f0_dx: np.ndarray
    d_g1_dx: np.ndarray
    d_g2_dx: np.ndarray | None = None


def objective_gradient(mesh: Mesh, kernel: ElementKernel, simp: SimpModel,
                       mass_model: MassDensityModel, x_bar: np.ndarray,
                       u: np.ndarray, frozen_loads: bool = False) -> np.ndarray:
    """Compliance gradient with respect to the physical densities.

    With ``frozen_loads`` the load term is dropped, which restores the
    classical everywhere-nonpositive compliance gradient; used only to
    cross-check the sign structure in tests.
    """
    ue = u[mesh.edof]                                   # (nel, dofs/elem)
    ce = np.einsum("ij,jk,ik->i", ue, kernel.ke0, ue)   # u_e^T ke0 u_e
    grad = -simp.young_modulus_deriv(x_bar) * ce
    if not frozen_loads:
        dgamma = mass_model.mass_density_deriv(x_bar)
        grad = grad + 2.0 * dgamma * mesh.elem_volume * (ue @ kernel.lg)
    return grad


def g1_value_and_gradient(x_bar: np.ndarray,
                          v_star: float) -> tuple[float, np.ndarray]:
    """Volume constraint in normalized <= 0 form: sum(xbar)/V* - 1.

    ``v_star`` counts permitted volume in elements (vf_star * nel).
    """
    value = float(np.sum(x_bar) / v_star - 1.0)
    grad = np.full(x_bar.shape, 1.0 / v_star)
    return value, grad


def g2_value_and_gradient(mesh: Mesh, mass_model: MassDensityModel,
                          x_bar: np.ndarray,
                          m_max: float) -> tuple[float, np.ndarray]:
    """Implicit mass lower bound in normalized <= 0 form.

    Requires the current structural mass to stay above ``m_max``:
    (m_max - sum_e V_e gamma_e) / m_max <= 0. Keeping this satisfied
    stops the optimizer from shedding material below the permitted
    volume when self-weight dominates.
    """
    mass = mesh.elem_volume * float(np.sum(mass_model.mass_density(x_bar)))
    value = (m_max - mass) / m_max
    grad = -mesh.elem_volume * mass_model.mass_density_deriv(x_bar) / m_max
    return value, grad
