"""Material interpolation laws.

Two element-wise laws map the physical density field to material
properties:

* a power-law (modified SIMP) interpolation for the Young's modulus,
  keeping a small nonzero void stiffness, and
* a smooth tanh-step interpolation for the mass density, so the gravity
  load of an element fades in/out continuously as its density evolves.

Both are pure functions of the physical density and are used by the FE
assembly and by the sensitivity analysis.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


def heaviside(v, eta: float, beta: float):
    """Smooth unit step on [0, 1].

    H(v) = [tanh(beta*eta) + tanh(beta*(v - eta))]
           / [tanh(beta*eta) + tanh(beta*(1 - eta))]

    ``eta`` positions the step, ``beta`` controls its slope. H(0) = 0 and
    H(1) = 1 exactly for any admissible parameters. Accepts scalars or
    arrays in ``v``.
    """
    _check_step_params(eta, beta)
    num = math.tanh(beta * eta) + np.tanh(beta * (np.asarray(v, dtype=float) - eta))
    den = math.tanh(beta * eta) + math.tanh(beta * (1.0 - eta))
    return num / den


def heaviside_deriv(v, eta: float, beta: float):
    """Derivative of :func:`heaviside` with respect to ``v``.

    Strictly positive everywhere; peaks at ``v = eta``.
    """
    _check_step_params(eta, beta)
    t = np.tanh(beta * (np.asarray(v, dtype=float) - eta))
    den = math.tanh(beta * eta) + math.tanh(beta * (1.0 - eta))
    return beta * (1.0 - t * t) / den


def _check_step_params(eta: float, beta: float) -> None:
    if beta <= 0.0:
        raise ParameterError(f"step sharpness must be positive, got beta={beta}")
    if not 0.0 <= eta <= 1.0:
        raise ParameterError(f"step position must lie in [0, 1], got eta={eta}")


@dataclass(frozen=True)
class SimpModel:
    """Power-law stiffness interpolation E(x) = E_v + (E_s - E_v) x^p.

    Defaults are structural steel with a 1e-6 stiffness contrast and
    penalty 3.
    """

    e_solid: float = 210e9
    e_void: float = 210e3
    penalty: float = 3.0

    def __post_init__(self):
        if not 0.0 < self.e_void < self.e_solid:
            raise ParameterError(
                f"need 0 < e_void < e_solid, got {self.e_void} / {self.e_solid}"
            )
        if self.penalty < 1.0:
            raise ParameterError(f"penalty must be >= 1, got {self.penalty}")

    @classmethod
    def from_contrast(cls, e_solid: float = 210e9, contrast: float = 1e-6,
                      penalty: float = 3.0) -> "SimpModel":
        return cls(e_solid=e_solid, e_void=contrast * e_solid, penalty=penalty)

    def young_modulus(self, xbar):
        """Young's modulus (Pa) for physical densities ``xbar``."""
        x = np.asarray(xbar, dtype=float)
        return self.e_void + (self.e_solid - self.e_void) * x ** self.penalty

    def young_modulus_deriv(self, xbar):
        """d E / d xbar (Pa)."""
        x = np.asarray(xbar, dtype=float)
        return self.penalty * (self.e_solid - self.e_void) * x ** (self.penalty - 1.0)


@dataclass(frozen=True)
class MassDensityModel:
    """Smooth-step mass density interpolation.

    gamma(x) = gamma_s * (chi + (1 - chi) * H(x, eta_g, beta_g))

    where ``chi`` is the void-to-solid density ratio. The derivative is
    the calculus-consistent gamma_s * (1 - chi) * H'(x): with the default
    chi = 1e-9 this is indistinguishable from dropping the (1 - chi)
    factor, but it is what finite differences of gamma() converge to.
    """

    gamma_solid: float = 7850.0
    contrast: float = 1e-9
    eta_g: float = 0.01
    beta_g: float = 8.0

    def __post_init__(self):
        if self.gamma_solid <= 0.0:
            raise ParameterError(f"gamma_solid must be positive, got {self.gamma_solid}")
        if not 0.0 <= self.contrast < 1.0:
            raise ParameterError(f"contrast must lie in [0, 1), got {self.contrast}")
        if not 0.0 <= self.eta_g < 1.0:
            raise ParameterError(f"eta_g must lie in [0, 1), got {self.eta_g}")
        if self.beta_g <= 0.0:
            raise ParameterError(f"beta_g must be positive, got {self.beta_g}")

    def mass_density(self, xbar):
        """Mass density (kg/m^3) for physical densities ``xbar``."""
        h = heaviside(xbar, self.eta_g, self.beta_g)
        return self.gamma_solid * (self.contrast + (1.0 - self.contrast) * h)

    def mass_density_deriv(self, xbar):
        """d gamma / d xbar (kg/m^3)."""
        dh = heaviside_deriv(xbar, self.eta_g, self.beta_g)
        return self.gamma_solid * (1.0 - self.contrast) * dh

    def recommendation_warnings(self, vf_star: float, penalty: float = 3.0) -> list[str]:
        """Parameter-choice warnings for a given volume fraction.

        The step position should sit below vf_star**p and the sharpness
        in roughly [5, 20]; outside that range optimization tends to get
        noisy. Returns the warning strings (empty when fine).
        """
        notes = []
        if self.eta_g > vf_star ** penalty:
            notes.append(
                f"eta_g={self.eta_g} exceeds vf_star**p={vf_star ** penalty:.4g}; "
                "the mass step sits too close to the starting design"
            )
        if not 5.0 <= self.beta_g <= 20.0:
            notes.append(
                f"beta_g={self.beta_g} outside the recommended range [5, 20]"
            )
        return notes

    def warn_if_unrecommended(self, vf_star: float, penalty: float = 3.0) -> None:
        for note in self.recommendation_warnings(vf_star, penalty):
            warnings.warn(note, stacklevel=2)
