"""Quick numerical self-checks behind ``gravitop validate``.

Each check returns (name, passed, detail). They are deliberately small:
a few seconds in total, suitable for sanity-checking an installation.
"""

from __future__ import annotations

import numpy as np

from .fem import analyze, compliance
from .field_chain import FieldChain, build_filter
from .material import heaviside, heaviside_deriv
from .mesh import build_mesh
from .optimizer import MmaOptimizer
from .problems import builtin, with_overrides
from .sensitivity import objective_gradient


def run_selfchecks() -> list[tuple[str, bool, str]]:
    return [
        _check_step_function(),
        _check_filter_rows(),
        _check_projection_endpoints(),
        _check_gradient_fd(),
        _check_mma_scalar(),
        _check_mma_two_variable(),
    ]


def _check_step_function():
    vs = np.array([0.05, 0.3, 0.9])
    h = 1e-6
    fd = (heaviside(vs + h, 0.2, 8.0) - heaviside(vs - h, 0.2, 8.0)) / (2 * h)
    an = heaviside_deriv(vs, 0.2, 8.0)
    err = float(np.max(np.abs(fd - an) / np.abs(fd)))
    return ("step-function derivative", err < 1e-6, f"max rel err {err:.2e}")


def _check_filter_rows():
    mesh = build_mesh(2, (15, 9), (1.5, 0.9), 0.01)
    op = build_filter(mesh, 2.5 * mesh.hx)
    rows = np.asarray(op.matrix.sum(axis=1)).ravel()
    err = float(np.max(np.abs(rows - 1.0)))
    neg = float(op.matrix.data.min())
    ok = err < 1e-12 and neg >= 0.0
    return ("filter row-stochastic", ok, f"row-sum err {err:.2e}, min w {neg:.2e}")


def _check_projection_endpoints():
    from .field_chain import project

    vals = [abs(float(project(0.0, b))) + abs(float(project(1.0, b)) - 1.0)
            for b in (1.0, 8.0, 256.0)]
    err = max(vals)
    return ("projection endpoints", err < 1e-14, f"max endpoint err {err:.2e}")


def _check_gradient_fd():
    spec = with_overrides(builtin("arch2d_coarse"), {"nel": (6, 4)})
    built = spec.build()
    mesh = built.mesh
    chain = FieldChain(mesh, built.filter_op, beta=2.0)
    rng = np.random.default_rng(7)
    x = rng.uniform(0.15, 0.85, mesh.nel)

    def f0_of(xd):
        xb = chain.set_design(xd, 2.0)
        st = analyze(mesh, built.kernel, built.simp, built.mass_model, xb,
                     built.fixed_dofs, built.f_ext, spec.kappa)
        return compliance(st.displacement, st.f_gravity, st.f_external,
                          spec.kappa)

    xb = chain.set_design(x, 2.0)
    st = analyze(mesh, built.kernel, built.simp, built.mass_model, xb,
                 built.fixed_dofs, built.f_ext, spec.kappa)
    g_an = chain.map_gradient(objective_gradient(
        mesh, built.kernel, built.simp, built.mass_model, xb, st.displacement))
    h = 1e-6
    g_fd = np.zeros(mesh.nel)
    for e in range(mesh.nel):
        xp = x.copy(); xp[e] += h
        xm = x.copy(); xm[e] -= h
        g_fd[e] = (f0_of(xp) - f0_of(xm)) / (2 * h)
    err = float(np.max(np.abs(g_an - g_fd)) / np.max(np.abs(g_fd)))
    return ("compliance gradient vs FD", err < 1e-5, f"max rel err {err:.2e}")


def _check_mma_scalar():
    # min (x-1)^2 s.t. x <= 0.5 on [0,1]: optimum at the constraint
    mma = MmaOptimizer(n=1, m=1, move=0.2)
    x = np.array([0.1])
    for _ in range(50):
        df0 = 2.0 * (x - 1.0)
        x = mma.step(x, df0, np.array([x[0] - 0.5]), np.array([[1.0]]))
    err = abs(x[0] - 0.5)
    return ("MMA scalar problem", err < 1e-6, f"|x - 0.5| = {err:.2e}")


def _check_mma_two_variable():
    # min x1+x2 s.t. 1/x1 + 1/x2 <= 4 on [0.1, 1]^2: symmetric optimum 0.5
    mma = MmaOptimizer(n=2, m=1, move=0.2, xmin=0.1, xmax=1.0)
    x = np.array([0.9, 0.3])
    for _ in range(100):
        con = np.array([1.0 / x[0] + 1.0 / x[1] - 4.0])
        dcon = np.array([[-1.0 / x[0] ** 2, -1.0 / x[1] ** 2]])
        x = mma.step(x, np.ones(2), con, dcon)
    err = float(np.max(np.abs(x - 0.5)))
    return ("MMA two-variable problem", err < 1e-4, f"max |x - 0.5| = {err:.2e}")
