"""Outer optimization loop and the MMA subproblem solver.

The Method of Moving Asymptotes builds a separable convex approximation
around the current iterate and solves its dual with a primal-dual
interior-point Newton method. Asymptotes adapt to iterate oscillation;
an external move limit additionally boxes every step. The loop runs a
fixed iteration budget with the projection sharpness doubled every 25
iterations, mirroring the continuation schedule of the field chain.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import AnalysisError, OptimizerError
from .fem import Assembler, analyze, compliance
from .field_chain import FieldChain, build_filter, continuation_step
from .problems import BuiltProblem, ProblemSpec
from .sensitivity import (g1_value_and_gradient, g2_value_and_gradient,
                          objective_gradient)


class MmaOptimizer:
    """Method of Moving Asymptotes with per-variable box bounds in [0, 1].

    Standard asymptote heuristics: initial span 0.5 of the variable
    range, grown by 1.2 / shrunk by 0.7 on oscillation. The ``move``
    parameter is the external move limit applied on top of the
    asymptote-derived bounds.
    """

    def __init__(self, n: int, m: int, move: float = 0.1,
                 xmin: float = 0.0, xmax: float = 1.0,
                 asyinit: float = 0.5, asyincr: float = 1.2,
                 asydecr: float = 0.7):
        self.n = n
        self.m = m
        self.move = move
        self.xmin = np.full(n, xmin)
        self.xmax = np.full(n, xmax)
        self.asyinit = asyinit
        self.asyincr = asyincr
        self.asydecr = asydecr
        self.low = np.zeros(n)
        self.upp = np.ones(n)
        self.x_prev1 = np.zeros(n)
        self.x_prev2 = np.zeros(n)
        self.iteration = 0
        # feasibility weights: large c keeps the artificial slack variables
        # at zero unless the subproblem would otherwise be infeasible
        self.a0 = 1.0
        self.a = np.zeros(m)
        self.c = np.full(m, 1000.0)
        self.d = np.ones(m)

    def step(self, x: np.ndarray, df0: np.ndarray, fval: np.ndarray,
             dfdx: np.ndarray) -> np.ndarray:
        """One MMA iteration; returns the next iterate."""
        if not (np.all(np.isfinite(df0)) and np.all(np.isfinite(dfdx))
                and np.all(np.isfinite(fval))):
            raise OptimizerError("non-finite objective/constraint gradients")
        x = np.asarray(x, dtype=float)
        fval = np.atleast_1d(np.asarray(fval, dtype=float))
        dfdx = np.atleast_2d(np.asarray(dfdx, dtype=float))
        if dfdx.shape != (self.m, self.n):
            raise OptimizerError(f"constraint gradient shape {dfdx.shape}, "
                                 f"expected {(self.m, self.n)}")
        self.iteration += 1
        xrange = self.xmax - self.xmin

        if self.iteration <= 2:
            self.low = x - self.asyinit * xrange
            self.upp = x + self.asyinit * xrange
        else:
            zzz = (x - self.x_prev1) * (self.x_prev1 - self.x_prev2)
            factor = np.ones(self.n)
            factor[zzz > 0] = self.asyincr
            factor[zzz < 0] = self.asydecr
            self.low = x - factor * (self.x_prev1 - self.low)
            self.upp = x + factor * (self.upp - self.x_prev1)
            self.low = np.clip(self.low, x - 10.0 * xrange, x - 0.01 * xrange)
            self.upp = np.clip(self.upp, x + 0.01 * xrange, x + 10.0 * xrange)

        albefa = 0.1
        alfa = np.maximum.reduce([self.low + albefa * (x - self.low),
                                  x - self.move * xrange, self.xmin])
        beta = np.minimum.reduce([self.upp - albefa * (self.upp - x),
                                  x + self.move * xrange, self.xmax])

        xmami = np.maximum(xrange, 1e-5)
        ux1 = self.upp - x
        xl1 = x - self.low
        raa0 = 1e-5
        p0 = np.maximum(df0, 0.0)
        q0 = np.maximum(-df0, 0.0)
        pq0 = 0.001 * (p0 + q0) + raa0 / xmami
        p0 = (p0 + pq0) * ux1 ** 2
        q0 = (q0 + pq0) * xl1 ** 2
        P = np.maximum(dfdx, 0.0)
        Q = np.maximum(-dfdx, 0.0)
        PQ = 0.001 * (P + Q) + raa0 / xmami[None, :]
        P = (P + PQ) * (ux1 ** 2)[None, :]
        Q = (Q + PQ) * (xl1 ** 2)[None, :]
        b = P @ (1.0 / ux1) + Q @ (1.0 / xl1) - fval

        x_new = _subsolve(self.m, self.n, self.low, self.upp, alfa, beta,
                          p0, q0, P, Q, self.a0, self.a, b, self.c, self.d)
        self.x_prev2 = self.x_prev1
        self.x_prev1 = x.copy()
        return x_new


def _subsolve(m, n, low, upp, alfa, beta, p0, q0, P, Q, a0, a, b, c, d,
              epsimin: float = 1e-7) -> np.ndarray:
    """Primal-dual Newton solve of the separable MMA subproblem."""
    epsi = 1.0
    x = 0.5 * (alfa + beta)
    y = np.ones(m)
    z = 1.0
    lam = np.ones(m)
    xsi = np.maximum(1.0 / (x - alfa), 1.0)
    eta = np.maximum(1.0 / (beta - x), 1.0)
    mu = np.maximum(1.0, 0.5 * c)
    zet = 1.0
    s = np.ones(m)

    def residuals(x, y, z, lam, xsi, eta, mu, zet, s, epsi):
        ux1 = upp - x
        xl1 = x - low
        plam = p0 + P.T @ lam
        qlam = q0 + Q.T @ lam
        gvec = P @ (1.0 / ux1) + Q @ (1.0 / xl1)
        rex = plam / ux1 ** 2 - qlam / xl1 ** 2 - xsi + eta
        rey = c + d * y - mu - lam
        rez = a0 - zet - a @ lam
        relam = gvec - a * z - y + s - b
        rexsi = xsi * (x - alfa) - epsi
        reeta = eta * (beta - x) - epsi
        remu = mu * y - epsi
        rezet = zet * z - epsi
        res = lam * s - epsi
        r = np.concatenate([rex, rey, [rez], relam, rexsi, reeta, remu,
                            [rezet], res])
        return r, np.linalg.norm(r), np.max(np.abs(r))

    _, residunorm, residumax = residuals(x, y, z, lam, xsi, eta, mu, zet, s, epsi)
    while epsi > epsimin:
        ittt = 0
        while residumax > 0.9 * epsi and ittt < 200:
            ittt += 1
            ux1 = upp - x
            xl1 = x - low
            ux2 = ux1 ** 2
            xl2 = xl1 ** 2
            plam = p0 + P.T @ lam
            qlam = q0 + Q.T @ lam
            gvec = P @ (1.0 / ux1) + Q @ (1.0 / xl1)
            GG = P / ux2[None, :] - Q / xl2[None, :]
            delx = plam / ux2 - qlam / xl2 - epsi / (x - alfa) + epsi / (beta - x)
            dely = c + d * y - lam - epsi / y
            delz = a0 - a @ lam - epsi / z
            dellam = gvec - a * z - y - b + epsi / lam
            diagx = 2.0 * (plam / (ux2 * ux1) + qlam / (xl2 * xl1)) \
                + xsi / (x - alfa) + eta / (beta - x)
            diagy = d + mu / y
            diaglamyi = s / lam + 1.0 / diagy

            # m << n here, so condense onto the (m+1) dual unknowns
            blam = dellam + dely / diagy - GG @ (delx / diagx)
            AA = np.empty((m + 1, m + 1))
            AA[:m, :m] = np.diag(diaglamyi) + (GG / diagx[None, :]) @ GG.T
            AA[:m, m] = a
            AA[m, :m] = a
            AA[m, m] = -zet / z
            bb = np.concatenate([blam, [delz]])
            try:
                solut = np.linalg.solve(AA, bb)
            except np.linalg.LinAlgError as exc:
                raise OptimizerError(f"MMA dual system singular: {exc}") from exc
            dlam = solut[:m]
            dz = solut[m]
            dx = -delx / diagx - (GG.T @ dlam) / diagx
            dy = -dely / diagy + dlam / diagy
            dxsi = -xsi + epsi / (x - alfa) - (xsi * dx) / (x - alfa)
            deta = -eta + epsi / (beta - x) + (eta * dx) / (beta - x)
            dmu = -mu + epsi / y - (mu * dy) / y
            dzet = -zet + epsi / z - zet * dz / z
            ds = -s + epsi / lam - (s * dlam) / lam

            ww = np.concatenate([y, [z], lam, xsi, eta, mu, [zet], s])
            dww = np.concatenate([dy, [dz], dlam, dxsi, deta, dmu, [dzet], ds])
            stmxx = np.max(-1.01 * dww / ww)
            stmalfa = np.max(-1.01 * dx / (x - alfa))
            stmbeta = np.max(1.01 * dx / (beta - x))
            steg = 1.0 / max(stmxx, stmalfa, stmbeta, 1.0)

            xold, yold, zold = x, y, z
            lamold, xsiold, etaold = lam, xsi, eta
            muold, zetold, sold = mu, zet, s
            resinew = 2.0 * residunorm
            itto = 0
            while resinew > residunorm and itto < 50:
                itto += 1
                x = xold + steg * dx
                y = yold + steg * dy
                z = zold + steg * dz
                lam = lamold + steg * dlam
                xsi = xsiold + steg * dxsi
                eta = etaold + steg * deta
                mu = muold + steg * dmu
                zet = zetold + steg * dzet
                s = sold + steg * ds
                _, resinew, residumax = residuals(x, y, z, lam, xsi, eta, mu,
                                                  zet, s, epsi)
                steg *= 0.5
            residunorm = resinew
        epsi *= 0.1
    return x


@dataclass
class RunHistory:
    """Per-iteration records of one optimization run."""

    iteration: list[int] = field(default_factory=list)
    f0: list[float] = field(default_factory=list)
    vol_frac: list[float] = field(default_factory=list)
    g1: list[float] = field(default_factory=list)
    g2: list[float] = field(default_factory=list)
    beta: list[float] = field(default_factory=list)
    max_change: list[float] = field(default_factory=list)
    max_abs_u: list[float] = field(default_factory=list)
    cg_iterations: list[int] = field(default_factory=list)

    def append(self, iteration, f0, vol_frac, g1, g2, beta, max_change,
               max_abs_u, cg_iterations):
        self.iteration.append(iteration)
        self.f0.append(f0)
        self.vol_frac.append(vol_frac)
        self.g1.append(g1)
        self.g2.append(g2)
        self.beta.append(beta)
        self.max_change.append(max_change)
        self.max_abs_u.append(max_abs_u)
        self.cg_iterations.append(cg_iterations)

    def __len__(self) -> int:
        return len(self.iteration)


@dataclass
class RunOptions:
    n_iter: int = 250
    g2_enabled: bool | None = None    # None: use the problem's setting
    cg_tol: float = 1e-8
    beta_init: float = 1.0
    beta_max: float = 256.0
    beta_period: int = 25
    objective_scale: float = 100.0    # MMA conditioning only; history is unscaled
    change_tol: float | None = None   # optional early exit, off by default
    callback: object = None           # callable(iteration, history, chain)


@dataclass
class RunResult:
    history: RunHistory
    chain: FieldChain
    x: np.ndarray            # final design field
    x_bar: np.ndarray        # final physical field (matches last history row)
    built: BuiltProblem
    elapsed: float
    g2_enabled: bool


def run(problem: ProblemSpec | BuiltProblem,
        options: RunOptions | None = None) -> RunResult:
    """Run the full optimization loop on a problem.

    The design starts uniform at the permitted volume fraction. Raises
    :class:`AnalysisError`/:class:`OptimizerError` tagged with the
    iteration index on failure.
    """
    options = options or RunOptions()
    built = problem.build() if isinstance(problem, ProblemSpec) else problem
    spec = built.spec
    mesh = built.mesh
    g2_on = spec.g2_enabled if options.g2_enabled is None else options.g2_enabled

    chain = FieldChain(mesh, built.filter_op)
    assembler = Assembler(mesh)
    design = mesh.design_mask()
    n_free = int(design.sum())
    m = 2 if g2_on else 1
    mma = MmaOptimizer(n=n_free, m=m, move=spec.move_limit)

    x = chain.pin(np.full(mesh.nel, spec.vf_star))
    v_star = spec.vf_star * mesh.nel
    m_max = built.domain_volume * built.mass_model.gamma_solid * spec.vf_star

    history = RunHistory()
    x_bar_final = None
    t_start = time.perf_counter()
    for it in range(1, options.n_iter + 1):
        try:
            beta = continuation_step(it, options.beta_init, options.beta_max,
                                     options.beta_period)
            x_bar = chain.set_design(x, beta)
            state = analyze(mesh, built.kernel, built.simp, built.mass_model,
                            x_bar, built.fixed_dofs, built.f_ext, spec.kappa,
                            assembler=assembler, cg_tol=options.cg_tol)
            f0 = compliance(state.displacement, state.f_gravity,
                            state.f_external, spec.kappa)
            if not np.isfinite(f0):
                raise AnalysisError(f"non-finite compliance {f0}")

            df0_dxbar = objective_gradient(mesh, built.kernel, built.simp,
                                           built.mass_model, x_bar,
                                           state.displacement)
            df0_dx = chain.map_gradient(df0_dxbar)
            g1_val, dg1_dxbar = g1_value_and_gradient(x_bar, v_star)
            dg1_dx = chain.map_gradient(dg1_dxbar)
            con_vals = [g1_val]
            con_grads = [dg1_dx[design]]
            if g2_on:
                g2_val, dg2_dxbar = g2_value_and_gradient(mesh, built.mass_model,
                                                          x_bar, m_max)
                con_vals.append(g2_val)
                con_grads.append(chain.map_gradient(dg2_dxbar)[design])
            else:
                g2_val = float("nan")

            prev = x[design]
            history.append(
                iteration=it, f0=f0, vol_frac=float(np.mean(x_bar)),
                g1=g1_val, g2=g2_val, beta=beta,
                max_change=(float(np.max(np.abs(prev - mma.x_prev1)))
                            if it > 1 else 0.0),
                max_abs_u=float(np.max(np.abs(state.displacement))),
                cg_iterations=state.cg_iterations)
            x_bar_final = x_bar

            if options.callback is not None:
                options.callback(it, history, chain)
            if it == options.n_iter:
                break

            x_free = mma.step(prev,
                              options.objective_scale * df0_dx[design],
                              np.asarray(con_vals),
                              np.vstack(con_grads),
                              )
            step_size = float(np.max(np.abs(x_free - prev)))
            x = x.copy()
            x[design] = x_free
            if options.change_tol is not None and step_size < options.change_tol:
                break
        except (AnalysisError, OptimizerError) as exc:
            raise type(exc)(f"iteration {it}: {exc}") from exc

    return RunResult(history=history, chain=chain, x=x.copy(),
                     x_bar=x_bar_final.copy(), built=built,
                     elapsed=time.perf_counter() - t_start, g2_enabled=g2_on)
