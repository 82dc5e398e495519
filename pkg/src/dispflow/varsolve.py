"""Non-convex displacement-correction energies and the lagged convex iteration.

The non-convex objective couples a data term whose denominator involves the
x1-derivative of the unknown with a roughness penalty

    R_{i,k,p}(u) = (1/p) * integral (d_i^k u)^p.

Minimization proceeds through a sequence of strictly convex problems in
which the data-term denominator is frozen at the previous iterate:

    Fc(u; v) = (1/2) * integral (u - v)^2 / w(v) + alpha * R_{i,k,p}(u),
    w(v) = (d1 v)^2 + eps   (q=2)   or   |d1 v| + eps   (q=1).

Both Fc(u_m, u_{m-1}) and R(u_m) decrease monotonically along the iteration.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .grid import Axis, ScalarField, diff, diff_matrix, norm_l2, norm_linf

#: relative slack allowed on the monotonicity checks (solver tolerance)
MONOTONE_SLACK = 1e-9


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class EnergyParams:
    axis: Axis = Axis.X1
    k: int = 1
    p: int = 2
    q: int = 2          # selects the frozen denominator: 2 -> squared, 1 -> abs
    alpha: float = 1.0
    eps: float = 1e-3
    beta: float = 1e-6  # smoothing of |s| for p=1
    cg_tol: float = 1e-10
    inner_tol: float = 1e-6   # p=1 fixed-point stopping (relative change)
    inner_max: int = 200

    def __post_init__(self):
        if self.k not in (1, 2) or self.p not in (1, 2) or self.q not in (1, 2):
            raise SolverError("k, p, q must each be 1 or 2")
        if self.alpha <= 0 or self.eps <= 0:
            raise SolverError("alpha and eps must be positive")
        if self.p == 1 and self.beta <= 0:
            raise SolverError("beta must be positive when p=1")


@dataclass
class IterTrace:
    """Per-iteration record of the Theorem-style monitored quantities."""

    m: list = field(default_factory=list)
    fc: list = field(default_factory=list)        # Fc(u_m, u_{m-1})
    reg: list = field(default_factory=list)       # R(u_m)
    du_l2: list = field(default_factory=list)     # ||u_m - u_{m-1}||_L2
    grad_linf: list = field(default_factory=list)  # ||d1 u_m||_inf
    warnings: list = field(default_factory=list)

    def append(self, m, fc, reg, du, gl):
        self.m.append(m)
        self.fc.append(fc)
        self.reg.append(reg)
        self.du_l2.append(du)
        self.grad_linf.append(gl)
        for name, col in (("Fc", self.fc), ("R", self.reg)):
            if len(col) >= 2:
                prev, cur = col[-2], col[-1]
                if cur > prev + MONOTONE_SLACK * max(abs(prev), 1.0):
                    self.warnings.append(
                        f"iteration {m}: {name} increased {prev:.12g} -> {cur:.12g}"
                    )

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("m,Fc,R,du_l2,grad_linf\n")
        for row in zip(self.m, self.fc, self.reg, self.du_l2, self.grad_linf):
            buf.write("%d,%.17g,%.17g,%.17g,%.17g\n" % row)
        return buf.getvalue()


def _check_same_shape(a: ScalarField, b: ScalarField):
    if a.shape != b.shape:
        raise SolverError(f"shape mismatch: {a.shape} vs {b.shape}")


def energy_R(u: ScalarField, axis: Axis, k: int, p: int, beta: float = 1e-6) -> float:
    """Roughness penalty (1/p) * integral (d_i^k u)^p.

    For p=1 the integrand is the beta-smoothed absolute value, matching the
    quotient used by the flows and the p=1 convex step.
    """
    g = diff(u, axis, k).values
    if p == 2:
        integrand = 0.5 * g * g
    else:
        integrand = np.sqrt(g * g + beta * beta)
    return float(u.dx1 * u.dx2 * np.sum(integrand))


def _weight(u_ref: ScalarField, q: int, eps: float) -> np.ndarray:
    g1 = diff(u_ref, Axis.X1, 1).values
    return g1 * g1 + eps if q == 2 else np.abs(g1) + eps


def energy_D2(u: ScalarField, u_ref: ScalarField, eps: float) -> float:
    """(1/2) * integral (u - u_ref)^2 / ((d1 u)^2 + eps)."""
    _check_same_shape(u, u_ref)
    r = u.values - u_ref.values
    return float(0.5 * u.dx1 * u.dx2 * np.sum(r * r / _weight(u, 2, eps)))


def energy_D1(u: ScalarField, u_ref: ScalarField, eps: float) -> float:
    """(1/2) * integral (u - u_ref)^2 / (|d1 u| + eps)."""
    _check_same_shape(u, u_ref)
    r = u.values - u_ref.values
    return float(0.5 * u.dx1 * u.dx2 * np.sum(r * r / _weight(u, 1, eps)))


def fc_energy(u: ScalarField, u_prev: ScalarField, params: EnergyParams) -> float:
    """Convex surrogate Fc(u; u_prev) with the denominator frozen at u_prev."""
    _check_same_shape(u, u_prev)
    r = u.values - u_prev.values
    w = _weight(u_prev, params.q, params.eps)
    data = 0.5 * u.dx1 * u.dx2 * np.sum(r * r / w)
    return data + params.alpha * energy_R(
        u, params.axis, params.k, params.p, params.beta
    )


def _apply_along(mat: np.ndarray, v: np.ndarray, axis: Axis) -> np.ndarray:
    return mat @ v if axis == Axis.X1 else v @ mat.T


def _solve_spd(w, mat, u_prev, params, mob=None):
    """CG solve of (1/w) u + alpha * D^T diag(mob) D u = u_prev / w.

    D acts along params.axis; mob is the per-pixel diffusivity of the inner
    p=1 linearization (None means identity, i.e. p=2).
    """
    shape = u_prev.shape
    n = u_prev.size
    matT = mat.T.copy()

    def apply(x):
        v = x.reshape(shape)
        dv = _apply_along(mat, v, params.axis)
        if mob is not None:
            dv = mob * dv
        out = v / w + params.alpha * _apply_along(matT, dv, params.axis)
        return out.ravel()

    A = LinearOperator((n, n), matvec=apply)
    b = (u_prev / w).ravel()
    # Jacobi preconditioner: diagonal of 1/w + alpha * D^T diag(mob) D
    dsq = (mat * mat).sum(axis=0) if mob is None else None
    if mob is None:
        diag_reg = np.ones(shape) * (
            dsq[:, None] if params.axis == Axis.X1 else dsq[None, :]
        )
    else:
        # diag(D^T M D)_jj = sum_i M_i D_ij^2, with M varying along the axis
        if params.axis == Axis.X1:
            diag_reg = np.einsum("ij,ik->kj", mob, mat * mat)
        else:
            diag_reg = np.einsum("ji,ik->jk", mob, mat * mat)
    dinv = 1.0 / (1.0 / w + params.alpha * diag_reg)
    M = LinearOperator((n, n), matvec=lambda x: (dinv.ravel() * x))
    x, info = cg(A, b, rtol=params.cg_tol, maxiter=20 * n, M=M, x0=u_prev.ravel())
    if info != 0:
        res = np.linalg.norm(apply(x) - b) / np.linalg.norm(b)
        raise SolverError(f"CG failed to converge (info={info}, residual={res:.3g})")
    # one defect-correction pass: the optimality-residual checks multiply the
    # algebraic residual by w/alpha, which can be large
    r = b - apply(x)
    if np.linalg.norm(r) > 0:
        dx_corr, info = cg(A, r, rtol=params.cg_tol, maxiter=20 * n, M=M)
        if info == 0:
            x = x + dx_corr
    return x.reshape(shape)


def convex_step(u_prev: ScalarField, params: EnergyParams) -> ScalarField:
    """Minimizer of the strictly convex surrogate Fc(. ; u_prev)."""
    axis = params.axis
    n = u_prev.shape[int(axis)]
    mat = diff_matrix(n, u_prev.spacing(axis), params.k)
    w = _weight(u_prev, params.q, params.eps)
    if params.p == 2:
        out = _solve_spd(w, mat, u_prev.values, params)
    else:
        out = u_prev.values
        b2 = params.beta**2
        for _ in range(params.inner_max):
            g = _apply_along(mat, out, axis)
            mob = 1.0 / np.sqrt(g * g + b2)
            new = _solve_spd(w, mat, u_prev.values, params, mob=mob)
            rel = np.linalg.norm(new - out) / max(np.linalg.norm(out), 1e-300)
            out = new
            if rel <= params.inner_tol:
                break
        else:
            raise SolverError(
                f"p=1 inner fixed point did not converge (last change {rel:.3g})"
            )
    return u_prev.with_values(out)


def iterate(
    u0: ScalarField,
    params: EnergyParams,
    m_max: int = 500,
    stop_tol: float | None = None,
) -> tuple[ScalarField, IterTrace]:
    """Lagged convex iteration u_m = argmin Fc(u; u_{m-1}) starting at u0."""
    if m_max < 1:
        raise SolverError("m_max must be at least 1")
    if stop_tol is None:
        stop_tol = 1e-6 * norm_l2(u0)
    trace = IterTrace()
    u_prev = u0
    for m in range(1, m_max + 1):
        u = convex_step(u_prev, params)
        du = norm_l2(u.with_values(u.values - u_prev.values))
        trace.append(
            m,
            fc_energy(u, u_prev, params),
            energy_R(u, params.axis, params.k, params.p, params.beta),
            du,
            norm_linf(diff(u, Axis.X1, 1)),
        )
        u_prev = u
        if du <= stop_tol:
            break
    return u_prev, trace
