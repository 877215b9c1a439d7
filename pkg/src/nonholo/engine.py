"""Lagrange-d'Alembert force assembly.

Given masses, a base force (potential gradient or explicit components) and a
set of velocity-dependent scalar constraints D_a(q, v) = 0, the multipliers
h_a are fixed by demanding dD_a/dt = 0 along the motion:

    sum_b M_ab h_b = b_a,
    M_ab = sum_i (dD_a/dv_i)(dD_b/dv_i)/m_i,
    b_a  = -dD_a/dt_explicit - sum_i (dD_a/dq_i) v_i - sum_i (dD_a/dv_i) f0_i/m_i,

and the total acceleration is a_i = (f0_i + sum_a h_a dD_a/dv_i)/m_i.

All evaluation paths accept dual-number components, so force-field Jacobians
(differentiating through the multiplier solve) come out exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as _expr
from .dual import value
from .errors import NoConvergence, RegularityError
from .expr import EvalPoint, Expr


@dataclass(frozen=True)
class ConstraintSet:
    """Scalar constraints D_a(q, v, t) with a Gram-regularity floor."""

    exprs: tuple[Expr, ...] = ()
    eps_reg: float = 1e-10

    def __len__(self):
        return len(self.exprs)


@dataclass(frozen=True)
class SystemSpec:
    """Dynamical problem: dimension, diagonal masses, base force, constraints."""

    n: int
    mass: tuple[float, ...]
    potential: Expr | None = None
    forces: tuple[Expr, ...] | None = None
    constraints: ConstraintSet = field(default_factory=ConstraintSet)

    def __post_init__(self):
        if len(self.mass) != self.n:
            raise ValueError("mass vector length must equal dimension")
        if any(m <= 0 for m in self.mass):
            raise ValueError("all masses must be positive")
        if self.potential is not None and self.forces is not None:
            raise ValueError("give either a potential or explicit forces, not both")
        if self.forces is not None and len(self.forces) != self.n:
            raise ValueError("explicit force list length must equal dimension")


def make_system(
    n: int,
    masses,
    potential: str | None = None,
    forces=None,
    constraints=(),
    eps_reg: float = 1e-10,
) -> SystemSpec:
    """Parse string expressions into a SystemSpec."""
    pot = _expr.parse_expression(potential, n) if potential is not None else None
    fs = tuple(_expr.parse_expression(f, n) for f in forces) if forces is not None else None
    cs = ConstraintSet(tuple(_expr.parse_expression(c, n) for c in constraints), eps_reg)
    return SystemSpec(n=n, mass=tuple(float(m) for m in masses), potential=pot, forces=fs, constraints=cs)


@dataclass(frozen=True)
class MultiplierResult:
    h: tuple
    gram: tuple
    rhs: tuple


# --- raw evaluation (floats or duals) ---------------------------------------

def base_force_raw(spec: SystemSpec, q, v, t):
    if spec.forces is not None:
        return [f._fn(q, v, t) for f in spec.forces]
    if spec.potential is not None:
        dq, _, _ = _expr.grad_raw(spec.potential, q, v, t)
        return [-g for g in dq]
    return [0.0] * spec.n


def _solve_linear(a, b):
    """Gaussian elimination with partial pivoting on value parts.

    Entries may be dual numbers; small systems only (m <= a few).
    """
    m = len(b)
    a = [row[:] for row in a]
    b = list(b)
    for col in range(m):
        pivot = max(range(col, m), key=lambda r: abs(value(a[r][col])))
        if abs(value(a[pivot][col])) == 0.0:
            raise RegularityError("singular constraint Gram matrix")
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            b[col], b[pivot] = b[pivot], b[col]
        inv = 1.0 / a[col][col]
        for r in range(col + 1, m):
            factor = a[r][col] * inv
            for c in range(col + 1, m):
                a[r][c] = a[r][c] - factor * a[col][c]
            b[r] = b[r] - factor * b[col]
    x = [0.0] * m
    for r in range(m - 1, -1, -1):
        acc = b[r]
        for c in range(r + 1, m):
            acc = acc - a[r][c] * x[c]
        x[r] = acc / a[r][r]
    return x


def _gram_min_eig(gram) -> float:
    m = len(gram)
    if m == 1:
        return value(gram[0][0])
    mat = np.array([[value(x) for x in row] for row in gram], dtype=float)
    return float(np.linalg.eigvalsh(mat).min())


def _constraint_solve(spec: SystemSpec, q, v, t, f0):
    """(h, grads, gram, rhs, min_eig) from the consistency condition dD/dt = 0."""
    cons = spec.constraints.exprs
    m = len(cons)
    mass = spec.mass
    n = spec.n
    grads = [_expr.grad_raw(c, q, v, t) for c in cons]
    if m == 1:
        dq1, dv1, dt1 = grads[0]
        g = 0.0
        b = -dt1
        for i in range(n):
            g = g + dv1[i] * dv1[i] / mass[i]
            b = b - dq1[i] * v[i] - dv1[i] * f0[i] / mass[i]
        min_eig = value(g)
        if min_eig < spec.constraints.eps_reg:
            raise RegularityError(
                f"constraint Gram matrix smallest eigenvalue {min_eig:.3e} "
                f"below floor {spec.constraints.eps_reg:.3e}"
            )
        return [b / g], grads, [[g]], [b], min_eig
    gram = [[0.0] * m for _ in range(m)]
    for a in range(m):
        dva = grads[a][1]
        for b in range(a, m):
            dvb = grads[b][1]
            acc = 0.0
            for i in range(n):
                acc = acc + dva[i] * dvb[i] / mass[i]
            gram[a][b] = acc
            gram[b][a] = acc
    min_eig = _gram_min_eig(gram)
    if min_eig < spec.constraints.eps_reg:
        raise RegularityError(
            f"constraint Gram matrix smallest eigenvalue {min_eig:.3e} "
            f"below floor {spec.constraints.eps_reg:.3e}"
        )
    rhs = []
    for a in range(m):
        dqa, dva, dta = grads[a]
        acc = -dta
        for i in range(n):
            acc = acc - dqa[i] * v[i] - dva[i] * f0[i] / mass[i]
        rhs.append(acc)
    h = _solve_linear(gram, rhs)
    return h, grads, gram, rhs, min_eig


def multipliers_raw(spec: SystemSpec, q, v, t, f0=None):
    """(h, gram, rhs, min_eig) for the constraint multipliers."""
    if f0 is None:
        f0 = base_force_raw(spec, q, v, t)
    h, _, gram, rhs, min_eig = _constraint_solve(spec, q, v, t, f0)
    return h, gram, rhs, min_eig


def acceleration_raw(spec: SystemSpec, q, v, t):
    """Total acceleration a_i = (f0_i + sum_a h_a dD_a/dv_i)/m_i."""
    f0 = base_force_raw(spec, q, v, t)
    mass = spec.mass
    n = spec.n
    if not spec.constraints.exprs:
        return [f0[i] / mass[i] for i in range(n)]
    h, grads, _, _, _ = _constraint_solve(spec, q, v, t, f0)
    total = list(f0)
    for a in range(len(h)):
        dva = grads[a][1]
        ha = h[a]
        for i in range(n):
            total[i] = total[i] + ha * dva[i]
    return [total[i] / mass[i] for i in range(n)]


# --- public API ---------------------------------------------------------------

def _check_point(spec: SystemSpec, pt: EvalPoint):
    if len(pt.q) != spec.n:
        raise ValueError(f"point dimension {len(pt.q)} != system dimension {spec.n}")


def base_acceleration(spec: SystemSpec, pt: EvalPoint):
    """Unconstrained acceleration f0_i/m_i."""
    _check_point(spec, pt)
    f0 = base_force_raw(spec, pt.q, pt.v, pt.t)
    return tuple(f0[i] / spec.mass[i] for i in range(spec.n))


def compute_multipliers(spec: SystemSpec, pt: EvalPoint) -> MultiplierResult:
    """Solve the consistency system for the constraint multipliers."""
    _check_point(spec, pt)
    if not spec.constraints.exprs:
        return MultiplierResult(h=(), gram=(), rhs=())
    h, gram, rhs, _ = multipliers_raw(spec, pt.q, pt.v, pt.t)
    return MultiplierResult(h=tuple(h), gram=tuple(tuple(row) for row in gram), rhs=tuple(rhs))


def total_acceleration(spec: SystemSpec, pt: EvalPoint):
    """Constrained acceleration; equals base_acceleration when no constraints."""
    _check_point(spec, pt)
    return tuple(acceleration_raw(spec, pt.q, pt.v, pt.t))


def constraint_values(spec: SystemSpec, q, v, t=0.0):
    return [c._fn(q, v, t) for c in spec.constraints.exprs]


def project_initial_state(spec: SystemSpec, q0, v0, t: float = 0.0, tol: float = 1e-12,
                          max_iter: int = 50):
    """Newton-adjust v0 along span{dD_a/dv} until |D_a(q0, v)| <= tol.

    Gauss-Newton on the underdetermined system; q0 is never touched.
    """
    if not spec.constraints.exprs:
        return tuple(float(x) for x in v0)
    q = [float(x) for x in q0]
    v = [float(x) for x in v0]
    cons = spec.constraints.exprs
    for _ in range(max_iter):
        d = [c._fn(q, v, t) for c in cons]
        if max(abs(x) for x in d) <= tol:
            return tuple(v)
        jac = np.array([_expr.grad_raw(c, q, v, t)[1] for c in cons], dtype=float)
        jjt = jac @ jac.T
        try:
            step = jac.T @ np.linalg.solve(jjt, np.array(d))
        except np.linalg.LinAlgError as exc:
            raise NoConvergence("degenerate constraint Jacobian during projection") from exc
        v = [v[i] - step[i] for i in range(len(v))]
    raise NoConvergence(f"initial-state projection did not converge in {max_iter} iterations")
