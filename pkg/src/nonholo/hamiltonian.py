"""Extended-phase-space formulation.

The second-order system qdd = F(q, v) is lifted to the 4n+2-dimensional
phase space (q, p, v, pi, e, pi_e) with Hamiltonian

    H = pi^2/(2e) + pi.F(q, v) + p.v + mu_e*pi_e.

On the constraint surface pi_e = 0, p = 0, pi = 0 the flow reduces to
qd = v, vd = F (the original dynamics) plus ed = mu_e, and H vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine
from .dual import Dual, value
from .engine import SystemSpec
from .errors import ExprDomainError, VanishingVelocity
from .paths import PhasePath, diff1

VELOCITY_NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class ExtendedPhasePoint:
    """Point of the 4n+2-dimensional phase space."""

    q: tuple
    p: tuple
    v: tuple
    pi: tuple
    e: float
    pi_e: float

    def __post_init__(self):
        n = len(self.q)
        if not (len(self.p) == len(self.v) == len(self.pi) == n):
            raise ValueError("q, p, v, pi must have equal length")

    @property
    def n(self) -> int:
        return len(self.q)


@dataclass(frozen=True)
class GaugeInput:
    """Gauge parameter alpha(t) and multiplier profile mu_e(t) on a path grid."""

    alpha: np.ndarray
    mu_e: np.ndarray | None = None


def pack(z: ExtendedPhasePoint) -> list:
    """Flat layout [q, p, v, pi, e, pi_e]."""
    return [*z.q, *z.p, *z.v, *z.pi, z.e, z.pi_e]


def unpack(y, n: int) -> ExtendedPhasePoint:
    return ExtendedPhasePoint(
        q=tuple(y[0:n]), p=tuple(y[n:2 * n]), v=tuple(y[2 * n:3 * n]),
        pi=tuple(y[3 * n:4 * n]), e=y[4 * n], pi_e=y[4 * n + 1],
    )


def hamiltonian_value(spec: SystemSpec, z: ExtendedPhasePoint, mu_e: float = 0.0,
                      t: float = 0.0):
    """H = pi^2/(2e) + pi.F + p.v + mu_e*pi_e; e must be nonzero."""
    if value(z.e) == 0.0:
        raise ExprDomainError("auxiliary variable e is zero")
    f = engine.acceleration_raw(spec, z.q, z.v, t)
    n = z.n
    acc = mu_e * z.pi_e
    pi2 = 0.0
    for i in range(n):
        pi2 = pi2 + z.pi[i] * z.pi[i]
        acc = acc + z.pi[i] * f[i] + z.p[i] * z.v[i]
    return acc + pi2 / (2.0 * z.e)


def force_jacobians(spec: SystemSpec, q, v, t: float = 0.0):
    """(dF/dq, dF/dv) columns by dual seeding, through the multiplier solve."""
    n = spec.n
    dfdq = [[0.0] * n for _ in range(n)]  # dfdq[j][i] = dF_j/dq_i
    dfdv = [[0.0] * n for _ in range(n)]
    for i in range(n):
        seeded = list(q)
        seeded[i] = Dual(q[i], 1.0)
        col = engine.acceleration_raw(spec, seeded, v, t)
        for j in range(n):
            dfdq[j][i] = col[j].du if isinstance(col[j], Dual) else 0.0
        seeded = list(v)
        seeded[i] = Dual(v[i], 1.0)
        col = engine.acceleration_raw(spec, q, seeded, t)
        for j in range(n):
            dfdv[j][i] = col[j].du if isinstance(col[j], Dual) else 0.0
    return dfdq, dfdv


def hamiltonian_vector_field(spec: SystemSpec, z: ExtendedPhasePoint,
                             mu_e: float = 0.0, t: float = 0.0) -> list:
    """Flow of H in the flat layout [qd, pd, vd, pid, ed, pi_ed].

    qd = v; vd = pi/e + F; ed = mu_e;
    pd_i = -sum_j pi_j dF_j/dq_i; pid_i = -p_i - sum_j pi_j dF_j/dv_i;
    pi_ed = pi^2/(2 e^2).
    """
    if value(z.e) == 0.0:
        raise ExprDomainError("auxiliary variable e is zero")
    n = z.n
    f = engine.acceleration_raw(spec, z.q, z.v, t)
    qd = list(z.v)
    vd = [z.pi[i] / z.e + f[i] for i in range(n)]
    pi2 = 0.0
    for x in z.pi:
        pi2 = pi2 + x * x
    pi_ed = pi2 / (2.0 * z.e * z.e)
    if all(value(x) == 0.0 for x in z.pi):
        # momentum rates vanish identically with pi = 0; skip the Jacobians
        pd = [0.0] * n
        pid = [-z.p[i] for i in range(n)]
    else:
        dfdq, dfdv = force_jacobians(spec, z.q, z.v, t)
        pd = [0.0] * n
        pid = [0.0] * n
        for i in range(n):
            acc_q = 0.0
            acc_v = 0.0
            for j in range(n):
                acc_q = acc_q + z.pi[j] * dfdq[j][i]
                acc_v = acc_v + z.pi[j] * dfdv[j][i]
            pd[i] = -acc_q
            pid[i] = -z.p[i] - acc_v
    return [*qd, *pd, *vd, *pid, mu_e, pi_ed]


def constraint_surface_residual(z: ExtendedPhasePoint) -> float:
    """max(|pi_e|, ||p||_inf, ||pi||_inf); zero exactly on the surface."""
    res = abs(z.pi_e)
    for x in z.p:
        res = max(res, abs(x))
    for x in z.pi:
        res = max(res, abs(x))
    return res


def _coordinate_gradient(f, z: ExtendedPhasePoint) -> dict:
    """Exact partials of a scalar phase function by dual seeding each coordinate."""
    n = z.n
    out = {"q": [0.0] * n, "p": [0.0] * n, "v": [0.0] * n, "pi": [0.0] * n,
           "e": 0.0, "pi_e": 0.0}

    def du(val):
        return val.du if isinstance(val, Dual) else 0.0

    for block in ("q", "p", "v", "pi"):
        base = getattr(z, block)
        for i in range(n):
            seeded = list(base)
            seeded[i] = Dual(base[i], 1.0)
            out[block][i] = du(f(_replace(z, block, tuple(seeded))))
    out["e"] = du(f(_replace(z, "e", Dual(z.e, 1.0))))
    out["pi_e"] = du(f(_replace(z, "pi_e", Dual(z.pi_e, 1.0))))
    return out


def _replace(z: ExtendedPhasePoint, field: str, val) -> ExtendedPhasePoint:
    data = {"q": z.q, "p": z.p, "v": z.v, "pi": z.pi, "e": z.e, "pi_e": z.pi_e}
    data[field] = val
    return ExtendedPhasePoint(**data)


def poisson_bracket(f, g, z: ExtendedPhasePoint) -> float:
    """Canonical bracket {f, g} over the pairs (q, p), (v, pi), (e, pi_e)."""
    gf = _coordinate_gradient(f, z)
    gg = _coordinate_gradient(g, z)
    acc = gf["e"] * gg["pi_e"] - gf["pi_e"] * gg["e"]
    for i in range(z.n):
        acc += gf["q"][i] * gg["p"][i] - gf["p"][i] * gg["q"][i]
        acc += gf["v"][i] * gg["pi"][i] - gf["pi"][i] * gg["v"][i]
    return acc


def gauge_transform(path: PhasePath, gauge: GaugeInput) -> PhasePath:
    """Apply the local symmetry: shift e, p and mu_e; q, v, pi, pi_e unchanged.

    de = alpha*(1 - v.qd/v^2), dp = alpha * pi^2/(2 e^2 v^2) * v,
    dmu_e = d(de)/dt with the same stencil used for time derivatives elsewhere.
    """
    alpha = np.asarray(gauge.alpha, dtype=float)
    if alpha.shape != path.times.shape:
        raise ValueError("alpha must be sampled on the path grid")
    v2 = np.sum(path.v * path.v, axis=1)
    if np.any(v2 < VELOCITY_NORM_FLOOR):
        raise VanishingVelocity("velocity norm below floor along the path")
    qd = diff1(path.q, path.dt)
    pi2 = np.sum(path.pi * path.pi, axis=1)
    de = alpha * (1.0 - np.sum(path.v * qd, axis=1) / v2)
    dp = (alpha * pi2 / (2.0 * path.e ** 2 * v2))[:, None] * path.v
    dmu = diff1(de, path.dt)
    mu_base = path.mu_e if gauge.mu_e is None else np.asarray(gauge.mu_e, dtype=float)
    return path.replace(e=path.e + de, p=path.p + dp, mu_e=mu_base + dmu)
