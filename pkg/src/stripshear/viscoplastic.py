"""Rate-dependent power-law regularization of the nonlocal flow rule.

Physical variables throughout: time t, shear stress tau (spatially constant,
traction problem), plastic shear gamma(y) on the strip y in [-h, h].  Fields
are stored on the reference mesh r in [-1, 1]; node i sits at y_i = h * r_i
and all operators carry the scale factor dy = h * dr explicitly.

The flow rule is the microscopic force balance

    tau - S0 (kappa gamma - L^2 gamma_yy) = tau_dis - d/dy k_dis,

with the power-law dissipative pair

    tau_dis = S (d/d0)^m  gamma_t / d,
    k_dis   = S0 ell^2 (d/d0)^m  gamma_ty / d,
    d       = sqrt(gamma_t^2 + ell^2 gamma_ty^2 + eps_v^2),

eps_v = 1e-10 * d0 regularizing the singular mobility d^(m-1) at rest.  The
strength S evolves by S_t = H(S) d with a named hardening choice; gradient
stiffness S0 L^2 gamma_y is energetic and keeps the base modulus S0.

Power-law flow has no true threshold: any positive stress drives creep at
rate ~ d0 (tau/S)^(1/m), which is far below solver tolerances for small m
but never exactly zero.  The m -> 0 limit restores the threshold and the
rate-independent trajectories of the incremental module; the limit study
quantifies that convergence on a shared load ramp.

Time stepping is backward Euler in gamma (the stiff power law demands it)
with damped Newton on the spatial balance, and an explicit update for the
slowly varying S.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.linalg import solve_banded

from .incremental import DEFAULT_OPTIONS, LoadProgram, SolverOptions, evolve
from .model import Field, Mesh, PhysicalParams, SolverError, nondimensionalize

__all__ = [
    "Hardening",
    "ViscoParams",
    "ViscoState",
    "LimitStudyReport",
    "visco_step",
    "simulate_visco",
    "recover_displacement",
    "rate_independent_limit_study",
]

_RATE_EPS_FACTOR = 1e-10


@dataclass(frozen=True)
class Hardening:
    """Named hardening law S -> H(S) for the strength evolution S_t = H(S) d.

    zero: no evolution; linear: constant modulus h0; saturating: Voce form
    h0 (1 - S / S_sat), flattening as S approaches S_sat.
    """

    kind: str
    h0: float = 0.0
    S_sat: float = math.inf

    def __post_init__(self) -> None:
        if self.kind not in ("zero", "linear", "saturating"):
            raise ValueError(f"unknown hardening kind {self.kind!r}")
        h0 = float(self.h0)
        if not math.isfinite(h0) or h0 < 0.0:
            raise ValueError(f"h0 must be finite and nonnegative, got {h0}")
        if self.kind == "saturating":
            s = float(self.S_sat)
            if not math.isfinite(s) or s <= 0.0:
                raise ValueError(f"S_sat must be finite and positive, got {s}")
            object.__setattr__(self, "S_sat", s)
        object.__setattr__(self, "h0", h0)

    @classmethod
    def zero(cls) -> "Hardening":
        return cls(kind="zero")

    @classmethod
    def linear(cls, h0: float) -> "Hardening":
        return cls(kind="linear", h0=h0)

    @classmethod
    def saturating(cls, h0: float, S_sat: float) -> "Hardening":
        return cls(kind="saturating", h0=h0, S_sat=S_sat)

    def rate(self, S: np.ndarray) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros_like(S)
        if self.kind == "linear":
            return np.full_like(S, self.h0)
        return self.h0 * (1.0 - S / self.S_sat)


@dataclass(frozen=True)
class ViscoParams:
    base: PhysicalParams
    hardening: Hardening = field(default_factory=Hardening.zero)

    def __post_init__(self) -> None:
        if self.base.m_rate <= 0.0:
            raise ValueError(
                "m_rate must be positive for the rate-dependent solver; "
                "the m_rate = 0 limit is the rate-independent incremental module"
            )


@dataclass(frozen=True)
class ViscoState:
    """Snapshot of the viscoplastic evolution at time t.

    gamma and S live on the same reference mesh (y = h * r); gamma is
    clamped at the strip faces, S is a per-node strength in stress units.
    """

    t: float
    gamma: Field
    S: Field

    def __post_init__(self) -> None:
        if not math.isfinite(float(self.t)):
            raise ValueError(f"t must be finite, got {self.t}")
        if self.gamma.mesh != self.S.mesh:
            raise ValueError("gamma and S must share a mesh")
        g = self.gamma.values
        if g[0] != 0.0 or g[-1] != 0.0:
            raise ValueError("gamma must vanish at the strip faces")
        if np.any(self.S.values < 0.0):
            raise ValueError("S must be nonnegative everywhere")
        object.__setattr__(self, "t", float(self.t))

    @classmethod
    def virgin(cls, mesh: Mesh, p: ViscoParams, t: float = 0.0) -> "ViscoState":
        return cls(
            t=t,
            gamma=Field.zeros(mesh),
            S=Field(mesh, np.full(mesh.n_cells + 1, p.base.S0)),
        )


class LimitStudyReport(NamedTuple):
    m_values: tuple
    discrepancies: tuple


# Gauss(3) on the reference cell [0, 1]; matches the functional quadrature
_QP, _QW = np.polynomial.legendre.leggauss(3)
_QP = (_QP + 1.0) / 2.0
_QW = _QW / 2.0


def _dissipative_terms(a_q, b_q, S_q, p: PhysicalParams, eps: float):
    """Power-law pair and its 2x2 rate-Jacobian blocks at quadrature points.

    a_q is the local rate, b_q its y-gradient; returns tau_dis, k_dis and
    the four blocks d(tau_dis, k_dis)/d(a, b).
    """
    ell2 = p.ell * p.ell
    d2 = a_q * a_q + ell2 * b_q * b_q + eps * eps
    d = np.sqrt(d2)
    P = d ** (p.m_rate - 1.0) / p.d0**p.m_rate
    tau_dis = S_q * P * a_q
    k_dis = p.S0 * ell2 * P * b_q
    mm = (p.m_rate - 1.0) / d2
    j_aa = S_q * P * (1.0 + mm * a_q * a_q)
    j_ab = S_q * P * mm * a_q * ell2 * b_q
    j_ba = p.S0 * ell2 * P * mm * b_q * a_q
    j_bb = p.S0 * ell2 * P * (1.0 + mm * ell2 * b_q * b_q)
    return tau_dis, k_dis, j_aa, j_ab, j_ba, j_bb


def _residual_jacobian(
    gamma, gamma_n, S_nodes, tau: float, dt: float, p: PhysicalParams, dy: float,
    eps: float,
):
    """FEM residual of the implicit balance and its banded Jacobian.

    Piecewise-linear elements, Gauss(3) per cell; rows for the clamped
    boundary nodes are replaced by identities.
    """
    t = _QP[None, :]
    w = _QW[None, :]
    rate = (gamma - gamma_n) / dt

    def interp(v):
        return v[:-1, None] * (1.0 - t) + v[1:, None] * t

    def slope(v):
        return ((v[1:] - v[:-1]) / dy)[:, None]

    g_q = interp(gamma)
    gy_q = slope(gamma) * np.ones_like(t)
    a_q = interp(rate)
    b_q = slope(rate) * np.ones_like(t)
    S_q = interp(S_nodes)

    tau_dis, k_dis, j_aa, j_ab, j_ba, j_bb = _dissipative_terms(a_q, b_q, S_q, p, eps)

    f0 = p.S0 * p.kappa * g_q + tau_dis - tau  # pairs with phi_i
    f1 = p.S0 * p.L * p.L * gy_q + k_dis  # pairs with phi_i'
    sha = 1.0 - t  # phi_left at qp
    shb = t
    da_l, da_r = (1.0 - t) / dt, t / dt
    db_l, db_r = -1.0 / (dy * dt), 1.0 / (dy * dt)

    R = np.zeros_like(gamma)
    R[:-1] += dy * np.sum(w * (f0 * sha - f1 / dy), axis=1)
    R[1:] += dy * np.sum(w * (f0 * shb + f1 / dy), axis=1)

    # d f0 / d gamma_j and d f1 / d gamma_j at each qp, j in {left, right}
    el = p.S0 * p.kappa
    gr = p.S0 * p.L * p.L
    f0_l = el * sha + j_aa * da_l + j_ab * db_l
    f0_r = el * shb + j_aa * da_r + j_ab * db_r
    f1_l = -gr / dy + j_ba * da_l + j_bb * db_l
    f1_r = gr / dy + j_ba * da_r + j_bb * db_r

    c_ll = dy * np.sum(w * (f0_l * sha - f1_l / dy), axis=1)
    c_lr = dy * np.sum(w * (f0_r * sha - f1_r / dy), axis=1)
    c_rl = dy * np.sum(w * (f0_l * shb + f1_l / dy), axis=1)
    c_rr = dy * np.sum(w * (f0_r * shb + f1_r / dy), axis=1)

    n = gamma.size
    ab = np.zeros((3, n))
    ab[1, :-1] += c_ll
    ab[1, 1:] += c_rr
    ab[0, 1:] += c_lr  # superdiagonal
    ab[2, :-1] += c_rl  # subdiagonal

    # clamped boundary rows
    R[0] = R[-1] = 0.0
    ab[1, 0] = ab[1, -1] = 1.0
    ab[0, 1] = ab[2, -2] = 0.0
    return R, ab


def _nodal_flow_rate(gamma, gamma_n, dt: float, p: PhysicalParams, dy: float):
    """Effective flow rate d at the nodes, for the strength update."""
    rate = (gamma - gamma_n) / dt
    cell_slope = (rate[1:] - rate[:-1]) / dy
    node_slope = np.empty_like(rate)
    node_slope[0] = cell_slope[0]
    node_slope[-1] = cell_slope[-1]
    node_slope[1:-1] = 0.5 * (cell_slope[:-1] + cell_slope[1:])
    eps = _RATE_EPS_FACTOR * p.d0
    return np.sqrt(rate**2 + (p.ell * node_slope) ** 2 + eps * eps)


def _powerlaw_predictor(gamma_n, S_nodes, tau: float, dt: float, p: PhysicalParams):
    """Cold-start guess: nodal inversion of the scalar power law.

    The mobility d^(m-1) blows up at rest, so Newton started at zero rate
    climbs geometrically and can need over a hundred iterations for small
    m.  Inverting the local balance overstress = S (a / d0)^m per node
    lands near the answer in one shot.  Computed in log space with a cap
    so extreme exponents 1/m cannot overflow.
    """
    sigma = tau - p.S0 * p.kappa * gamma_n
    cap = math.log(10.0 * (1.0 + abs(tau) / p.S0) / dt) - math.log(p.d0)
    with np.errstate(divide="ignore"):
        z = np.log(np.abs(sigma)) - np.log(S_nodes)
    z = np.where(np.isfinite(z), z, math.inf)
    z = np.where(np.abs(sigma) > 0.0, z, -math.inf)
    a0 = p.d0 * np.exp(np.minimum(z / p.m_rate, cap)) * np.sign(sigma)
    x = gamma_n + dt * a0
    x[0] = x[-1] = 0.0
    return x


def _residual_noise(ab, x) -> float:
    """Float64 floor of the residual: eps times the row scale of |J| |x|.

    Near a rate reversal the power-law mobility makes Jacobian rows as
    large as P(eps_v) / dt, so one ulp of x moves the residual by this
    much; no representable iterate can land below it.
    """
    ax = np.abs(x)
    s = np.abs(ab[1]) * ax
    s[:-1] += np.abs(ab[0][1:]) * ax[1:]
    s[1:] += np.abs(ab[2][:-1]) * ax[:-1]
    return 8.0 * np.finfo(float).eps * float(np.max(s))


def _newton_solve(
    x0, gamma_n, S_nodes, tau: float, dt: float, base: PhysicalParams,
    dy: float, eps: float, tol: float, max_iters: int,
):
    """Damped Newton on the implicit balance at smoothing level eps.

    Returns (x, rnorm, converged).  Convergence means rnorm <= tol, or the
    iterate reached the float64 noise floor of the residual assembly (one
    ulp of x moves the residual more than its current value) while within
    a safe multiple of tol.  On a stall the best iterate is returned with
    converged = False; the caller decides whether to continue elsewhere.
    """
    x = x0.copy()
    R, ab = _residual_jacobian(x, gamma_n, S_nodes, tau, dt, base, dy, eps)
    rnorm = float(np.max(np.abs(R)))
    for _ in range(max_iters):
        if rnorm <= tol:
            return x, rnorm, True
        step = solve_banded((1, 1), ab, -R)
        floor = max(1e3 * tol, _residual_noise(ab, x))
        x_try = x + step
        x_try[0] = x_try[-1] = 0.0
        if np.array_equal(x_try, x):
            return x, rnorm, rnorm <= floor
        t_ls = 1.0
        for _ in range(60):
            x_new = x + t_ls * step
            x_new[0] = x_new[-1] = 0.0
            R_new, ab_new = _residual_jacobian(
                x_new, gamma_n, S_nodes, tau, dt, base, dy, eps
            )
            rnorm_new = float(np.max(np.abs(R_new)))
            if rnorm_new <= rnorm * (1.0 - 1e-4 * t_ls) + 1e-14 * tol:
                break
            t_ls *= 0.5
        else:
            return x, rnorm, rnorm <= floor
        x, R, ab, rnorm = x_new, R_new, ab_new, rnorm_new
    return x, rnorm, rnorm <= max(1e3 * tol, _residual_noise(ab, x))


def visco_step(
    state: ViscoState,
    tau_next: float,
    dt: float,
    p: ViscoParams,
    opts: SolverOptions | None = None,
    gamma_init: np.ndarray | None = None,
) -> ViscoState:
    """One backward-Euler step of the viscoplastic balance to stress tau_next.

    Newton iterates the spatial balance at the new time level with residual
    backtracking; the strength field is then advanced explicitly with the
    accepted flow rate.  gamma_init, when given, seeds Newton (a warm start
    from the previous increment); otherwise a nodal power-law inversion of
    the overstress is used.  If the sharp problem resists (rates trapped in
    the regularization corner crawl out of it only geometrically), the step
    is re-solved by continuation over a decade ladder of smoothing widths
    down to the nominal eps_v.
    """
    tau_next = float(tau_next)
    dt = float(dt)
    if not math.isfinite(tau_next):
        raise ValueError(f"tau_next must be finite, got {tau_next}")
    if not math.isfinite(dt) or dt <= 0.0:
        raise ValueError(f"dt must be finite and positive, got {dt}")
    if opts is None:
        opts = DEFAULT_OPTIONS
    base = p.base
    mesh = state.gamma.mesh
    dy = base.h * mesh.dr
    gamma_n = state.gamma.values
    S_nodes = state.S.values
    eps_v = _RATE_EPS_FACTOR * base.d0

    # residual entries scale like stress * dy
    tol = opts.newton_tol * base.S0 * dy * max(1.0, abs(tau_next) / base.S0)

    candidates = []
    if gamma_init is not None:
        xg = np.array(gamma_init, dtype=float)
        if xg.shape != gamma_n.shape:
            raise ValueError("gamma_init shape does not match the mesh")
        xg[0] = xg[-1] = 0.0
        candidates.append(xg)
    # a warm start extrapolated across a load reversal can sit on the wrong
    # side of the power-law corner; keep the cold start in the running
    candidates.append(_powerlaw_predictor(gamma_n, S_nodes, tau_next, dt, base))
    start = min(
        candidates,
        key=lambda c: float(
            np.max(
                np.abs(
                    _residual_jacobian(
                        c, gamma_n, S_nodes, tau_next, dt, base, dy, eps_v
                    )[0]
                )
            )
        ),
    )

    x, rnorm, ok = _newton_solve(
        start, gamma_n, S_nodes, tau_next, dt, base, dy, eps_v, tol,
        opts.max_newton_iters,
    )
    if not ok:
        # continuation: relax the corner by widening the rate smoothing,
        # then sharpen it one decade at a time back to eps_v
        x = start
        level = 1e-2 * base.d0
        while True:
            eps = max(level, eps_v)
            x, rnorm, ok = _newton_solve(
                x, gamma_n, S_nodes, tau_next, dt, base, dy, eps, tol,
                opts.max_newton_iters,
            )
            if eps == eps_v:
                break
            level *= 0.1
        if not ok:
            raise SolverError(
                f"viscoplastic Newton did not converge (residual {rnorm:.3e}, "
                f"tolerance {tol:.3e}); try halving dt",
                residual=rnorm,
            )

    d_nodes = _nodal_flow_rate(x, gamma_n, dt, base, dy)
    S_new = S_nodes + dt * p.hardening.rate(S_nodes) * d_nodes
    return ViscoState(
        t=state.t + dt, gamma=Field(mesh, x), S=Field(mesh, S_new)
    )


def _validate_load(load) -> list[tuple[float, float]]:
    pairs = [(float(t), float(tau)) for t, tau in load]
    if len(pairs) < 1:
        raise ValueError("load series must be nonempty")
    for (t0, s0), (t1, s1) in zip(pairs, pairs[1:]):
        if not t1 > t0:
            raise ValueError("load times must be strictly increasing")
    if any(not (math.isfinite(t) and math.isfinite(s)) for t, s in pairs):
        raise ValueError("load entries must be finite")
    return pairs


def simulate_visco(
    load: Sequence,
    p: ViscoParams,
    mesh: Mesh,
    opts: SolverOptions | None = None,
) -> list[ViscoState]:
    """March visco_step along a (t, tau) series from the virgin state.

    One implicit step per consecutive pair; the series resolution is the
    time step.  The load need not be monotone.  Returns all states,
    including the initial one.
    """
    pairs = _validate_load(load)
    if opts is None:
        opts = DEFAULT_OPTIONS
    states = [ViscoState.virgin(mesh, p, t=pairs[0][0])]
    guess = None
    for k in range(1, len(pairs)):
        t_next, tau_next = pairs[k]
        dt = t_next - pairs[k - 1][0]
        try:
            states.append(visco_step(states[-1], tau_next, dt, p, opts, guess))
        except SolverError as err:
            raise SolverError(
                f"load point {k} (t = {t_next:g}, tau = {tau_next:g}) failed: {err}",
                residual=err.residual,
                step=k,
            ) from err
        # secant-in-time warm start for the next step
        if len(pairs) > k + 1:
            g1 = states[-1].gamma.values
            g0 = states[-2].gamma.values
            guess = g1 + (g1 - g0) * ((pairs[k + 1][0] - t_next) / dt)
    return states


def recover_displacement(state: ViscoState, tau: float, p: ViscoParams) -> Field:
    """Displacement profile u(y) = int_{-h}^{y} (tau / G + gamma) dy'.

    The bottom face is clamped, u(-h) = 0; the integrand is the total shear
    (elastic part tau / G plus plastic part gamma).
    """
    tau = float(tau)
    if not math.isfinite(tau):
        raise ValueError(f"tau must be finite, got {tau}")
    base = p.base
    mesh = state.gamma.mesh
    y = base.h * mesh.nodes
    integrand = tau / base.G + state.gamma.values
    u = cumulative_trapezoid(integrand, y, initial=0.0)
    return Field(mesh, u)


def rate_independent_limit_study(
    m_list: Sequence[float],
    p: ViscoParams,
    mesh: Mesh,
    load: Sequence,
    opts: SolverOptions | None = None,
) -> LimitStudyReport:
    """Discrepancy between the viscoplastic and rate-independent responses.

    For each rate exponent in m_list (decreasing positives) the same
    monotone stress ramp is run through simulate_visco, and the final
    plastic shear is compared in max norm against the incremental solver's
    final state on the matching renormalized load grid.  Hardening must be
    zero: the rate-independent model has a fixed strength.
    """
    ms = [float(m) for m in m_list]
    if len(ms) < 1:
        raise ValueError("m_list must be nonempty")
    if any(m <= 0.0 for m in ms):
        raise ValueError("m_list entries must be positive")
    if any(b >= a for a, b in zip(ms, ms[1:])):
        raise ValueError("m_list must be strictly decreasing")
    if p.hardening.kind != "zero":
        raise ValueError("limit study requires zero hardening")
    pairs = _validate_load(load)
    taus = [s for _, s in pairs]
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise ValueError("limit study requires a strictly increasing ramp")
    if opts is None:
        opts = DEFAULT_OPTIONS

    thetas = tuple(tau / p.base.S0 for tau in taus)
    reference = evolve(LoadProgram(thetas), nondimensionalize(p.base), mesh, opts)
    gamma_ref = reference.steps[-1].gamma.values

    discrepancies = []
    for m in ms:
        pm = ViscoParams(
            base=PhysicalParams(
                S0=p.base.S0,
                kappa=p.base.kappa,
                L=p.base.L,
                ell=p.base.ell,
                h=p.base.h,
                G=p.base.G,
                d0=p.base.d0,
                m_rate=m,
            ),
            hardening=p.hardening,
        )
        states = simulate_visco(pairs, pm, mesh, opts)
        gamma_m = states[-1].gamma.values
        discrepancies.append(float(np.max(np.abs(gamma_m - gamma_ref))))
    return LimitStudyReport(m_values=tuple(ms), discrepancies=tuple(discrepancies))
