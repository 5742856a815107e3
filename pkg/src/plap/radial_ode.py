"""Radial and 1-D reductions: integration, shooting, and decay-rate fitting.

Exponentially decaying exterior solutions are handled in logarithmic
amplitude: profiles carry log_u = ln(u) and ratio = u'/u alongside u itself,
because u underflows float64 once ln(u) drops below about -745 while the
log-derivative pair stays O(1) on any span.  The decaying branch is isolated
by bisection on the initial ratio u'(r0)/u(r0); the ratio flow repels that
branch at rate exp(p*alpha*r) going outward, so the returned profile is
produced by integrating the same flow in its stable (inward) direction from
beyond r_max, seeded and cross-checked with the bisected ratio.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator

from .errors import (DomainError, IllConditioned, NoSeparatrix, SingularRatio,
                     StepFailure)
from .indicial import ProblemParams, eigen_rate_alpha, indicial_roots

OVERFLOW_BARRIER = 1e150
ZERO_BARRIER = 1e-150
MAX_BISECT = 200
BRACKET_WIDTH = 1e-14


class ShootClass(Enum):
    DECAYING = "decaying"
    BLOW_UP = "blow_up"
    HIT_ZERO = "hit_zero"


@dataclass
class RadialProfile:
    """Sampled radial solution u(r) with derivative on an increasing grid.

    log_u and ratio (= u'/u), when present, are the primary data and stay
    finite even where u itself underflows to zero.
    """

    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    meta: dict = field(default_factory=dict)
    log_u: np.ndarray | None = None
    ratio: np.ndarray | None = None

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.du = np.asarray(self.du, dtype=float)
        if self.r.ndim != 1 or self.r.shape != self.u.shape or self.r.shape != self.du.shape:
            raise DomainError("r, u, du must be 1-D arrays of equal length")
        if not np.all(np.diff(self.r) > 0.0):
            raise DomainError("r must be strictly increasing")
        if np.any(self.r <= 0.0):
            raise DomainError("r must be positive")
        if self.log_u is not None:
            self.log_u = np.asarray(self.log_u, dtype=float)
            if not np.all(np.isfinite(self.log_u)):
                raise DomainError("log_u must be finite")
        elif not np.all(self.u > 0.0):
            raise DomainError("u must be positive")
        if self.ratio is not None:
            self.ratio = np.asarray(self.ratio, dtype=float)

    def log_values(self) -> np.ndarray:
        return self.log_u if self.log_u is not None else np.log(self.u)

    def ratio_values(self) -> np.ndarray:
        return self.ratio if self.ratio is not None else self.du / self.u

    def log_interp(self) -> PchipInterpolator:
        """Monotone cubic interpolant of ln u against ln r."""
        return PchipInterpolator(np.log(self.r), self.log_values())

    @property
    def r_min(self) -> float:
        return float(self.r[0])

    @property
    def r_max(self) -> float:
        return float(self.r[-1])


@dataclass(frozen=True)
class ShootResult:
    profile: RadialProfile
    shoot_param: float
    bisection_iters: int
    classification: ShootClass


class DecayFit(NamedTuple):
    rate: float
    power: float
    log_scale: float
    rms: float


def write_profile_csv(profile: RadialProfile, path):
    """Columns r,u,du with a leading '#' comment carrying the parameters."""
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(profile.meta, sort_keys=True, default=str) + "\n")
        fh.write("r,u,du\n")
        for r, u, du in zip(profile.r, profile.u, profile.du):
            fh.write(f"{r:.17g},{u:.17g},{du:.17g}\n")


def _rk4_path(rhs, t0, t1, y0, steps):
    """Classical fixed-step RK4; raises StepFailure on a non-finite state."""
    h = (t1 - t0) / steps
    ts = t0 + h * np.arange(steps + 1)
    y = np.array(y0, dtype=float)
    out = np.empty((steps + 1, y.size))
    out[0] = y
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            t = ts[k]
            k1 = rhs(t, y)
            k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
            k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
            k4 = rhs(t + h, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(y)):
                raise StepFailure(f"non-finite state at t={t + h:g}")
            out[k + 1] = y
    return ts, out


def eigen_profile_1d(lam, p, v0, s0, t_span, steps=20000) -> RadialProfile:
    """Monotone 1-D profile of ((v')^(p-1))' = lam v^(p-1).

    Integrates the first-order pair (v, m) with m = (v')^(p-1), m(t0) =
    (s0*v0)^(p-1), by fixed-step RK4 so that halving the step shrinks the
    error by the scheme's full fourth order.

    Args:
        lam: eigenvalue coefficient, > 0
        p: exponent, > 1
        v0: initial value, > 0
        s0: initial ratio v'(t0)/v(t0), >= 0 (monotone regime)
        t_span: (t0, t1) integration interval
        steps: number of RK4 steps

    Returns:
        RadialProfile sampled on the uniform grid (r holds t).
    """
    if v0 <= 0.0:
        raise DomainError("v0 must be positive")
    if s0 < 0.0:
        raise DomainError("s0 must be >= 0 in the monotone regime")
    if lam <= 0.0:
        raise DomainError("lam must be positive")
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise DomainError("t_span must be increasing")

    pm1 = p - 1.0

    def rhs(_t, y):
        v, m = y
        dv = max(m, 0.0) ** (1.0 / pm1)
        return np.array([dv, lam * v ** pm1])

    m0 = (s0 * v0) ** pm1 if s0 > 0.0 else 0.0
    ts, ys = _rk4_path(rhs, t0, t1, (v0, m0), steps)
    v = ys[:, 0]
    dv = np.maximum(ys[:, 1], 0.0) ** (1.0 / pm1)
    # the grid is shifted to positive abscissae if t0 <= 0 (r must be > 0)
    shift = 0.0 if t0 > 0.0 else 1.0 - t0
    meta = {"kind": "eigen_profile_1d", "lam": lam, "p": p, "v0": v0, "s0": s0,
            "t0": t0, "t1": t1, "steps": steps, "t_shift": shift}
    return RadialProfile(r=ts + shift, u=v, du=dv, meta=meta)


def riccati_ratio_flow(lam, p, s0, t_span, samples=501):
    """Flow of the ratio s = v'/v: (p-1) s^(p-2) s' + (p-1) s^p = lam.

    The unique positive rest point is alpha = (lam/(p-1))^(1/p).  Returns
    (t, s) sample arrays.  Raises SingularRatio if s reaches zero, where the
    s^(p-2) coefficient degenerates.
    """
    if s0 <= 0.0:
        raise DomainError("s0 must be positive")
    t0, t1 = float(t_span[0]), float(t_span[1])
    pm1 = p - 1.0

    def rhs(_t, y):
        s = y[0]
        return [lam * s ** (2.0 - p) / pm1 - s * s]

    def hit_zero(_t, y):
        return y[0] - 1e-12
    hit_zero.terminal = True
    hit_zero.direction = -1

    t_eval = np.linspace(t0, t1, samples)
    sol = solve_ivp(rhs, (t0, t1), [s0], method="DOP853", rtol=1e-11,
                    atol=1e-13, t_eval=t_eval, events=hit_zero)
    if sol.t_events[0].size:
        raise SingularRatio(f"ratio reached zero at t={sol.t_events[0][0]:g}")
    if not sol.success:
        raise StepFailure(sol.message)
    return sol.t, sol.y[0]


def _ratio_rhs(n, p, lam):
    """RHS of the radial exterior ratio flow for sigma = u'/u.

    From (r^(n-1)|u'|^(p-2)u')' = lam r^(n-1) u^(p-1):
        sigma' = lam / ((p-1)|sigma|^(p-2)) - sigma^2 - (n-1) sigma / ((p-1) r)
    """
    pm1 = p - 1.0
    nm1 = n - 1.0

    def rhs(r, y):
        sig = y[1]
        core = lam / (pm1 * abs(sig) ** (p - 2.0)) if sig != 0.0 else 0.0
        return [sig, core - sig * sig - nm1 * sig / (pm1 * r)]

    return rhs


def _classify_ratio(n, p, lam, r0, sigma0, sigma_up, sigma_floor, r_cap,
                    rtol=1e-9):
    """Side on which a trial ratio trajectory leaves the decaying corridor.

    'up' is definitive growth (sigma above the decaying branch can only rise:
    once u' >= 0 the flux stays positive and u grows to the overflow barrier);
    'down' is definitive vanishing (sigma below the branch dives to -inf,
    i.e. u crosses zero at finite radius).
    """
    if sigma0 >= sigma_up:
        return "up"
    if sigma0 <= sigma_floor:
        return "down"
    rhs = _ratio_rhs(n, p, lam)

    def up(_r, y):
        return y[1] - sigma_up
    up.terminal = True
    up.direction = 1

    def down(_r, y):
        return y[1] - sigma_floor
    down.terminal = True
    down.direction = -1

    sol = solve_ivp(rhs, (r0, r_cap), [0.0, sigma0], method="RK45",
                    rtol=rtol, atol=1e-12, events=(up, down))
    if sol.t_events[0].size:
        return "up"
    if sol.t_events[1].size:
        return "down"
    return "none"


def radial_exterior_eigen(n, p, lam, r0, r_max, bracket=None,
                          grid_points=800) -> ShootResult:
    """Decaying positive exterior solution of the radial eigen-equation.

    Bisects the initial ratio u'(r0)/u(r0) over `bracket` (default
    [-10*alpha, 0]) between definitive growth and zero-crossing, then realizes
    the isolated branch on a log-spaced grid via the stable inward integration
    of the ratio flow.  The profile is normalized to u(r0) = 1.

    Raises NoSeparatrix when both bracket endpoints classify identically
    (degenerate bracket or span too short to separate the behaviors).
    """
    if r0 <= 0.0:
        raise DomainError("r0 must be positive")
    if r_max < 10.0 * r0:
        raise DomainError("r_max must be at least 10*r0")
    alpha = eigen_rate_alpha(lam, p)
    if bracket is None:
        bracket = (-10.0 * alpha, 0.0)
    lo, hi = float(bracket[0]), float(bracket[1])

    sigma_up = -0.5 * alpha
    sigma_floor = min(lo, -10.0 * alpha) - 1.0
    r_cap = r_max + 80.0 / (p * alpha)

    def classify(s):
        return _classify_ratio(n, p, lam, r0, s, sigma_up, sigma_floor, r_cap)

    side_lo, side_hi = classify(lo), classify(hi)
    if side_lo == side_hi:
        raise NoSeparatrix(
            f"bracket endpoints both classify as '{side_lo}'; widen the bracket"
        )
    if side_lo == "up":  # orient so lo is the zero-crossing side
        lo, hi = hi, lo

    iters = 0
    for _ in range(MAX_BISECT):
        if abs(hi - lo) <= BRACKET_WIDTH * max(1.0, abs(lo), abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        side = classify(mid)
        iters += 1
        if side == "none":
            break  # trial indistinguishable from the branch at this precision
        if side == "up":
            hi = mid
        else:
            lo = mid
    s_star = 0.5 * (lo + hi)

    # Stable inward pass: the decaying branch attracts the ratio flow run
    # from large radius toward r0, so the transient beyond r_max is forgotten
    # at rate exp(-p*alpha*(R_start - r)).
    pad = 35.0 / (p * alpha)
    r_start = r_max + pad
    r_grid = np.geomspace(r0, r_max, grid_points)
    rhs = _ratio_rhs(n, p, lam)
    sol = solve_ivp(rhs, (r_start, r0), [0.0, s_star], method="DOP853",
                    rtol=1e-12, atol=1e-14, t_eval=r_grid[::-1])
    if not sol.success:
        raise StepFailure(sol.message)
    log_u = sol.y[0][::-1].copy()
    sigma = sol.y[1][::-1].copy()
    log_u -= log_u[0]  # normalize u(r0) = 1

    mismatch = abs(sigma[0] - s_star)
    with np.errstate(under="ignore"):
        u = np.exp(log_u)
    meta = {"kind": "radial_exterior_eigen", "n": n, "p": p, "lam": lam,
            "r0": r0, "r_max": r_max, "alpha": alpha, "shoot_param": s_star,
            "ratio_mismatch": mismatch, "bracket_final": (lo, hi),
            "bracket_classes": ("hit_zero", "blow_up")}
    profile = RadialProfile(r=r_grid, u=u, du=sigma * u, meta=meta,
                            log_u=log_u, ratio=sigma)
    return ShootResult(profile=profile, shoot_param=s_star,
                       bisection_iters=iters, classification=ShootClass.DECAYING)


def hardy_power_residual(n, p, a, mu, gamma, r_samples) -> float:
    """Normalized residual of u = r^(-gamma) in the weighted radial equation.

    Evaluates -(r^(n-1-ap)|u'|^(p-2)u')' - mu r^(n-1-(a+1)p) u^(p-1) from the
    closed-form derivative at each sample and divides by the common power
    r^(n-1-(a+1)p-(p-1)gamma); the result is |f(gamma) - mu| up to rounding.
    """
    r = np.asarray(r_samples, dtype=float)
    if np.any(r <= 0.0):
        raise DomainError("r_samples must be positive")
    pm1 = p - 1.0
    if gamma == 0.0:
        flux_coef = 0.0
    else:
        flux_coef = -abs(gamma) ** (p - 2.0) * gamma  # |u'|^(p-2) u' = c * r^...
    e_flux = n - 1.0 - a * p - (gamma + 1.0) * pm1
    lhs = -flux_coef * e_flux * np.power(r, e_flux - 1.0)
    e_rhs = n - 1.0 - (a + 1.0) * p - gamma * pm1
    rhs = mu * np.power(r, e_rhs)
    norm = np.power(r, e_rhs)
    return float(np.max(np.abs((lhs - rhs) / norm)))


def series_start_radius(params: ProblemParams, c=1.0, rel=1e-8) -> float:
    """Inner radius where the non-leading terms fall below `rel` relatively.

    Near the origin the singular solution is c*r^(-gamma1) to leading order;
    the eigenvalue and source terms perturb the balance by factors
    lam*r^p/mu and (A c^(q-p)/mu) r^(p-(q-p)*gamma1).
    """
    if params.mu <= 0.0:
        raise DomainError("start-radius rule needs mu > 0")
    g1 = indicial_roots(params).gamma1
    r_in = math.inf
    if params.lam > 0.0:
        r_in = min(r_in, (rel * params.mu / params.lam) ** (1.0 / params.p))
    if params.nonlinearity is not None:
        q, amp = params.nonlinearity.q, params.nonlinearity.amplitude
        expo = params.p - (q - params.p) * g1
        if amp > 0.0 and expo > 0.0:
            r_in = min(r_in, (rel * params.mu / (amp * c ** (q - params.p)))
                       ** (1.0 / expo))
    if not math.isfinite(r_in):
        raise DomainError("no perturbation terms active; choose r_in directly")
    return r_in


def shoot_singular_profile(params: ProblemParams, r_in, r_out, c=1.0,
                           grid_points=600) -> ShootResult:
    """Outward integration of the singular radial problem from a power series.

    Solves the radial form of the perturbed equation
        -(r^(n-1)|u'|^(p-2)u')' = r^(n-1) [mu r^(-p) u^(p-1) - lam u^(p-1)
                                           + A u^(q-1)]
    in log-radius with the divergence-form flux m = r^(n-1)|u'|^(p-2)u' as a
    state variable, starting from u = c r^(-gamma1), u' = -gamma1 c
    r^(-gamma1-1) at r_in.  Classification is BLOW_UP/HIT_ZERO at the
    1e150 / 1e-150 barriers, DECAYING when r_out is reached.
    """
    if not r_in < r_out:
        raise DomainError("r_in must be < r_out")
    if params.a != 0.0:
        raise DomainError("singular shoot is posed for the unweighted case a = 0")
    mu_bar = ((params.n - params.p) / params.p) ** params.p
    if not (0.0 <= params.mu < mu_bar):
        raise DomainError("mu must lie in [0, mu_bar)")
    n, p, mu, lam = params.n, params.p, params.mu, params.lam
    pm1 = p - 1.0
    g1 = indicial_roots(params).gamma1

    amp, q = 0.0, 0.0
    if params.nonlinearity is not None:
        amp, q = params.nonlinearity.amplitude, params.nonlinearity.q

    def rhs(t, y):
        u, m = y
        r = math.exp(t)
        du_dt = math.copysign(abs(m) ** (1.0 / pm1), m) * r ** (1.0 - (n - 1.0) / pm1)
        zero_order = lam * u ** pm1 - mu * r ** (-p) * u ** pm1
        if amp:
            zero_order -= amp * u ** (q - 1.0)
        return [du_dt, r ** n * zero_order]

    def overflow(_t, y):
        return y[0] - OVERFLOW_BARRIER
    overflow.terminal = True
    overflow.direction = 1

    def vanish(_t, y):
        return y[0] - ZERO_BARRIER
    vanish.terminal = True
    vanish.direction = -1

    t_in, t_out = math.log(r_in), math.log(r_out)
    u_in = c * r_in ** (-g1)
    m_in = -((g1 * c) ** pm1) * r_in ** (n - 1.0 - (g1 + 1.0) * pm1) if g1 > 0.0 else 0.0
    t_eval = np.linspace(t_in, t_out, grid_points)
    sol = solve_ivp(rhs, (t_in, t_out), [u_in, m_in], method="DOP853",
                    rtol=1e-10, atol=1e-12, t_eval=t_eval,
                    events=(overflow, vanish))
    if sol.t_events[0].size:
        cls = ShootClass.BLOW_UP
    elif sol.t_events[1].size:
        cls = ShootClass.HIT_ZERO
    elif sol.success:
        cls = ShootClass.DECAYING
    else:
        raise StepFailure(sol.message)

    ts, u, m = sol.t, sol.y[0], sol.y[1]
    r = np.exp(ts)
    du = np.sign(m) * np.abs(m) ** (1.0 / pm1) * r ** (-(n - 1.0) / pm1)
    meta = {"kind": "shoot_singular_profile", "n": n, "p": p, "mu": mu,
            "lam": lam, "a": params.a, "q": q or None, "amplitude": amp or None,
            "gamma1": g1, "c": c, "r_in": r_in, "r_out": r_out}
    profile = RadialProfile(r=r, u=u, du=du, meta=meta)
    return ShootResult(profile=profile, shoot_param=c, bisection_iters=0,
                       classification=cls)


def fit_decay_exponents(profile: RadialProfile, alpha=None, window=None) -> DecayFit:
    """Least-squares fit of ln u = -rate*r - power*ln r + c on a radial window.

    The window defaults to the outer half [r_max/2, r_max].  `alpha` is the
    reference exponential rate carried through for reporting; it does not
    enter the fit.  Raises IllConditioned when fewer than 10 samples fall in
    the window.
    """
    if window is None:
        window = (0.5 * profile.r_max, profile.r_max)
    w0, w1 = window
    mask = (profile.r >= w0) & (profile.r <= w1)
    if int(mask.sum()) < 10:
        raise IllConditioned(f"only {int(mask.sum())} samples in window {window}")
    r = profile.r[mask]
    log_u = profile.log_values()[mask]
    design = np.column_stack([-r, -np.log(r), np.ones_like(r)])
    coef, *_ = np.linalg.lstsq(design, log_u, rcond=None)
    resid = design @ coef - log_u
    rms = float(np.sqrt(np.mean(resid ** 2)))
    return DecayFit(rate=float(coef[0]), power=float(coef[1]),
                    log_scale=float(coef[2]), rms=rms)


def gradient_ratio_curve(profile: RadialProfile, mode="scaled") -> np.ndarray:
    """Pairs (r, ratio) with ratio = r|u'|/u ('scaled') or |u'|/u ('plain')."""
    ratio = np.abs(profile.ratio_values())
    if mode == "scaled":
        ratio = profile.r * ratio
    elif mode != "plain":
        raise DomainError("mode must be 'scaled' or 'plain'")
    return np.column_stack([profile.r, ratio])
