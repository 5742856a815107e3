"""Closed-form constants and root solving for the power-law index function.

Pure powers r**(-g) solve the weighted radial equations exactly when g is a
real root of

    index_f(g) = |g|^(p-2) * g * (n - (a+1)*p - (p-1)*g) = mu.

index_f rises to its unique maximum mu_bar = |(n-(a+1)p)/p|^p at
g_star = (n-(a+1)p)/p and falls on either side, so for mu <= mu_bar there are
exactly two real roots g1 <= g_star <= g2 (one double root at mu = mu_bar).
Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import DomainError, NoRealRoot

# Absolute/relative tolerances fixed once for the whole package.
RESIDUAL_RTOL = 1e-12        # |f(root) - mu| <= RESIDUAL_RTOL * max(1, |mu|)
DOUBLE_ROOT_RTOL = 1e-10     # |mu - mu_bar| below this collapses the bracket
CRITICAL_WEIGHT_ATOL = 1e-14  # exact-zero tolerance on a - (n-p)/p


@dataclass(frozen=True)
class Nonlinearity:
    """Power-type zero-order term A*u^(q-1) with p < q < n*p/(n-p)."""

    q: float
    amplitude: float = 1.0


@dataclass(frozen=True)
class ProblemParams:
    """Equation parameters shared by every module.

    n    -- space dimension (integer, >= 2)
    p    -- quasi-linear exponent, 1 < p < n
    a    -- radial weight exponent (|x|^(-ap) under the divergence)
    mu   -- coefficient of the singular zero-order term
    lam  -- eigenvalue coefficient (>= 0 where used)
    nonlinearity -- optional power-type source term descriptor
    """

    n: int
    p: float
    a: float = 0.0
    mu: float = 0.0
    lam: float = 0.0
    nonlinearity: Nonlinearity | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError("n must be an integer >= 2")
        if not (1.0 < self.p < self.n):
            raise DomainError("p must lie in (1, n)")
        if self.lam < 0.0:
            raise DomainError("lam must be >= 0 (no positive solutions otherwise)")
        if self.nonlinearity is not None:
            q = self.nonlinearity.q
            if not (self.p < q < self.sobolev_critical):
                raise DomainError("nonlinearity exponent q must lie in (p, n*p/(n-p))")

    @property
    def sobolev_critical(self) -> float:
        return self.n * self.p / (self.n - self.p)

    @property
    def weight_critical(self) -> float:
        """Weight exponent at which the index peak crosses zero."""
        return (self.n - self.p) / self.p


class RootPlacement(Enum):
    """Which side of the case table a root pair falls on."""

    BELOW_CRITICAL_NONNEG_MU = "a < (n-p)/p, 0 <= mu <= mu_bar"
    BELOW_CRITICAL_NEG_MU = "a < (n-p)/p, mu < 0"
    AT_CRITICAL = "a = (n-p)/p, mu <= 0"
    ABOVE_CRITICAL_NONNEG_MU = "a > (n-p)/p, 0 <= mu <= mu_bar"
    ABOVE_CRITICAL_NEG_MU = "a > (n-p)/p, mu < 0"


@dataclass(frozen=True)
class IndicialData:
    """Solved root pair with its classification.

    gamma1 <= gamma_star <= gamma2 always; all three coincide exactly when
    double_root is set.
    """

    mu_bar: float
    gamma_star: float
    gamma1: float
    gamma2: float
    placement: RootPlacement
    double_root: bool


def hardy_best_constant(n, p, a=0.0):
    """Best constant |(n-(a+1)p)/p|^p of the two-weight Hardy inequality.

    Vanishes exactly at a = (n-p)/p.
    """
    if not (1.0 < p < n):
        raise DomainError("p must lie in (1, n)")
    return abs((n - (a + 1.0) * p) / p) ** p


def eigen_rate_alpha(lam, p):
    """Exponential rate (lam/(p-1))^(1/p) of entire eigenfunctions, lam > 0."""
    if lam <= 0.0:
        raise DomainError("rate defined for lam > 0 only")
    if p <= 1.0:
        raise DomainError("p must exceed 1")
    return (lam / (p - 1.0)) ** (1.0 / p)


def gamma_star(n, p, a=0.0):
    """Location (n-(a+1)p)/p of the index function's maximum."""
    return (n - (a + 1.0) * p) / p


def _f_of(gamma, p, big_d):
    if gamma == 0.0:
        return 0.0
    return abs(gamma) ** (p - 2.0) * gamma * (big_d - (p - 1.0) * gamma)


def auxiliary_f(gamma, n, p, a=0.0):
    """Index function |g|^(p-2) g (n-(a+1)p-(p-1)g); f(0) = 0 by continuity."""
    return _f_of(gamma, p, n - (a + 1.0) * p)


def _auxiliary_f_prime(gamma, n, p, a):
    # f'(g) = p (p-1) |g|^(p-2) (g_star - g); infinite at 0 when p < 2
    if gamma == 0.0:
        return math.inf if p < 2.0 else (0.0 if p > 2.0 else n - (a + 1.0) * p)
    return p * (p - 1.0) * abs(gamma) ** (p - 2.0) * (gamma_star(n, p, a) - gamma)


def critical_exponent(n, p, a, b):
    """Largest admissible source exponent n*p/(n - (a+1-b)p) for the weighted problem."""
    if not (1.0 < p < n):
        raise DomainError("p must lie in (1, n)")
    if not (0.0 <= a < (n - p) / p):
        raise DomainError("a must lie in [0, (n-p)/p)")
    if not (a <= b < a + 1.0):
        raise DomainError("b must lie in [a, a+1)")
    return n * p / (n - (a + 1.0 - b) * p)


_LOG_FLOOR = -700.0  # ln of the smallest magnitude the solver resolves


def _log_bisect(fn, x_lo, x_hi):
    """Bisect fn (monotone, sign change) over a log-magnitude coordinate."""
    f_lo, f_hi = fn(x_lo), fn(x_hi)
    if f_lo == 0.0:
        return x_lo
    if f_hi == 0.0:
        return x_hi
    if (f_lo > 0.0) == (f_hi > 0.0):
        raise NoRealRoot("no sign change inside the branch bracket")
    for _ in range(200):
        if x_hi - x_lo <= 1e-13:
            break
        mid = 0.5 * (x_lo + x_hi)
        fm = fn(mid)
        if fm == 0.0:
            return mid
        if (fm > 0.0) == (f_hi > 0.0):
            x_hi, f_hi = mid, fm
        else:
            x_lo, f_lo = mid, fm
    return 0.5 * (x_lo + x_hi)


def _expand_log(fn, x_start, direction, want_nonpositive=True):
    """March x by doubling steps until fn crosses to the wanted sign."""
    step = 1.0
    x = x_start
    for _ in range(400):
        x = x_start + direction * step
        val = fn(x)
        if (val <= 0.0) if want_nonpositive else (val >= 0.0):
            return x
        if x < _LOG_FLOOR:
            raise NoRealRoot("root magnitude below representable range")
        step *= 2.0
    raise NoRealRoot("bracket expansion failed; no sign change found")


def _solve_branches(mu, p, big_d):
    """Both roots of the index equation for mu < mu_bar, mu != 0.

    Works on the canonical orientation D > 0 (the index function is even
    under (gamma, D) -> (-gamma, -D)) and bisects in ln|gamma|, which
    resolves the extreme root magnitudes that appear for p close to 1.
    """
    if big_d < 0.0:
        m1, m2 = _solve_branches(mu, p, -big_d)
        return -m2, -m1
    gs = big_d / p
    edge = big_d / (p - 1.0)

    def f_pos(x):
        return _f_of(math.exp(x), p, big_d) - mu

    def f_neg_mag(x):
        g = math.exp(x)
        return -(g ** (p - 1.0)) * (big_d + (p - 1.0) * g) - mu

    if mu > 0.0:
        # both roots positive: (0, gs) on the rising side, (gs, edge) falling.
        # The outer g2 endpoint sits past the zero crossing at `edge` so its
        # sign does not ride on rounding noise when mu is tiny.
        x_lo = _expand_log(f_pos, math.log(gs), -1.0)
        g1 = math.exp(_log_bisect(f_pos, x_lo, math.log(gs)))
        g2 = math.exp(_log_bisect(f_pos, math.log(gs), math.log(edge) + 1e-7))
    else:
        # g1 < 0 with |g1| solving |g|^(p-1)(D+(p-1)|g|) = -mu; g2 > edge.
        # The inner g2 endpoint is offset below the zero crossing at `edge`
        # so its sign does not ride on rounding noise when |mu| is tiny.
        x_hi = _expand_log(f_neg_mag, 0.0, 1.0)
        x_lo = _expand_log(f_neg_mag, 0.0, -1.0, want_nonpositive=False)
        g1 = -math.exp(_log_bisect(f_neg_mag, x_lo, x_hi))
        x_in = math.log(edge) - 1e-7
        x_hi = _expand_log(f_pos, x_in, 1.0)
        g2 = math.exp(_log_bisect(f_pos, x_in, x_hi))
    return g1, g2


def _polish(root, mu, n, p, a, lo, hi):
    """Guarded Newton refinement of a bisected root."""
    bound = RESIDUAL_RTOL * max(1.0, abs(mu))
    for _ in range(6):
        resid = auxiliary_f(root, n, p, a) - mu
        if abs(resid) <= 0.25 * bound:
            break
        slope = _auxiliary_f_prime(root, n, p, a)
        if not math.isfinite(slope) or slope == 0.0:
            break
        cand = root - resid / slope
        if not (lo <= cand <= hi) or cand == root:
            break
        root = cand
    return root


def indicial_roots(params: ProblemParams) -> IndicialData:
    """Both real roots of the index equation f(gamma) = mu, classified.

    Raises NoRealRoot when mu exceeds mu_bar beyond tolerance.  A double root
    gamma1 = gamma2 = gamma_star is reported when |mu - mu_bar| is within the
    detection tolerance (the two bisection brackets collapse below it).
    """
    n, p, a, mu = params.n, params.p, params.a, params.mu
    mu_bar = hardy_best_constant(n, p, a)
    gs = gamma_star(n, p, a)

    if mu > mu_bar + RESIDUAL_RTOL * max(1.0, mu_bar):
        raise NoRealRoot(
            f"mu={mu!r} exceeds the admissible maximum mu_bar={mu_bar!r}"
        )

    big_d = n - (a + 1.0) * p
    if abs(mu - mu_bar) <= DOUBLE_ROOT_RTOL * max(1.0, mu_bar):
        g1 = g2 = gs
        double = True
    elif mu == 0.0:
        # factors exactly: gamma = 0 or gamma = (n-(a+1)p)/(p-1)
        other = big_d / (p - 1.0)
        g1, g2 = min(0.0, other), max(0.0, other)
        double = False
    elif big_d == 0.0:
        # degenerate peak: f(gamma) = -(p-1)|gamma|^p, roots symmetric
        mag = (-mu / (p - 1.0)) ** (1.0 / p)
        g1, g2 = -mag, mag
        double = False
    else:
        g1, g2 = _solve_branches(mu, p, big_d)
        w1 = max(1e-6, 1e-6 * abs(g1))
        w2 = max(1e-6, 1e-6 * abs(g2))
        g1 = _polish(g1, mu, n, p, a, g1 - w1, g1 + w1)
        g2 = _polish(g2, mu, n, p, a, g2 - w2, g2 + w2)
        double = False

    bound = max(RESIDUAL_RTOL * max(1.0, abs(mu)),
                DOUBLE_ROOT_RTOL * max(1.0, mu_bar) if double else 0.0)
    for root in (g1, g2):
        resid = abs(auxiliary_f(root, n, p, a) - mu)
        if resid > bound:
            raise RuntimeError(
                f"root residual {resid:g} exceeds tolerance {bound:g}")

    d = a - (n - p) / p
    if abs(d) <= CRITICAL_WEIGHT_ATOL:
        placement = RootPlacement.AT_CRITICAL
    elif d < 0.0:
        placement = (RootPlacement.BELOW_CRITICAL_NONNEG_MU if mu >= 0.0
                     else RootPlacement.BELOW_CRITICAL_NEG_MU)
    else:
        placement = (RootPlacement.ABOVE_CRITICAL_NONNEG_MU if mu >= 0.0
                     else RootPlacement.ABOVE_CRITICAL_NEG_MU)

    return IndicialData(mu_bar=mu_bar, gamma_star=gs, gamma1=g1, gamma2=g2,
                        placement=placement, double_root=double)


def placement_satisfied(data: IndicialData, n, p, a, tol=1e-10) -> bool:
    """Check the case-table inequalities with non-strict comparisons at tol."""
    g1, g2, gs = data.gamma1, data.gamma2, data.gamma_star
    edge = (n - (a + 1.0) * p) / (p - 1.0)
    case = data.placement
    if case is RootPlacement.BELOW_CRITICAL_NONNEG_MU:
        chain = (-tol <= g1, g1 <= gs + tol, gs <= g2 + tol, g2 <= edge + tol)
    elif case is RootPlacement.BELOW_CRITICAL_NEG_MU:
        chain = (g1 <= tol, 0.0 <= edge + tol, edge <= g2 + tol)
    elif case is RootPlacement.AT_CRITICAL:
        chain = (g1 <= tol, -tol <= g2)
    elif case is RootPlacement.ABOVE_CRITICAL_NONNEG_MU:
        chain = (edge - tol <= g1, g1 <= gs + tol, gs <= g2 + tol, g2 <= tol)
    else:
        chain = (g1 <= edge + tol, edge <= tol, -tol <= g2)
    return all(chain)
