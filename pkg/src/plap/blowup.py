"""Translation and dilation rescaling limits of radial profiles.

Realizes the limit objects behind the asymptotic arguments: the affine
limit of distance differences along a direction, the far-field kernel ratio
u(x - t*xi)/u(-t*xi), the origin blow-up u(R s)/u(R) against a pure power,
and the far-field translate u(t + s)/u(t) against a pure exponential.
Profiles are interpolated with a monotone cubic in the coordinates where
each limit family is exactly linear: (ln r, ln u) for dilations and the
kernel ratio, (r, ln u) for translations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, OutOfRange
from .radial_ode import RadialProfile

ORIGIN_WINDOW = 10.0      # default half-decade span s in [1/10, 10] for dilations
TRANSLATE_WINDOW = 2.0    # default ray half-width s in [-2, 2] for translations


@dataclass(frozen=True)
class Direction:
    """Unit vector; the norm must be 1 within 1e-14."""

    xi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "xi", np.asarray(self.xi, dtype=float))
        if abs(float(np.linalg.norm(self.xi)) - 1.0) > 1e-14:
            raise DomainError("direction must be a unit vector")


@dataclass(frozen=True)
class RescaleReport:
    """Per-scale sup-norm distances of a rescaled family to its limit."""

    scales: np.ndarray
    sup_distance: np.ndarray
    grad_distance: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "scales", np.asarray(self.scales, dtype=float))
        object.__setattr__(self, "sup_distance", np.asarray(self.sup_distance, dtype=float))
        object.__setattr__(self, "grad_distance", np.asarray(self.grad_distance, dtype=float))
        if not (self.scales.shape == self.sup_distance.shape == self.grad_distance.shape):
            raise DomainError("report columns must have equal length")
        if np.any(self.sup_distance < 0.0) or np.any(self.grad_distance < 0.0):
            raise DomainError("distances must be nonnegative")


def write_rescale_csv(report: RescaleReport, path):
    with open(path, "w", newline="") as fh:
        fh.write("scale,sup_distance,grad_distance\n")
        for k, s, g in zip(report.scales, report.sup_distance, report.grad_distance):
            fh.write(f"{k:.17g},{s:.17g},{g:.17g}\n")


def busemann(x, xi, t) -> float:
    """Distance gauge t - |x - t*xi| along direction xi, for t > |x|."""
    x = np.asarray(x, dtype=float)
    xi = Direction(xi).xi
    t = float(t)
    if t <= float(np.linalg.norm(x)):
        raise DomainError("t must exceed |x|")
    return t - float(np.linalg.norm(x - t * xi))


def busemann_limit(x, xi) -> float:
    """Affine limit <x, xi> of the distance gauge as t grows."""
    x = np.asarray(x, dtype=float)
    xi = Direction(xi).xi
    return float(np.dot(x, xi))


def _interp_pair(profile: RadialProfile):
    interp = profile.log_interp()
    return interp, interp.derivative()


def _check_radius(profile: RadialProfile, r, what):
    if r < profile.r_min or r > profile.r_max:
        raise OutOfRange(
            f"{what}: radius {r:g} outside sampled span "
            f"[{profile.r_min:g}, {profile.r_max:g}]"
        )


def martin_kernel_estimate(profile: RadialProfile, x, xi, t) -> float:
    """Far-field kernel ratio u(|x - t*xi|)/u(t) from a radial profile."""
    x = np.asarray(x, dtype=float)
    xi = Direction(xi).xi
    t = float(t)
    r1 = float(np.linalg.norm(x - t * xi))
    _check_radius(profile, r1, "martin_kernel_estimate")
    _check_radius(profile, t, "martin_kernel_estimate")
    interp = profile.log_interp()
    return float(math.exp(interp(math.log(r1)) - interp(math.log(t))))


def rescale_near_zero(profile: RadialProfile, scales, gamma1,
                      window=ORIGIN_WINDOW, samples=201) -> RescaleReport:
    """Dilation family u(R s)/u(R) against the pure power s^(-gamma1).

    For each R in `scales`, the normalized dilate is evaluated on the fixed
    window s in [1/window, window] and its sup-distance (and the distance of
    its s-derivative) to the power limit is recorded.
    """
    scales = np.asarray(list(scales), dtype=float)
    if scales.size == 0:
        empty = np.empty(0)
        return RescaleReport(scales=scales, sup_distance=empty.copy(),
                             grad_distance=empty.copy())
    s = np.geomspace(1.0 / window, window, samples)
    target = s ** (-gamma1)
    dtarget = -gamma1 * s ** (-gamma1 - 1.0)
    interp, dinterp = _interp_pair(profile)
    sup_d = np.empty(scales.size)
    grad_d = np.empty(scales.size)
    for k, R in enumerate(scales):
        _check_radius(profile, R / window, "rescale_near_zero")
        _check_radius(profile, R * window, "rescale_near_zero")
        log_r = np.log(R * s)
        u_k = np.exp(interp(log_r) - interp(math.log(R)))
        du_k = u_k * dinterp(log_r) / s
        sup_d[k] = np.max(np.abs(u_k - target))
        grad_d[k] = np.max(np.abs(du_k - dtarget))
    return RescaleReport(scales=scales, sup_distance=sup_d, grad_distance=grad_d)


def translate_rescale_at_infinity(profile: RadialProfile, shifts, alpha,
                                  window=TRANSLATE_WINDOW, samples=201) -> RescaleReport:
    """Translation family u(t + s)/u(t) against the pure exponential e^(-alpha s).

    For each t in `shifts`, the normalized translate on s in [-window, window]
    is compared with exp(-alpha*s) in sup norm, together with its s-derivative.
    Interpolation is in (r, ln u) rather than log-log: the exponential limit
    family is exactly linear there, so the fixed point is exact to rounding.
    """
    shifts = np.asarray(list(shifts), dtype=float)
    if shifts.size == 0:
        empty = np.empty(0)
        return RescaleReport(scales=shifts, sup_distance=empty.copy(),
                             grad_distance=empty.copy())
    s = np.linspace(-window, window, samples) if window > 0.0 else np.zeros(1)
    target = np.exp(-alpha * s)
    dtarget = -alpha * target
    interp = PchipInterpolator(profile.r, profile.log_values())
    dinterp = interp.derivative()
    sup_d = np.empty(shifts.size)
    grad_d = np.empty(shifts.size)
    for k, t in enumerate(shifts):
        _check_radius(profile, t - window, "translate_rescale_at_infinity")
        _check_radius(profile, t + window, "translate_rescale_at_infinity")
        r = t + s
        v_k = np.exp(interp(r) - interp(t))
        dv_k = v_k * dinterp(r)
        sup_d[k] = np.max(np.abs(v_k - target))
        grad_d[k] = np.max(np.abs(dv_k - dtarget))
    return RescaleReport(scales=shifts, sup_distance=sup_d, grad_distance=grad_d)
