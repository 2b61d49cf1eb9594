"""Standard-normal and bivariate-normal tail primitives.

The central object is the upper tail probability of a standard bivariate
normal pair with correlation ``rho``,

    ell(c1, c2; rho) = P(X > c1, Y > c2),

together with its derivative in ``rho``, its closed-form values at
``rho = +-1``, and the monotone inverse ``rho = ell^{-1}(c1, c2; p)`` that
turns a joint success frequency into a tetrachoric correlation.

``ell`` is evaluated by integrating the closed-form correlation derivative

    d ell / d rho = pdf((c1 - rho*c2) / sqrt(1 - rho^2)) * pdf(c2)
                    / sqrt(1 - rho^2)

from an anchor point with a known exact value.  Substituting
``rho = sin(theta)`` absorbs the ``1/sqrt(1 - rho^2)`` factor, so the
integrand becomes the bounded, smooth function

    h(theta) = pdf((c1 - c2*sin(theta)) / cos(theta)) * pdf(c2)

and composite Gauss-Legendre panels resolve it to machine precision.  For
``rho >= 0`` the anchor is ``rho = 0`` (an exact product of univariate
tails); for ``rho < 0`` it is ``rho = -1`` (closed form), which keeps the
result a sum of non-negative terms and preserves relative accuracy when
``ell`` sits close to its lower boundary value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

SQRT_2PI = math.sqrt(2.0 * math.pi)
HALF_PI = 0.5 * math.pi

# Offset from +-1 returned when an inversion target falls on or outside the
# attainable probability bracket.
RHO_CLAMP = 1e-6

# The root finder never evaluates ell closer to +-1 than this.
_RHO_EDGE = 1e-12

# Targets within this distance of a boundary value are treated as on it.
_BRACKET_MARGIN = 1e-12

_GL_ORDER = 20
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_GL_ORDER)

# Panels of this width are enough for the smooth part of the integrand;
# closer than 0.4 to the cos(theta) singularity at pi/2 they are halved
# geometrically.
_PANEL_WIDTH = 0.4
_REFINE_START = HALF_PI - _PANEL_WIDTH


def std_normal_pdf(x):
    """Density of the standard normal: exp(-x^2/2) / sqrt(2*pi)."""
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / SQRT_2PI


def std_normal_cdf(x):
    """Distribution function of the standard normal."""
    return ndtr(np.asarray(x, dtype=float))


def std_normal_quantile(p):
    """Inverse of ``std_normal_cdf`` for p in the open interval (0, 1).

    A rational initial approximation is polished with one Newton step
    wherever the density is large enough for the correction to be stable.
    """
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0.0) | (p >= 1.0)) or not np.all(np.isfinite(p)):
        raise ValueError("quantile argument must lie strictly inside (0, 1)")
    x = ndtri(p)
    d = std_normal_pdf(x)
    refine = d > 1e-300
    correction = np.where(refine, (ndtr(x) - p) / np.where(refine, d, 1.0), 0.0)
    return x - correction


def bvn_boundary_value(c1: float, c2: float, sign: int) -> float:
    """Limit of ell(c1, c2; rho) as rho approaches +1 or -1.

    At perfect positive correlation the pair degenerates to a single
    variable, giving 1 - max{Phi(c1), Phi(c2)}; at perfect negative
    correlation the events are incompatible unless c1 + c2 <= 0, giving
    max{0, 1 - Phi(c1) - Phi(c2)} and 0 otherwise.
    """
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign!r}")
    _check_thresholds(c1, c2)
    if sign == 1:
        return 1.0 - max(float(ndtr(c1)), float(ndtr(c2)))
    if c1 + c2 <= 0.0:
        return max(0.0, 1.0 - float(ndtr(c1)) - float(ndtr(c2)))
    return 0.0


def bvn_upper_tail(c1: float, c2: float, rho: float) -> float:
    """Upper tail probability P(X > c1, Y > c2) at correlation rho.

    Symmetric in (c1, c2) by construction; requires |rho| < 1 (use
    ``bvn_boundary_value`` for the perfectly correlated limits).
    """
    _check_thresholds(c1, c2)
    if not -1.0 < rho < 1.0:
        raise ValueError(f"rho must satisfy |rho| < 1, got {rho!r}")
    # Canonical argument order makes the symmetry exact in floating point.
    if c2 < c1:
        c1, c2 = c2, c1
    base = float(ndtr(-c1)) * float(ndtr(-c2))
    if rho == 0.0:
        return base
    theta = math.asin(abs(rho))
    if rho > 0.0:
        return base + _integral(c1, c2, 0.0, theta, HALF_PI - theta)
    # rho < 0: integrate the derivative upward from rho = -1.  Reflecting
    # theta -> -theta maps the integrand onto h(theta; c1, -c2) over
    # [theta, pi/2], a sum of non-negative terms on top of the exact
    # boundary value.
    lo = bvn_boundary_value(c1, c2, -1)
    upper = _negative_branch_cutoff(c1, c2)
    if upper <= theta:
        return lo
    return lo + _integral(c1, -c2, theta, upper, HALF_PI - upper)


def bvn_upper_tail_drho(c1: float, c2: float, rho: float) -> float:
    """Derivative of the upper tail probability in the correlation.

    Closed form: pdf((c1 - rho*c2)/sqrt(1-rho^2)) * pdf(c2) / sqrt(1-rho^2).
    Strictly positive on |rho| < 1.
    """
    _check_thresholds(c1, c2)
    if not -1.0 < rho < 1.0:
        raise ValueError(f"rho must satisfy |rho| < 1, got {rho!r}")
    root = math.sqrt((1.0 - rho) * (1.0 + rho))
    return (
        float(std_normal_pdf((c1 - rho * c2) / root))
        * float(std_normal_pdf(c2))
        / root
    )


@dataclass(frozen=True)
class InversionResult:
    """Outcome of inverting the upper tail probability in rho.

    ``clamped`` is set when the target probability fell on or outside the
    attainable open interval between the two boundary values (within a
    1e-12 margin); the returned correlation is then ``+-(1 - RHO_CLAMP)``.
    """

    rho_hat: float
    ell_at_rho: float
    iterations: int
    clamped: bool


def tetrachoric_invert(
    c1: float,
    c2: float,
    p_target: float,
    max_iter: int = 200,
) -> InversionResult:
    """Solve ell(c1, c2; rho) = p_target for rho.

    The tail probability is strictly increasing in rho, so the root is
    bracketed by construction; an Illinois-damped false position iteration
    narrows the bracket below 1e-10 (or hits the target exactly).  Targets
    on or beyond the boundary values are clamped to ``+-(1 - RHO_CLAMP)``.
    """
    _check_thresholds(c1, c2)
    if not 0.0 <= p_target <= 1.0:
        raise ValueError(f"p_target must lie in [0, 1], got {p_target!r}")
    lo_val = bvn_boundary_value(c1, c2, -1)
    hi_val = bvn_boundary_value(c1, c2, +1)
    if p_target <= lo_val + _BRACKET_MARGIN:
        rho = -(1.0 - RHO_CLAMP)
        return InversionResult(rho, bvn_upper_tail(c1, c2, rho), 0, True)
    if p_target >= hi_val - _BRACKET_MARGIN:
        rho = 1.0 - RHO_CLAMP
        return InversionResult(rho, bvn_upper_tail(c1, c2, rho), 0, True)

    a, b = -1.0 + _RHO_EDGE, 1.0 - _RHO_EDGE
    fa = bvn_upper_tail(c1, c2, a) - p_target
    fb = bvn_upper_tail(c1, c2, b) - p_target
    if fa >= 0.0:  # root pinned between -1 and the solver edge
        return InversionResult(a, fa + p_target, 0, False)
    if fb <= 0.0:
        return InversionResult(b, fb + p_target, 0, False)

    side = 0
    iterations = 0
    for iterations in range(1, max_iter + 1):
        x = b - fb * (b - a) / (fb - fa)
        if not a < x < b:
            x = 0.5 * (a + b)
        fx = bvn_upper_tail(c1, c2, x) - p_target
        if fx == 0.0:
            a = b = x
            break
        if fx < 0.0:
            a, fa = x, fx
            if side == -1:
                fb *= 0.5
            side = -1
        else:
            b, fb = x, fx
            if side == 1:
                fa *= 0.5
            side = 1
        if b - a <= 1e-10:
            break
    rho_hat = 0.5 * (a + b)
    return InversionResult(
        rho_hat, bvn_upper_tail(c1, c2, rho_hat), iterations, False
    )


def _check_thresholds(c1, c2) -> None:
    if not (math.isfinite(c1) and math.isfinite(c2)):
        raise ValueError(f"thresholds must be finite, got ({c1!r}, {c2!r})")


def _negative_branch_cutoff(c1: float, c2: float) -> float:
    """Upper integration limit for the rho < 0 branch.

    The reflected integrand decays like pdf((c1 + c2)/cos(theta)) toward
    pi/2; once that argument exceeds ~43 the density underflows to exactly
    zero, so the integral can be truncated with no error at all.
    """
    m = abs(c1 + c2)
    if m == 0.0:
        return HALF_PI
    return HALF_PI - min(0.1, m / 43.0)


def _integrand(c1: float, c2: float, theta: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        t = (c1 - c2 * np.sin(theta)) / np.cos(theta)
        return np.exp(-0.5 * (t * t + c2 * c2)) / (2.0 * math.pi)


def _integral(c1: float, c2: float, a: float, b: float, gap: float) -> float:
    """Gauss-Legendre integral of h(theta; c1, c2) over [a, b].

    ``gap`` is the distance from ``b`` to the singular point pi/2; panel
    widths halve geometrically toward ``b`` down to a floor proportional
    to it, which keeps the local feature scale resolved.
    """
    if b <= a:
        return 0.0
    bounds = [a]
    smooth_end = min(b, max(a, _REFINE_START))
    if smooth_end > a:
        k = max(1, math.ceil((smooth_end - a) / _PANEL_WIDTH))
        bounds.extend(np.linspace(a, smooth_end, k + 1)[1:])
    if b > smooth_end:
        rem = b - smooth_end
        floor = max(1e-7, 0.5 * gap)
        while rem > floor:
            rem *= 0.5
            bounds.append(b - rem)
        bounds.append(b)
    bounds = np.asarray(bounds)
    mid = 0.5 * (bounds[1:] + bounds[:-1])
    half = 0.5 * (bounds[1:] - bounds[:-1])
    theta = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    weights = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return float(np.dot(weights, _integrand(c1, c2, theta)))
