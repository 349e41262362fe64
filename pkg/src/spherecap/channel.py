"""Analytic quantities for a unit-noise Gaussian channel with a spherical input.

The input X is uniform on the sphere of radius R in n dimensions and the
observation path is Y_gamma = sqrt(gamma) X + Z with Z standard normal; the
snr fraction gamma runs over [0, 1] and gamma = 1 is the nominal channel.

Everything reduces to one radial coordinate: the output density depends on y
only through ||y||, the squared norms ||sqrt(gamma) x + Z||^2 are noncentral
chi-square, and expectations are delegated to an ExpectationEngine
(quadrature or Monte Carlo, see :mod:`spherecap.expect`).

All probability work is done in the log domain so that large n, R and ||y||
stay in range.  Information quantities are in nats.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy import special

from .expect import NoncentralChiSquare, QuadratureEngine, QuadratureSpec, adaptive_gauss
from .specfun import bessel_ratio, log_bessel_i_over_xv

ArrayLike = Union[float, np.ndarray]

__all__ = [
    "ChannelSpec",
    "InfoDensityProfile",
    "log_output_pdf",
    "output_pdf",
    "conditional_mean_magnitude",
    "mmse_at_snr",
    "mmse_gaussian_reference",
    "posterior_energy_at_zero",
    "mutual_information",
    "mutual_info_via_immse",
    "info_density",
    "info_density_profile",
    "info_density_derivative",
]

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class ChannelSpec:
    """Dimension and sphere radius of the input law."""

    n: int
    R: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be an integer >= 1, got {self.n}")
        if not np.isfinite(self.R) or self.R <= 0.0:
            raise ValueError("R must be finite and > 0")


@dataclass(frozen=True)
class InfoDensityProfile:
    """Sampled curve ||x|| -> i(x) over [0, R], in nats."""

    xnorm_grid: tuple
    values: tuple

    def __post_init__(self):
        if len(self.xnorm_grid) != len(self.values):
            raise ValueError("grid and values must have the same length")
        if not all(np.isfinite(v) for v in self.values):
            raise ValueError("profile values must be finite")


def _check_gamma(gamma: float) -> float:
    if not np.isfinite(gamma) or gamma < 0.0 or gamma > 1.0:
        raise ValueError(f"snr fraction must lie in [0, 1], got {gamma}")
    return float(gamma)


def log_output_pdf(spec: ChannelSpec, ynorm: ArrayLike) -> ArrayLike:
    """log f_Y(y) as a function of ||y||, at full snr (gamma = 1).

    f_Y(y) = Gamma(n/2) e^{-(R^2+||y||^2)/2} / (2 pi^{n/2})
             * I_{n/2-1}(||y|| R) / (||y|| R)^{n/2-1},
    assembled in the log domain; the ||y|| -> 0 limit of the Bessel factor
    is handled analytically.
    """
    n, R = spec.n, spec.R
    arr = np.asarray(ynorm, dtype=float)
    scalar = arr.ndim == 0
    if np.any(arr < 0.0) or np.any(np.isnan(arr)):
        raise ValueError("ynorm must be >= 0")
    v = n / 2.0 - 1.0
    out = (
        special.gammaln(n / 2.0)
        - (R * R + arr * arr) / 2.0
        - np.log(2.0)
        - (n / 2.0) * np.log(np.pi)
        + log_bessel_i_over_xv(v, arr * R)
    )
    return float(out) if scalar else out


def output_pdf(spec: ChannelSpec, ynorm: ArrayLike) -> ArrayLike:
    """Output density of Y = X + Z evaluated at any point with ||y|| = ynorm."""
    out = np.exp(log_output_pdf(spec, ynorm))
    return float(out) if np.ndim(ynorm) == 0 else out


def conditional_mean_magnitude(spec: ChannelSpec, ynorm: ArrayLike) -> ArrayLike:
    """|| E[X | Y = y] || = R * bessel_ratio(n/2, R ||y||), strictly below R."""
    arr = np.asarray(ynorm, dtype=float)
    if np.any(arr < 0.0) or np.any(np.isnan(arr)):
        raise ValueError("ynorm must be >= 0")
    out = spec.R * bessel_ratio(spec.n / 2.0, spec.R * arr)
    return float(out) if np.ndim(ynorm) == 0 else out


def _posterior_energy(spec: ChannelSpec, gamma: float, noncentrality: float, engine) -> float:
    """R^2 E[ratio^2(sqrt(gamma) R sqrt(V))] with V noncentral chi-square."""
    s = np.sqrt(gamma) * spec.R
    v_order = spec.n / 2.0

    def f(v):
        return bessel_ratio(v_order, s * np.sqrt(v)) ** 2

    law = NoncentralChiSquare(spec.n, noncentrality)
    return spec.R * spec.R * engine.expect_ncx2(law, f)


def mmse_at_snr(spec: ChannelSpec, gamma: float, engine) -> float:
    """Minimum mean square error of X from Y_gamma, in [0, R^2]."""
    gamma = _check_gamma(gamma)
    if gamma == 0.0:
        return spec.R * spec.R
    energy = _posterior_energy(spec, gamma, gamma * spec.R * spec.R, engine)
    return spec.R * spec.R - energy


def posterior_energy_at_zero(spec: ChannelSpec, gamma: float, engine) -> float:
    """E ||E[X | Y_gamma]||^2 when the channel is fed the ghost input x = 0."""
    gamma = _check_gamma(gamma)
    if gamma == 0.0:
        return 0.0
    return _posterior_energy(spec, gamma, 0.0, engine)


def mmse_gaussian_reference(n: int, R: float) -> float:
    """MMSE of the moment-matched Gaussian input N(0, (R^2/n) I)."""
    if n < 1 or R < 0.0:
        raise ValueError("need n >= 1 and R >= 0")
    snr = R * R / n
    return n * snr / (1.0 + snr)


def mutual_information(spec: ChannelSpec, engine) -> float:
    """I(X; Y) in nats for the full-snr channel.

    Evaluated at a support point x with ||x|| = R (any one; the information
    density is rotation invariant), which turns the expectation into a
    noncentral chi-square integral of the log Bessel factor.
    """
    n, R = spec.n, spec.R
    v = n / 2.0 - 1.0

    def f(vv):
        return log_bessel_i_over_xv(v, R * np.sqrt(vv)) + v * np.log(R)

    law = NoncentralChiSquare(n, R * R)
    expected_log = engine.expect_ncx2(law, f)
    return R * R + (1.0 - n / 2.0) * np.log(2.0) - special.gammaln(n / 2.0) - expected_log


def mutual_info_via_immse(
    spec: ChannelSpec, engine, qspec: QuadratureSpec = QuadratureSpec()
) -> float:
    """I(X; Y) as half the integral of the MMSE over the snr path.

    Independent route used to cross-check :func:`mutual_information`.
    """
    integral = adaptive_gauss(
        lambda gamma: mmse_at_snr(spec, gamma, engine),
        0.0,
        1.0,
        rel_tol=qspec.rel_tol,
        abs_tol=qspec.abs_tol,
    )
    return 0.5 * integral


def info_density(spec: ChannelSpec, xnorm: float, engine) -> float:
    """i(x) = E[log(f_{Y|X}(Y|x) / f_Y(Y))] for any x with ||x|| = xnorm.

    Reduces to -(n/2) log(2 pi e) - E[log f_Y(sqrt(V))] with V noncentral
    chi-square of degree n and noncentrality xnorm^2.
    """
    n, R = spec.n, spec.R
    if not np.isfinite(xnorm) or xnorm < 0.0 or xnorm > R * (1.0 + 1e-12):
        raise ValueError(f"xnorm must lie in [0, R], got {xnorm}")

    def f(vv):
        return log_output_pdf(spec, np.sqrt(vv))

    law = NoncentralChiSquare(n, min(xnorm, R) ** 2)
    return -(n / 2.0) * (_LOG_2PI + 1.0) - engine.expect_ncx2(law, f)


def info_density_profile(
    spec: ChannelSpec, grid_points: int, engine
) -> InfoDensityProfile:
    """Information density sampled on an evenly spaced radius grid.

    The grid always contains the endpoints 0 and R exactly.
    """
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    grid = np.linspace(0.0, spec.R, grid_points)
    grid[-1] = spec.R
    values = [info_density(spec, x, engine) for x in grid]
    return InfoDensityProfile(tuple(float(x) for x in grid), tuple(values))


def info_density_derivative(spec: ChannelSpec, x1: float, engine) -> float:
    """Radial derivative of the information density at radius x1 in (0, R].

    Writing M(r) = -r + R * bessel_ratio(n/2, r R) for the radial drift of
    the posterior mean, the derivative is -x1 * E[M(sqrt(V)) / sqrt(V)] with
    V noncentral chi-square of degree n + 2 and noncentrality x1^2.  It
    changes sign at most once on (0, R], from negative to positive.
    """
    n, R = spec.n, spec.R
    if not np.isfinite(x1) or x1 <= 0.0 or x1 > R * (1.0 + 1e-12):
        raise ValueError(f"x1 must lie in (0, R], got {x1}")
    v_order = n / 2.0

    def f(vv):
        r = np.sqrt(vv)
        return -1.0 + R * bessel_ratio(v_order, r * R) / r

    law = NoncentralChiSquare(n + 2, min(x1, R) ** 2)
    return -x1 * engine.expect_ncx2(law, f)


def default_engine() -> QuadratureEngine:
    """Quadrature engine with package default tolerances."""
    return QuadratureEngine(QuadratureSpec())
