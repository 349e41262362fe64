"""Expectation engines for the radial laws used throughout the package.

Two interchangeable evaluators are provided for E[f(V)] with V noncentral
chi-square, and for expectations under the mixed law W whose first component
has the smoothed-Gaussian density (Q(w-R) - Q(w))/R and whose remaining
components are standard normal:

* deterministic quadrature (Poisson mixture of central chi-squares, each
  term integrated with generalized Gauss-Laguerre nodes; tensor rules for
  the mixed law), with error control by node doubling, and
* seeded Monte Carlo with identical call signatures, used as an independent
  oracle and for the ``--method mc`` code path.

Quadrature results are pure functions of their inputs; Monte Carlo results
are bit-reproducible for a fixed seed and sample count (numpy PCG64).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Tuple

import numpy as np
from scipy import special, stats

from .specfun import gaussian_tail_q

__all__ = [
    "QuadratureConvergenceError",
    "NoncentralChiSquare",
    "QuadratureSpec",
    "McSpec",
    "BoxcarGaussianLaw",
    "expect_ncx2",
    "expect_boxcar_gauss",
    "sample_ncx2",
    "sample_boxcar_gauss",
    "boxcar_gauss_w1_cdf",
    "mc_expect_ncx2",
    "mc_expect_boxcar_gauss",
    "adaptive_gauss",
    "QuadratureEngine",
    "MonteCarloEngine",
]

_MC_CHUNK = 1 << 20
RNG_ALGORITHM = "numpy-pcg64"


class QuadratureConvergenceError(RuntimeError):
    """Raised when node doubling fails to meet the error tolerances."""


@dataclass(frozen=True)
class NoncentralChiSquare:
    """Law of ||m + Z||^2 with Z standard normal in `dof` dimensions.

    ``noncentrality`` is ||m||^2; zero gives the central chi-square.
    """

    dof: int
    noncentrality: float = 0.0

    def __post_init__(self):
        if int(self.dof) != self.dof or self.dof < 1:
            raise ValueError(f"dof must be an integer >= 1, got {self.dof}")
        if not np.isfinite(self.noncentrality) or self.noncentrality < 0.0:
            raise ValueError("noncentrality must be finite and >= 0")


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and truncation controls for the deterministic engine."""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_nodes: int = 512
    poisson_trunc_mass: float = 1e-14
    radial_trunc_sigmas: float = 12.0

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0 or self.poisson_trunc_mass <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_nodes < 15:
            raise ValueError("max_nodes must be >= 15")
        if self.radial_trunc_sigmas <= 0:
            raise ValueError("radial_trunc_sigmas must be positive")


@dataclass(frozen=True)
class McSpec:
    """Seeded Monte Carlo configuration."""

    seed: int
    samples: int = 1_000_000

    def __post_init__(self):
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        if self.samples < 1000:
            raise ValueError("samples must be >= 1000")


@dataclass(frozen=True)
class BoxcarGaussianLaw:
    """Vector law with independent components W_1, ..., W_n.

    W_1 has density (Q(w - R) - Q(w)) / R on the real line, equivalently
    W_1 = R*Uniform(0,1) + Normal(0,1); W_2..W_n are standard normal.
    """

    n: int
    R: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be an integer >= 1, got {self.n}")
        if not np.isfinite(self.R) or self.R <= 0.0:
            raise ValueError("R must be finite and > 0")


# ---------------------------------------------------------------------------
# quadrature internals
# ---------------------------------------------------------------------------


@lru_cache(maxsize=4096)
def _laguerre_nodes(n_nodes: int, alpha: float):
    """Generalized Gauss-Laguerre rule normalized against Gamma(alpha+1).

    With these weights, E[f(chi2_m)] = dot(w, f(2x)) for alpha = m/2 - 1.
    """
    x, w = special.roots_genlaguerre(n_nodes, alpha)
    return x, w / math.exp(math.lgamma(alpha + 1.0))


@lru_cache(maxsize=64)
def _leggauss(n_nodes: int):
    return np.polynomial.legendre.leggauss(n_nodes)


def _poisson_terms(lam: float, trunc_mass: float) -> Tuple[np.ndarray, np.ndarray]:
    """Mixture indices and weights covering all but `trunc_mass` of the mass."""
    if lam == 0.0:
        return np.array([0]), np.array([1.0])
    mu = lam / 2.0
    k_lo = int(stats.poisson.ppf(trunc_mass / 2.0, mu))
    k_hi = int(stats.poisson.ppf(1.0 - trunc_mass / 2.0, mu)) + 2
    ks = np.arange(max(0, k_lo - 1), k_hi + 1)
    weights = np.exp(ks * np.log(mu) - mu - special.gammaln(ks + 1.0))
    return ks, weights


def _expect_ncx2_fixed(
    law: NoncentralChiSquare,
    f: Callable[[np.ndarray], np.ndarray],
    n_nodes: int,
    trunc_mass: float,
) -> float:
    ks, weights = _poisson_terms(law.noncentrality, trunc_mass)
    nodes = np.empty((len(ks), n_nodes))
    wmat = np.empty_like(nodes)
    for row, (k, p) in enumerate(zip(ks, weights)):
        x, w = _laguerre_nodes(n_nodes, law.dof / 2.0 + k - 1.0)
        nodes[row] = 2.0 * x
        wmat[row] = p * w
    values = np.asarray(f(nodes), dtype=float)
    if values.shape != nodes.shape:
        raise ValueError("integrand must map arrays to arrays of the same shape")
    return float(np.sum(wmat * values))


def expect_ncx2(
    law: NoncentralChiSquare,
    f: Callable[[np.ndarray], np.ndarray],
    spec: QuadratureSpec = QuadratureSpec(),
) -> float:
    """E[f(V)] for V noncentral chi-square, by Poisson-mixture quadrature.

    `f` must act elementwise on numpy arrays.  The estimate is accepted when
    doubling the per-term node count moves it by no more than
    max(rel_tol*|value|, abs_tol); otherwise QuadratureConvergenceError.
    """
    n_nodes = max(8, min(64, spec.max_nodes // 2))
    prev = _expect_ncx2_fixed(law, f, n_nodes, spec.poisson_trunc_mass)
    while 2 * n_nodes <= spec.max_nodes:
        n_nodes *= 2
        cur = _expect_ncx2_fixed(law, f, n_nodes, spec.poisson_trunc_mass)
        if abs(cur - prev) <= max(spec.rel_tol * abs(cur), spec.abs_tol):
            return cur
        prev = cur
    raise QuadratureConvergenceError(
        f"expect_ncx2 did not converge at {n_nodes} nodes (law={law})"
    )


def _boxcar_outer_rule(law: BoxcarGaussianLaw, n_out: int, sigmas: float):
    lo, hi = -sigmas, law.R + sigmas
    x, w = _leggauss(n_out)
    w1 = 0.5 * (x + 1.0) * (hi - lo) + lo
    quad_w = 0.5 * w * (hi - lo)
    density = (gaussian_tail_q(w1 - law.R) - gaussian_tail_q(w1)) / law.R
    return w1, quad_w * density


def _expect_boxcar_fixed(
    law: BoxcarGaussianLaw,
    g: Callable[[np.ndarray, np.ndarray], np.ndarray],
    n_out: int,
    n_in: int,
    sigmas: float,
) -> float:
    w1, w_outer = _boxcar_outer_rule(law, n_out, sigmas)
    if law.n == 1:
        values = np.asarray(g(w1, np.abs(w1)), dtype=float)
        return float(np.dot(w_outer, values))
    s_nodes, s_weights = _laguerre_nodes(n_in, (law.n - 1) / 2.0 - 1.0)
    s = 2.0 * s_nodes
    wn = np.sqrt(w1[:, None] ** 2 + s[None, :])
    w1_grid = np.broadcast_to(w1[:, None], wn.shape)
    values = np.asarray(g(w1_grid, wn), dtype=float)
    return float(np.dot(w_outer, values @ s_weights))


def expect_boxcar_gauss(
    law: BoxcarGaussianLaw,
    g: Callable[[np.ndarray, np.ndarray], np.ndarray],
    spec: QuadratureSpec = QuadratureSpec(),
) -> float:
    """E[g(W_1, ||W||)] for the boxcar-Gaussian law, by tensor quadrature.

    Outer rule on [-sigmas, R + sigmas] against the W_1 density, inner
    generalized Laguerre rule for the chi-square norm contribution of the
    Gaussian components.  `g` must broadcast over numpy arrays.
    """
    n_out, n_in = 128, max(8, min(64, spec.max_nodes // 2))
    prev = _expect_boxcar_fixed(law, g, n_out, n_in, spec.radial_trunc_sigmas)
    while 2 * n_in <= spec.max_nodes:
        n_out *= 2
        n_in *= 2
        cur = _expect_boxcar_fixed(law, g, n_out, n_in, spec.radial_trunc_sigmas)
        if abs(cur - prev) <= max(spec.rel_tol * abs(cur), spec.abs_tol):
            return cur
        prev = cur
    raise QuadratureConvergenceError(
        f"expect_boxcar_gauss did not converge (law={law})"
    )


# ---------------------------------------------------------------------------
# seeded Monte Carlo
# ---------------------------------------------------------------------------


def sample_ncx2(law: NoncentralChiSquare, mc: McSpec) -> np.ndarray:
    """Draws of V = (Z_1 + sqrt(noncentrality))^2 + chi2_{dof-1}.

    Bit-reproducible for a fixed seed and sample count.  The squared-norm
    tail over the remaining dof-1 coordinates is drawn with numpy's gamma
    sampler, which has the same law as the coordinatewise sum.
    """
    rng = np.random.default_rng(mc.seed)
    root_lam = math.sqrt(law.noncentrality)
    out = np.empty(mc.samples)
    for start in range(0, mc.samples, _MC_CHUNK):
        stop = min(start + _MC_CHUNK, mc.samples)
        m = stop - start
        v = (rng.standard_normal(m) + root_lam) ** 2
        if law.dof > 1:
            v += rng.chisquare(law.dof - 1, m)
        out[start:stop] = v
    return out


def sample_boxcar_gauss(
    law: BoxcarGaussianLaw, mc: McSpec
) -> Tuple[np.ndarray, np.ndarray]:
    """Draws of (W_1, ||W||) using W_1 = R*U + G with U uniform, G normal."""
    rng = np.random.default_rng(mc.seed)
    w1 = np.empty(mc.samples)
    wnorm = np.empty(mc.samples)
    for start in range(0, mc.samples, _MC_CHUNK):
        stop = min(start + _MC_CHUNK, mc.samples)
        m = stop - start
        w = law.R * rng.random(m) + rng.standard_normal(m)
        w1[start:stop] = w
        if law.n > 1:
            wnorm[start:stop] = np.sqrt(w * w + rng.chisquare(law.n - 1, m))
        else:
            wnorm[start:stop] = np.abs(w)
    return w1, wnorm


def boxcar_gauss_w1_cdf(law: BoxcarGaussianLaw, w: np.ndarray) -> np.ndarray:
    """Analytic CDF of W_1, assembled from the Gaussian tail function.

    Integrating the density gives F(w) = (psi(w) - psi(w - R)) / R with
    psi(t) = t*(1 - Q(t)) + phi(t).
    """
    w = np.asarray(w, dtype=float)

    def psi(t):
        return t * (1.0 - gaussian_tail_q(t)) + np.exp(-0.5 * t * t) / np.sqrt(2 * np.pi)

    return (psi(w) - psi(w - law.R)) / law.R


def _mc_mean_se(values_iter) -> Tuple[float, float]:
    total = 0.0
    total_sq = 0.0
    count = 0
    for chunk in values_iter:
        total += float(np.sum(chunk))
        total_sq += float(np.sum(chunk * chunk))
        count += chunk.size
    mean = total / count
    var = max(total_sq / count - mean * mean, 0.0)
    return mean, math.sqrt(var / count)


def mc_expect_ncx2(
    law: NoncentralChiSquare,
    f: Callable[[np.ndarray], np.ndarray],
    mc: McSpec,
) -> Tuple[float, float]:
    """Monte Carlo estimate of E[f(V)] with its standard error."""
    rng = np.random.default_rng(mc.seed)
    root_lam = math.sqrt(law.noncentrality)

    def chunks():
        remaining = mc.samples
        while remaining > 0:
            m = min(_MC_CHUNK, remaining)
            v = (rng.standard_normal(m) + root_lam) ** 2
            if law.dof > 1:
                v += rng.chisquare(law.dof - 1, m)
            yield np.asarray(f(v), dtype=float)
            remaining -= m

    return _mc_mean_se(chunks())


def mc_expect_boxcar_gauss(
    law: BoxcarGaussianLaw,
    g: Callable[[np.ndarray, np.ndarray], np.ndarray],
    mc: McSpec,
) -> Tuple[float, float]:
    """Monte Carlo estimate of E[g(W_1, ||W||)] with its standard error."""
    rng = np.random.default_rng(mc.seed)

    def chunks():
        remaining = mc.samples
        while remaining > 0:
            m = min(_MC_CHUNK, remaining)
            w = law.R * rng.random(m) + rng.standard_normal(m)
            if law.n > 1:
                wn = np.sqrt(w * w + rng.chisquare(law.n - 1, m))
            else:
                wn = np.abs(w)
            yield np.asarray(g(w, wn), dtype=float)
            remaining -= m

    return _mc_mean_se(chunks())


# ---------------------------------------------------------------------------
# adaptive panel integration (for the snr-fraction integrals)
# ---------------------------------------------------------------------------


def adaptive_gauss(
    f: Callable,
    a: float,
    b: float,
    *,
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-12,
    vectorized: bool = False,
    max_panels: int = 256,
) -> float:
    """Adaptive Gauss-Legendre integration with panel bisection.

    Each panel is estimated with 16- and 32-point rules; the worst panel is
    split until the summed discrepancy meets the tolerance.  With
    ``vectorized=True`` the integrand is called on node arrays.
    """
    x16, w16 = _leggauss(16)
    x32, w32 = _leggauss(32)

    def eval_panel(lo: float, hi: float):
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)

        def rule(xs, ws):
            pts = mid + half * xs
            if vectorized:
                vals = np.asarray(f(pts), dtype=float)
            else:
                vals = np.array([f(p) for p in pts], dtype=float)
            return half * float(np.dot(ws, vals))

        coarse = rule(x16, w16)
        fine = rule(x32, w32)
        return fine, abs(fine - coarse)

    panels = [(a, b, *eval_panel(a, b))]
    for _ in range(max_panels):
        total = sum(p[2] for p in panels)
        err = sum(p[3] for p in panels)
        if err <= max(abs_tol, rel_tol * abs(total)):
            return total
        worst = max(range(len(panels)), key=lambda i: panels[i][3])
        lo, hi, _, _ = panels.pop(worst)
        mid = 0.5 * (lo + hi)
        panels.append((lo, mid, *eval_panel(lo, mid)))
        panels.append((mid, hi, *eval_panel(mid, hi)))
    raise QuadratureConvergenceError(
        f"adaptive_gauss used more than {max_panels} panels on [{a}, {b}]"
    )


# ---------------------------------------------------------------------------
# engines
# ---------------------------------------------------------------------------


class QuadratureEngine:
    """Deterministic expectation evaluator; immutable and thread-safe."""

    deterministic = True
    method_name = "quad"

    def __init__(self, spec: QuadratureSpec = QuadratureSpec()):
        self.spec = spec

    def expect_ncx2(self, law, f) -> float:
        return expect_ncx2(law, f, self.spec)

    def expect_boxcar_gauss(self, law, g) -> float:
        return expect_boxcar_gauss(law, g, self.spec)

    def describe(self) -> str:
        s = self.spec
        return (
            f"method=quad rel_tol={s.rel_tol:g} abs_tol={s.abs_tol:g} "
            f"max_nodes={s.max_nodes} poisson_trunc={s.poisson_trunc_mass:g} "
            f"trunc_sigmas={s.radial_trunc_sigmas:g}"
        )


class MonteCarloEngine:
    """Seeded sampling evaluator with the same call surface as quadrature.

    Every expectation restarts the generator from the configured seed, so
    results are reproducible call by call; concurrent use should construct
    engines with disjoint seeds.
    """

    deterministic = False
    method_name = "mc"

    def __init__(self, mc: McSpec):
        self.mc = mc

    def expect_ncx2(self, law, f) -> float:
        return mc_expect_ncx2(law, f, self.mc)[0]

    def expect_boxcar_gauss(self, law, g) -> float:
        return mc_expect_boxcar_gauss(law, g, self.mc)[0]

    def expect_ncx2_with_se(self, law, f) -> Tuple[float, float]:
        return mc_expect_ncx2(law, f, self.mc)

    def expect_boxcar_gauss_with_se(self, law, g) -> Tuple[float, float]:
        return mc_expect_boxcar_gauss(law, g, self.mc)

    def describe(self) -> str:
        return f"method=mc seed={self.mc.seed} samples={self.mc.samples} rng={RNG_ALGORITHM}"
