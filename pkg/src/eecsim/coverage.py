"""Analytic D2D offloading success probabilities.

The success probability of delivering one task segment over a mmWave D2D
link is an average, over the serving distance, of an alternating-exponential
kernel built from three exponents:

* a noise exponent proportional to r0^alpha_L * sigma^2,
* ``W_j``: the line-of-sight interference exponent (interferers closer than
  the LoS radius to the receiving worker),
* ``Z_j``: the non-line-of-sight interference exponent (interferers beyond
  the LoS radius), evaluated over (R_L, inf) through the substitution
  x = R_L / t which removes the truncation error.

Random selection averages the kernel against the uniform-in-disk distance
density 2 r0 / R_L^2; rank-k selection averages it against the k-th
nearest-point density of the worker process, kept unnormalized so that its
total mass equals the probability that at least k LoS workers exist.

Everything here is a pure function of value inputs and is safe to evaluate
concurrently across grid points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb, lgamma

import numpy as np
from scipy import special

from .errors import ParameterError, QuadratureError
from .params import DeploymentParams, RadioParams, directivity_distribution

__all__ = [
    "RandomSelection",
    "RankedSelection",
    "CoverageQuery",
    "QuadratureConfig",
    "interference_exponent_los",
    "interference_exponent_nlos",
    "success_probability",
    "success_probability_random",
    "success_probability_ranked",
    "ranked_success_probabilities",
    "ordered_distance_pdf",
    "worker_availability_mass",
]


@dataclass(frozen=True)
class RandomSelection:
    """Serve a uniformly random LoS worker."""


@dataclass(frozen=True)
class RankedSelection:
    """Serve the rank-th nearest LoS worker (rank >= 1)."""

    rank: int

    def __post_init__(self):
        if not isinstance(self.rank, int) or isinstance(self.rank, bool) or self.rank < 1:
            raise ParameterError(f"rank must be an integer >= 1, got {self.rank!r}")


@dataclass(frozen=True)
class CoverageQuery:
    radio: RadioParams
    deploy: DeploymentParams
    selection: RandomSelection | RankedSelection = RandomSelection()


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and method knobs for the nested quadrature.

    Node counts double until two successive refinements agree to
    ``rel_tol``/``abs_tol``; exceeding ``max_nodes`` raises QuadratureError.
    The only supported improper-integral treatment is the inverse map
    x = R_L / t (``nlos_truncation="inverse"``).
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    nlos_truncation: str = "inverse"
    start_nodes: int = 64
    max_nodes: int = 4096

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ParameterError("quadrature tolerances must be positive")
        if self.nlos_truncation != "inverse":
            raise ParameterError(f"unsupported nlos_truncation {self.nlos_truncation!r}")
        if self.start_nodes < 4 or self.max_nodes < self.start_nodes:
            raise ParameterError("node counts must satisfy 4 <= start_nodes <= max_nodes")


_DEFAULT_QUAD = QuadratureConfig()

_leggauss_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_nodes(n: int, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    if n not in _leggauss_cache:
        _leggauss_cache[n] = np.polynomial.legendre.leggauss(n)
    x, w = _leggauss_cache[n]
    half = 0.5 * (hi - lo)
    return half * x + 0.5 * (hi + lo), half * w


def _check_nlos_exponent(radio: RadioParams):
    # the NLoS exponent integral over (R_L, inf) diverges at alpha_N <= 2
    if radio.pathloss_exp_nlos <= 2.0:
        raise QuadratureError(
            "NLoS interference integral diverges for pathloss_exp_nlos <= 2", achieved=None)


def _wz_exponents(r0: np.ndarray, radio: RadioParams, nu_r: float,
                  xi: float, n_inner: int) -> tuple[np.ndarray, np.ndarray]:
    """W_j(r0) and Z_j(r0) for j = 1..N_L, shape (N_L, len(r0)).

    xi is the linear SINR threshold.  The alignment-gain average runs over
    the four sectored-antenna outcomes; gains are normalized by the aligned
    product M_r * M_w.
    """
    n_l = radio.nakagami_los
    n_n = radio.nakagami_nlos
    a_l = radio.pathloss_exp_los
    a_n = radio.pathloss_exp_nlos
    rl = radio.los_radius_m
    eta = radio.alzer_los
    aligned = radio.main_lobe * radio.main_lobe

    W = np.zeros((n_l, r0.size))
    Z = np.zeros((n_l, r0.size))
    if nu_r == 0.0 or xi == 0.0:
        return W, Z

    pairs = directivity_distribution(radio)
    x, wx = _gauss_nodes(n_inner, 0.0, rl)
    t, wt = _gauss_nodes(n_inner, 0.0, 1.0)
    ratio_pow = (r0[:, None] / x[None, :]) ** a_l      # (nr, nx)
    r0_pow = r0 ** a_l
    t_pow = (t ** a_n) / rl ** a_n
    wt_t3 = wt / t ** 3
    x_wx = x * wx
    ratio_cn = radio.intercept_nlos / radio.intercept_los
    pre = 2.0 * math.pi * nu_r

    for j in range(1, n_l + 1):
        w_acc = np.zeros(r0.size)
        z_acc = np.zeros(r0.size)
        for gain, prob in pairs:
            abar = gain / aligned
            c_los = eta * abar * j * xi / n_l
            w_acc += prob * ((1.0 - (1.0 + c_los * ratio_pow) ** (-n_l)) * x_wx).sum(axis=1)
            c_nlos = eta * abar * j * xi * ratio_cn / n_n
            arg = c_nlos * r0_pow[:, None] * t_pow[None, :]
            z_acc += prob * rl * rl * ((1.0 - (1.0 + arg) ** (-n_n)) * wt_t3).sum(axis=1)
        W[j - 1] = pre * w_acc
        Z[j - 1] = pre * z_acc
    return W, Z


def _kernel(r0: np.ndarray, radio: RadioParams, nu_r: float,
            xi: float, n_inner: int) -> np.ndarray:
    """Success kernel at serving distances r0 (linear threshold xi).

    Alternating binomial sum over the gamma-tail expansion of the serving
    fade.  The tail constant enters the interference exponents only; the
    noise exponent uses the bare threshold.
    """
    n_l = radio.nakagami_los
    W, Z = _wz_exponents(r0, radio, nu_r, xi, n_inner)
    noise_scale = xi * radio.noise_normalized / (
        radio.intercept_los * radio.main_lobe * radio.main_lobe)
    r0_pow = r0 ** radio.pathloss_exp_los
    out = np.zeros(r0.size)
    for j in range(1, n_l + 1):
        exponent = -j * noise_scale * r0_pow - W[j - 1] - Z[j - 1]
        out += (-1.0) ** (j + 1) * comb(n_l, j) * np.exp(exponent)
    return out


def _converging(evaluate, cfg: QuadratureConfig, what: str) -> float:
    """Double quadrature nodes until two refinements agree."""
    n = cfg.start_nodes
    prev = evaluate(n)
    achieved = math.inf
    while n < cfg.max_nodes:
        n *= 2
        cur = evaluate(n)
        achieved = abs(cur - prev)
        if achieved <= cfg.rel_tol * abs(cur) + cfg.abs_tol:
            return cur
        prev = cur
    raise QuadratureError(
        f"{what}: quadrature did not converge below rel_tol={cfg.rel_tol} "
        f"(last refinement changed by {achieved:.3e})",
        achieved=achieved)


def interference_exponent_los(j: int, r0: float, q: CoverageQuery,
                              cfg: QuadratureConfig = _DEFAULT_QUAD) -> float:
    """LoS interference exponent W_j at serving distance r0."""
    _validate_j_r0(j, r0, q.radio)
    xi = q.radio.sinr_threshold

    def evaluate(n):
        W, _ = _wz_exponents(np.array([r0], float), q.radio,
                             q.deploy.requester_intensity_per_m2, xi, n)
        return float(W[j - 1, 0])

    return _converging(evaluate, cfg, "W_j")


def interference_exponent_nlos(j: int, r0: float, q: CoverageQuery,
                               cfg: QuadratureConfig = _DEFAULT_QUAD) -> float:
    """NLoS interference exponent Z_j at serving distance r0."""
    _validate_j_r0(j, r0, q.radio)
    _check_nlos_exponent(q.radio)
    xi = q.radio.sinr_threshold

    def evaluate(n):
        _, Z = _wz_exponents(np.array([r0], float), q.radio,
                             q.deploy.requester_intensity_per_m2, xi, n)
        return float(Z[j - 1, 0])

    return _converging(evaluate, cfg, "Z_j")


def _validate_j_r0(j: int, r0: float, radio: RadioParams):
    if not isinstance(j, int) or isinstance(j, bool) or not 1 <= j <= radio.nakagami_los:
        raise ParameterError(f"j must be an integer in 1..{radio.nakagami_los}, got {j!r}")
    if not 0.0 < r0 <= radio.los_radius_m:
        raise ParameterError(f"r0 must lie in (0, {radio.los_radius_m}], got {r0!r}")


def ordered_distance_pdf(k: int, r, deploy: DeploymentParams,
                         los_radius_m: float):
    """Unnormalized density of the k-th nearest worker distance.

    Evaluates V^k e^{-V} f(r) F(r)^{k-1} / (k-1)! * e^{-V (F(r) - 1)} with
    f(r) = 2r/R_L^2, F(r) = r^2/R_L^2 and V the mean LoS worker count.  Its
    integral over [0, R_L] is the probability that at least k workers exist.
    Accepts scalar or array r; computed in log space to stay finite for
    large V and k.
    """
    if not isinstance(k, int) or isinstance(k, bool) or k < 1:
        raise ParameterError(f"k must be an integer >= 1, got {k!r}")
    if los_radius_m <= 0:
        raise ParameterError("los_radius_m must be positive")
    r_arr = np.asarray(r, dtype=float)
    if np.any((r_arr < 0) | (r_arr > los_radius_m)):
        raise ParameterError("r must lie in [0, los_radius_m]")
    v = deploy.mean_los_workers(los_radius_m)
    if v == 0.0:
        return np.zeros_like(r_arr) if r_arr.ndim else 0.0
    cdf = r_arr ** 2 / los_radius_m ** 2
    with np.errstate(divide="ignore"):
        log_pdf = np.where(r_arr > 0, np.log(2.0 * r_arr / los_radius_m ** 2), -np.inf)
        log_cdf = np.where(cdf > 0, np.log(cdf), -np.inf)
    log_fk = (k * math.log(v) - v - lgamma(k) + log_pdf
              + (k - 1) * log_cdf - v * (cdf - 1.0))
    out = np.exp(log_fk)
    # k >= 2 vanishes at r = 0; exp(-inf) already gives 0, guard 0 * inf
    out = np.where(np.isfinite(log_fk), out, 0.0)
    return out if r_arr.ndim else float(out)


def worker_availability_mass(k: int, deploy: DeploymentParams,
                             los_radius_m: float) -> float:
    """Probability that at least k LoS workers exist (Poisson tail)."""
    if not isinstance(k, int) or isinstance(k, bool) or k < 1:
        raise ParameterError(f"k must be an integer >= 1, got {k!r}")
    v = deploy.mean_los_workers(los_radius_m)
    # regularized lower incomplete gamma equals the Poisson upper tail
    return float(special.gammainc(k, v))


def success_probability_random(q: CoverageQuery,
                               cfg: QuadratureConfig = _DEFAULT_QUAD) -> float:
    """Offloading success probability for a uniformly random LoS worker."""
    if not isinstance(q.selection, RandomSelection):
        raise ParameterError("query selection must be RandomSelection")
    _check_nlos_exponent(q.radio)
    radio = q.radio
    xi = radio.sinr_threshold
    rl = radio.los_radius_m
    nu_r = q.deploy.requester_intensity_per_m2

    def evaluate(n):
        r0, w0 = _gauss_nodes(n, 0.0, rl)
        kern = _kernel(r0, radio, nu_r, xi, 2 * n)
        return float((kern * (2.0 * r0 / rl ** 2) * w0).sum())

    p = _converging(evaluate, cfg, "success_probability_random")
    return min(max(p, 0.0), 1.0)


def success_probability_ranked(k: int, q: CoverageQuery,
                               cfg: QuadratureConfig = _DEFAULT_QUAD) -> float:
    """Offloading success probability for the k-th nearest LoS worker.

    Returned unnormalized: the value includes the probability that at least
    k workers exist.  Divide by :func:`worker_availability_mass` for the
    conditional success probability.
    """
    if isinstance(q.selection, RankedSelection) and q.selection.rank != k:
        raise ParameterError(f"query selection rank {q.selection.rank} != requested k={k}")
    return float(ranked_success_probabilities(q, ks=(k,), cfg=cfg)[0])


def ranked_success_probabilities(q: CoverageQuery, ks,
                                 cfg: QuadratureConfig = _DEFAULT_QUAD) -> np.ndarray:
    """Success probabilities for several ranks at once.

    The distance-dependent kernel does not depend on the rank, so one kernel
    evaluation serves every requested k; this is the fast path for building
    level-dependent offloading rates.
    """
    ks = tuple(ks)
    for k in ks:
        if not isinstance(k, int) or isinstance(k, bool) or k < 1:
            raise ParameterError(f"ranks must be integers >= 1, got {k!r}")
    _check_nlos_exponent(q.radio)
    radio = q.radio
    xi = radio.sinr_threshold
    rl = radio.los_radius_m
    nu_r = q.deploy.requester_intensity_per_m2

    def evaluate(n):
        r0, w0 = _gauss_nodes(n, 0.0, rl)
        kern = _kernel(r0, radio, nu_r, xi, 2 * n)
        dens = np.stack([ordered_distance_pdf(k, r0, q.deploy, rl) for k in ks])
        return dens @ (kern * w0)

    n = cfg.start_nodes
    prev = evaluate(n)
    achieved = math.inf
    while n < cfg.max_nodes:
        n *= 2
        cur = evaluate(n)
        achieved = float(np.max(np.abs(cur - prev)))
        if achieved <= cfg.rel_tol * float(np.max(np.abs(cur))) + cfg.abs_tol:
            return np.clip(cur, 0.0, 1.0)
        prev = cur
    raise QuadratureError(
        f"ranked success probabilities did not converge (last change {achieved:.3e})",
        achieved=achieved)


def success_probability(q: CoverageQuery, cfg: QuadratureConfig = _DEFAULT_QUAD) -> float:
    """Dispatch on the query's selection rule."""
    if isinstance(q.selection, RandomSelection):
        return success_probability_random(q, cfg)
    return float(ranked_success_probabilities(q, ks=(q.selection.rank,), cfg=cfg)[0])
