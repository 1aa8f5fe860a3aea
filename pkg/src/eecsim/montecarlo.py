"""Independent stochastic oracle for the analytic modules.

Spatial side: samples Poisson network realizations, evaluates per-link SINR
with sectored-antenna alignment and Nakagami fading, and estimates the
offloading success probability empirically.  Temporal side: simulates
trajectories of any :class:`~eecsim.chain.ChainModel` by exponential races
and estimates absorption delay and completion fractions.

Reproducibility contract: every replication draws from its own
counter-based stream derived from (master seed, replication index, purpose),
and aggregation is exact (integer counts, correctly rounded float sums), so
results are bit-identical no matter how replications are chunked across
workers.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from .chain import ChainModel
from .coverage import CoverageQuery, RandomSelection, RankedSelection
from .errors import ParameterError
from .params import DeploymentParams, RadioParams, directivity_distribution

__all__ = [
    "SimConfig",
    "NetworkRealization",
    "CoverageEstimate",
    "DelayEstimate",
    "TrajectoryOutcome",
    "default_arena_radius",
    "sample_network",
    "link_sinr",
    "empirical_success_probability",
    "empirical_success_curve",
    "simulate_task_trajectory",
    "empirical_delay",
]

_MAX_SEED = 2 ** 64 - 1
# stream-purpose tags keep spatial and trajectory draws decorrelated
_PURPOSE_SPATIAL = 1
_PURPOSE_TRAJECTORY = 2
_RESAMPLE_LIMIT = 10_000


@dataclass(frozen=True)
class SimConfig:
    """Replication count, master seed and interference window.

    ``arena_half_width_m`` is the radius of the disk interfering requesters
    are sampled in; ``None`` selects :func:`default_arena_radius`.
    """

    seed: int
    replications: int = 100_000
    arena_half_width_m: float | None = None

    def __post_init__(self):
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or not 0 <= self.seed <= _MAX_SEED:
            raise ParameterError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if not isinstance(self.replications, int) or isinstance(self.replications, bool) or self.replications < 1:
            raise ParameterError("replications must be an integer >= 1")
        if self.arena_half_width_m is not None and self.arena_half_width_m <= 0:
            raise ParameterError("arena_half_width_m must be positive")


def default_arena_radius(radio: RadioParams, deploy: DeploymentParams) -> float:
    """Interferer sampling radius.

    At least 10x the LoS radius, extended until the mean NLoS interference
    from beyond the window falls under 1e-4 of the noise floor (capped at
    100x the LoS radius).  Interference that matters comes from inside the
    LoS ball, so the 10x floor dominates in ordinary parameterizations.
    """
    rl = radio.los_radius_m
    floor = 10.0 * rl
    nu_r = deploy.requester_intensity_per_m2
    a_n = radio.pathloss_exp_nlos
    if nu_r <= 0.0 or a_n <= 2.0 or radio.noise_normalized <= 0.0:
        return floor
    mean_gain = sum(g * p for g, p in directivity_distribution(radio))
    # mean NLoS power past D: 2 pi nu_r E[gain] C_N D^(2-a_N) / (a_N - 2)
    budget = 1e-4 * radio.noise_normalized
    coeff = 2.0 * math.pi * nu_r * mean_gain * radio.intercept_nlos / (a_n - 2.0)
    tail_radius = (coeff / budget) ** (1.0 / (a_n - 2.0))
    return min(max(floor, tail_radius), 100.0 * rl)


@dataclass(frozen=True)
class NetworkRealization:
    """One sampled network with all per-link randomness drawn up front.

    The typical requester sits at the origin.  Candidate workers cover the
    LoS disk (the only region a serving link may use); interfering
    requesters cover the arena disk.  Fading is drawn for both possible
    blockage classes of every interferer so the realization is independent
    of which worker ends up serving.
    """

    worker_points: np.ndarray          # (n_w, 2)
    requester_points: np.ndarray       # (n_r, 2)
    serving_fades: np.ndarray          # (n_w,), unit-mean gamma, LoS shape
    interferer_gains: np.ndarray       # (n_r,), sectored alignment draws
    interferer_fades_los: np.ndarray   # (n_r,), unit-mean gamma, LoS shape
    interferer_fades_nlos: np.ndarray  # (n_r,), unit-mean gamma, NLoS shape
    arena_radius_m: float


def _spatial_rng(seed: int, replication: int) -> np.random.Generator:
    ss = np.random.SeedSequence((seed, replication, _PURPOSE_SPATIAL))
    return np.random.Generator(np.random.Philox(ss))


def _disk_points(rng, intensity, radius) -> np.ndarray:
    count = rng.poisson(intensity * math.pi * radius * radius) if intensity > 0 else 0
    radii = radius * np.sqrt(rng.random(count))
    angles = 2.0 * math.pi * rng.random(count)
    return np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])


def _draw_realization(rng, deploy: DeploymentParams, radio: RadioParams,
                      arena_radius: float) -> NetworkRealization:
    workers = _disk_points(rng, deploy.worker_intensity_per_m2, radio.los_radius_m)
    requesters = _disk_points(rng, deploy.requester_intensity_per_m2, arena_radius)
    n_l = radio.nakagami_los
    n_n = radio.nakagami_nlos
    serving_fades = rng.standard_gamma(n_l, len(workers)) / n_l
    pairs = directivity_distribution(radio)
    gains = np.array([g for g, _ in pairs])
    cum = np.cumsum([p for _, p in pairs])
    picks = np.searchsorted(cum, rng.random(len(requesters)), side="right")
    interferer_gains = gains[np.minimum(picks, 3)]
    fades_los = rng.standard_gamma(n_l, len(requesters)) / n_l
    fades_nlos = rng.standard_gamma(n_n, len(requesters)) / n_n
    return NetworkRealization(
        worker_points=workers,
        requester_points=requesters,
        serving_fades=serving_fades,
        interferer_gains=interferer_gains,
        interferer_fades_los=fades_los,
        interferer_fades_nlos=fades_nlos,
        arena_radius_m=arena_radius,
    )


def sample_network(seed: int, deploy: DeploymentParams, radio: RadioParams,
                   arena_radius_m: float | None = None) -> NetworkRealization:
    """Deterministically sample one network realization for the given seed."""
    radius = arena_radius_m if arena_radius_m is not None else default_arena_radius(radio, deploy)
    return _draw_realization(_spatial_rng(seed, 0), deploy, radio, radius)


def link_sinr(realization: NetworkRealization, worker_index: int, radio: RadioParams,
              los_classification: str = "worker") -> float:
    """SINR of the link from the origin requester to one candidate worker.

    ``los_classification`` selects whose position classifies interferers as
    LoS or NLoS: ``"worker"`` (the receiver, matching the analysis geometry)
    or ``"requester"`` (the origin).
    """
    if los_classification not in ("worker", "requester"):
        raise ParameterError(f"unknown los_classification {los_classification!r}")
    w = realization.worker_points[worker_index]
    r0 = float(np.hypot(w[0], w[1]))
    if r0 > radio.los_radius_m:
        raise ParameterError("serving worker must lie inside the LoS radius")
    aligned = radio.main_lobe * radio.main_lobe
    signal = (realization.serving_fades[worker_index] * aligned
              * radio.intercept_los * r0 ** (-radio.pathloss_exp_los))
    pts = realization.requester_points
    if len(pts):
        anchor = w if los_classification == "worker" else np.zeros(2)
        dist = np.hypot(pts[:, 0] - anchor[0], pts[:, 1] - anchor[1])
        los = dist <= radio.los_radius_m
        gains = realization.interferer_gains
        power = np.where(
            los,
            realization.interferer_fades_los * gains * radio.intercept_los
            * dist ** (-radio.pathloss_exp_los),
            realization.interferer_fades_nlos * gains * radio.intercept_nlos
            * dist ** (-radio.pathloss_exp_nlos),
        )
        interference = float(power.sum())
    else:
        interference = 0.0
    return signal / (radio.noise_normalized + interference)


@dataclass(frozen=True)
class CoverageEstimate:
    estimate: float
    std_error: float
    replications: int
    resampled_realizations: int
    xi_db: float


def _rep_sinr(rng, radio: RadioParams, deploy: DeploymentParams, selection,
              arena: float, gains: np.ndarray, gain_cum: np.ndarray,
              worker_centric: bool):
    """One replication's serving-link SINR, or None if no worker qualifies.

    Trimmed-down draw path for the estimator loop: only the serving worker's
    fade and each interferer's actually-relevant blockage-class fade are
    sampled.  The serving worker is placed on the x-axis, which is
    distribution-preserving because the interferer field is isotropic.
    """
    rl = radio.los_radius_m
    mean_workers = deploy.mean_los_workers(rl)
    n_w = rng.poisson(mean_workers) if mean_workers > 0 else 0
    need = 1 if isinstance(selection, RandomSelection) else selection.rank
    if n_w < need:
        return None
    radii2 = rl * rl * rng.random(n_w)
    if isinstance(selection, RandomSelection):
        r0 = math.sqrt(radii2[int(rng.integers(n_w))])
    else:
        k = selection.rank
        r0 = math.sqrt(np.partition(radii2, k - 1)[k - 1])
    h0 = rng.standard_gamma(radio.nakagami_los) / radio.nakagami_los
    aligned = radio.main_lobe * radio.main_lobe
    signal = h0 * aligned * radio.intercept_los * r0 ** (-radio.pathloss_exp_los)

    nu_r = deploy.requester_intensity_per_m2
    n_r = rng.poisson(nu_r * math.pi * arena * arena) if nu_r > 0 else 0
    interference = 0.0
    if n_r:
        u = rng.random(3 * n_r)
        rad2 = (arena * arena) * u[:n_r]
        cos_ang = np.cos((2.0 * math.pi) * u[n_r:2 * n_r])
        u_gain = u[2 * n_r:]
        picks = ((u_gain > gain_cum[0]).astype(np.int64)
                 + (u_gain > gain_cum[1]) + (u_gain > gain_cum[2]))
        link_gains = gains[picks]
        # squared distance to the receiving worker at (r0, 0), law of cosines;
        # clamp the rounding of near-colocated points away from negative
        d2 = np.maximum(rad2 + r0 * r0 - (2.0 * r0) * np.sqrt(rad2) * cos_ang, 0.0)
        # blockage class per interfering link: anchored at the worker by
        # default, at the origin requester when toggled
        los = (d2 if worker_centric else rad2) <= rl * rl
        d2_los = d2[los]
        d2_nlos = d2[~los]
        n_l = radio.nakagami_los
        n_n = radio.nakagami_nlos
        fades_los = rng.standard_gamma(n_l, d2_los.size) / n_l
        fades_nlos = rng.standard_gamma(n_n, d2_nlos.size) / n_n
        interference = float(
            (fades_los * link_gains[los] * radio.intercept_los
             * d2_los ** (-0.5 * radio.pathloss_exp_los)).sum()
            + (fades_nlos * link_gains[~los] * radio.intercept_nlos
               * d2_nlos ** (-0.5 * radio.pathloss_exp_nlos)).sum())
    return signal / (radio.noise_normalized + interference)


def empirical_success_curve(cfg: SimConfig, query: CoverageQuery, xi_db_values,
                            los_classification: str = "worker",
                            chunk_size: int = 4096) -> list[CoverageEstimate]:
    """Estimate offloading success for several SINR thresholds at once.

    One SINR sample per replication is compared against every threshold;
    realizations with too few LoS workers for the selection rule are
    resampled (sequentially within the replication's own stream) and
    counted.  Results do not depend on ``chunk_size``.
    """
    xi_db_values = [float(x) for x in xi_db_values]
    thresholds = np.array([10.0 ** (x / 10.0) for x in xi_db_values])
    radio, deploy, selection = query.radio, query.deploy, query.selection
    if not isinstance(selection, (RandomSelection, RankedSelection)):
        raise ParameterError(f"unsupported selection {selection!r}")
    if los_classification not in ("worker", "requester"):
        raise ParameterError(f"unknown los_classification {los_classification!r}")
    worker_centric = los_classification == "worker"
    arena = (cfg.arena_half_width_m if cfg.arena_half_width_m is not None
             else default_arena_radius(radio, deploy))
    pairs = directivity_distribution(radio)
    gains = np.array([g for g, _ in pairs])
    gain_cum = np.cumsum([p for _, p in pairs])
    counts = np.zeros(len(thresholds), dtype=np.int64)
    resampled = 0
    reps = cfg.replications
    if chunk_size < 1:
        raise ParameterError("chunk_size must be >= 1")
    for start in range(0, reps, chunk_size):
        for rep in range(start, min(start + chunk_size, reps)):
            rng = _spatial_rng(cfg.seed, rep)
            attempts = 0
            while True:
                sinr = _rep_sinr(rng, radio, deploy, selection, arena,
                                 gains, gain_cum, worker_centric)
                if sinr is not None:
                    break
                attempts += 1
                if attempts >= _RESAMPLE_LIMIT:
                    raise ParameterError(
                        "could not realize a network with enough LoS workers; "
                        "worker intensity is too small for this selection rule")
            resampled += attempts
            counts += sinr > thresholds
    out = []
    for xi_db, count in zip(xi_db_values, counts.tolist()):
        p = count / reps
        se = math.sqrt(p * (1.0 - p) / reps)
        out.append(CoverageEstimate(estimate=p, std_error=se, replications=reps,
                                    resampled_realizations=resampled, xi_db=xi_db))
    return out


def empirical_success_probability(cfg: SimConfig, query: CoverageQuery,
                                  los_classification: str = "worker") -> CoverageEstimate:
    """Binomial estimate of the offloading success probability."""
    return empirical_success_curve(
        cfg, query, [query.radio.sinr_threshold_db], los_classification)[0]


@dataclass(frozen=True)
class TrajectoryOutcome:
    delay_s: float
    completed: bool


@dataclass(frozen=True)
class DelayEstimate:
    mean_delay_s: float
    std_error_s: float
    completion_fraction: float
    replications: int


class _JumpTables:
    """Flattened jump structure of a chain for fast trajectory sampling."""

    def __init__(self, model: ChainModel):
        Q = model.generator
        absorbing = set(model.absorbing_indices)
        size = len(model.index)
        self.total_rate = [0.0] * size
        self.cum_probs: list[list[float]] = [[] for _ in range(size)]
        self.targets: list[list[int]] = [[] for _ in range(size)]
        for i in range(size):
            if i in absorbing:
                continue
            rate = -Q[i, i]
            self.total_rate[i] = rate
            acc = 0.0
            cum, tgt = [], []
            for j in np.nonzero(Q[i] > 0.0)[0].tolist():
                acc += Q[i, j] / rate
                cum.append(acc)
                tgt.append(j)
            cum[-1] = 1.0
            self.cum_probs[i] = cum
            self.targets[i] = tgt
        self.absorbing = absorbing
        self.success = set(model.success_indices)
        self.start = model.initial_index


def _trajectory_rng(seed: int, replication: int) -> random.Random:
    ss = np.random.SeedSequence((seed, replication, _PURPOSE_TRAJECTORY))
    words = ss.generate_state(2, np.uint64)
    return random.Random((int(words[0]) << 64) | int(words[1]))


def _run_trajectory(tables: _JumpTables, rng: random.Random) -> TrajectoryOutcome:
    state = tables.start
    t = 0.0
    while state not in tables.absorbing:
        t += rng.expovariate(tables.total_rate[state])
        u = rng.random()
        cum = tables.cum_probs[state]
        # linear scan; fan-out is at most three transitions
        pick = 0
        while cum[pick] < u:
            pick += 1
        state = tables.targets[state][pick]
    return TrajectoryOutcome(delay_s=t, completed=state in tables.success)


def simulate_task_trajectory(seed: int, model: ChainModel) -> TrajectoryOutcome:
    """One exponential-race trajectory of the chain, absorbed to the end."""
    return _run_trajectory(_JumpTables(model), _trajectory_rng(seed, 0))


def empirical_delay(cfg: SimConfig, model: ChainModel,
                    chunk_size: int = 4096) -> DelayEstimate:
    """Trajectory-averaged absorption delay and completion fraction.

    Deterministic for a given (seed, replications) pair; the mean is a
    correctly rounded sum of per-replication delays, so execution chunking
    cannot perturb the result.
    """
    if chunk_size < 1:
        raise ParameterError("chunk_size must be >= 1")
    tables = _JumpTables(model)
    reps = cfg.replications
    delays: list[float] = []
    completed = 0
    for start in range(0, reps, chunk_size):
        for rep in range(start, min(start + chunk_size, reps)):
            outcome = _run_trajectory(tables, _trajectory_rng(cfg.seed, rep))
            delays.append(outcome.delay_s)
            completed += outcome.completed
    mean = math.fsum(delays) / reps
    if reps > 1:
        var = math.fsum((d - mean) ** 2 for d in delays) / (reps - 1)
        se = math.sqrt(var / reps)
    else:
        se = math.inf
    return DelayEstimate(mean_delay_s=mean, std_error_s=se,
                         completion_fraction=completed / reps, replications=reps)
