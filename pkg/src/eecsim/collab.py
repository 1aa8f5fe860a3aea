"""Edge/MEC collaboration: congestion, the blended objective and bias search.

A bias factor alpha in [0, 1] routes that fraction of requesters to the
edge-device tier; the rest offload to the MEC server.  Routing more load to
the edge both thins the idle-worker pool (through the two-state worker
cycle) and raises D2D interference, so the edge delay grows with alpha
while the MEC delay shrinks.  The blended objective

    tau(alpha) = alpha * tau_edge(alpha) + (1 - alpha) * tau_mec(alpha)

is minimized over an alpha grid; ties break toward smaller alpha (less
edge load).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .chain import build_level_dependent, mean_absorption_time, worker_idle_probability
from .coverage import CoverageQuery, QuadratureConfig, RankedSelection, ranked_success_probabilities
from .errors import ParameterError, UnservableError
from .params import DeploymentParams, RadioParams, TaskParams

__all__ = [
    "MecParams",
    "BiasPoint",
    "EecOperatingPoint",
    "congested_worker_intensity",
    "eec_delay_under_bias",
    "mec_delay",
    "combined_delay",
    "bias_sweep",
    "optimal_bias",
]

# below this mean LoS worker count the edge tier is treated as unservable
MIN_WORKER_MASS = 1e-6


@dataclass(frozen=True)
class MecParams:
    """MEC-side model inputs.

    The server executes whole tasks at ``power_ratio`` times the device
    rate ``mec_task_rate_mu_f``; processor sharing across the expected
    concurrent load stretches the computation time linearly.
    ``offload_success_prob`` is the per-attempt success of the uplink,
    so one transmission slot costs ``d2d_slot / offload_success_prob``.
    """

    power_ratio: float
    mec_task_rate_mu_f: float
    concurrent_requester_intensity: float = 0.0
    offload_success_prob: float = 1.0

    def __post_init__(self):
        if self.power_ratio <= 0:
            raise ParameterError("power_ratio must be positive")
        if self.mec_task_rate_mu_f <= 0:
            raise ParameterError("mec_task_rate_mu_f must be positive")
        if self.concurrent_requester_intensity < 0:
            raise ParameterError("concurrent_requester_intensity must be nonnegative")
        if not 0.0 < self.offload_success_prob <= 1.0:
            raise ParameterError("offload_success_prob must lie in (0, 1]")


@dataclass(frozen=True)
class BiasPoint:
    alpha: float
    tau_eec_s: float
    tau_mec_s: float
    tau_alpha_s: float
    eec_optimal_n: int


@dataclass(frozen=True)
class EecOperatingPoint:
    """Edge-tier delay at one bias value, with the context that produced it."""

    delay_s: float
    optimal_n: int
    idle_worker_intensity: float
    mean_los_workers: float
    per_n_delay_s: tuple[float, ...]


def congested_worker_intensity(alpha: float, deploy: DeploymentParams,
                               mu_f: float) -> float:
    """Idle-worker intensity once a fraction alpha of requesters use the edge."""
    _check_alpha(alpha)
    nu_w = deploy.worker_intensity_per_m2
    if nu_w == 0.0:
        return 0.0
    idle = worker_idle_probability(mu_f, alpha * deploy.requester_intensity_per_m2, nu_w)
    return idle * nu_w


def eec_delay_under_bias(alpha: float, radio: RadioParams, deploy: DeploymentParams,
                         task: TaskParams, n_max: int = 50,
                         quad: QuadratureConfig | None = None) -> EecOperatingPoint:
    """Best edge-tier delay under the congestion seen at bias alpha.

    The idle-worker intensity replaces the raw worker intensity in the
    ordered-selection success probabilities, interference comes from the
    alpha-fraction of requesters only, and the delay is minimized over the
    segmentation count n = 1..n_max using the level-dependent chain.
    """
    _check_alpha(alpha)
    if n_max < 1:
        raise ParameterError("n_max must be >= 1")
    quad = quad or QuadratureConfig()
    mu_f = task.task_exec_rate_per_s
    idle_intensity = congested_worker_intensity(alpha, deploy, mu_f)
    effective = DeploymentParams(
        worker_intensity_per_m2=idle_intensity,
        requester_intensity_per_m2=alpha * deploy.requester_intensity_per_m2,
    )
    mass = effective.mean_los_workers(radio.los_radius_m)
    if mass < MIN_WORKER_MASS:
        raise UnservableError(
            "no line-of-sight worker mass under this bias",
            diagnostic={"alpha": alpha, "idle_worker_intensity": idle_intensity,
                        "mean_los_workers": mass})
    query = CoverageQuery(radio, effective, RankedSelection(1))
    ps = ranked_success_probabilities(query, ks=range(1, n_max + 1), cfg=quad)
    rates = ps / task.d2d_slot_s
    # deep ranks can underflow to zero success mass; cap the n search there
    usable = n_max
    for i, rate in enumerate(rates):
        if rate <= 0.0:
            usable = i
            break
    if usable == 0:
        raise UnservableError(
            "success probability of even the nearest worker underflows",
            diagnostic={"alpha": alpha, "mean_los_workers": mass})
    delays = []
    for n in range(1, usable + 1):
        model = build_level_dependent(n, rates[:n].tolist(), mu_f)
        delays.append(mean_absorption_time(model).mean_delay_s)
    best = min(range(usable), key=lambda i: delays[i])
    return EecOperatingPoint(
        delay_s=delays[best],
        optimal_n=best + 1,
        idle_worker_intensity=idle_intensity,
        mean_los_workers=mass,
        per_n_delay_s=tuple(delays),
    )


def mec_delay(mec: MecParams, task: TaskParams, radio: RadioParams) -> float:
    """Average MEC response delay: uplink plus processor-shared computation.

    The expected concurrent load is the mean number of competing requesters
    in the LoS disk, and computation time scales with (1 + load).
    """
    load = mec.concurrent_requester_intensity * math.pi * radio.los_radius_m ** 2
    uplink = task.d2d_slot_s / mec.offload_success_prob
    return uplink + (1.0 + load) / (mec.power_ratio * mec.mec_task_rate_mu_f)


def combined_delay(alpha: float, eec_delay_s: float, mec_delay_s: float) -> float:
    """Blend the two tiers' delays with the bias weight."""
    _check_alpha(alpha)
    return alpha * eec_delay_s + (1.0 - alpha) * mec_delay_s


def bias_sweep(alphas, radio: RadioParams, deploy: DeploymentParams, task: TaskParams,
               mec: MecParams, n_max: int = 50,
               quad: QuadratureConfig | None = None) -> list[BiasPoint]:
    """Evaluate the blended objective on a grid of bias values.

    At each alpha the MEC load is the (1 - alpha) fraction of the deployment
    requester intensity; the edge side re-optimizes its segmentation count.
    """
    points = []
    for alpha in alphas:
        _check_alpha(alpha)
        edge = eec_delay_under_bias(alpha, radio, deploy, task, n_max=n_max, quad=quad)
        mec_here = replace(mec, concurrent_requester_intensity=(
            (1.0 - alpha) * deploy.requester_intensity_per_m2))
        tau_mec = mec_delay(mec_here, task, radio)
        points.append(BiasPoint(
            alpha=float(alpha),
            tau_eec_s=edge.delay_s,
            tau_mec_s=tau_mec,
            tau_alpha_s=combined_delay(alpha, edge.delay_s, tau_mec),
            eec_optimal_n=edge.optimal_n,
        ))
    return points


def optimal_bias(grid_step: float, radio: RadioParams, deploy: DeploymentParams,
                 task: TaskParams, mec: MecParams, n_max: int = 50,
                 quad: QuadratureConfig | None = None) -> BiasPoint:
    """Grid argmin of the blended objective; ties go to the smaller alpha."""
    if not 0.0 < grid_step <= 1.0:
        raise ParameterError("grid_step must lie in (0, 1]")
    steps = int(round(1.0 / grid_step))
    alphas = [round(min(i * grid_step, 1.0), 12) for i in range(steps + 1)]
    if alphas[-1] != 1.0:
        alphas.append(1.0)
    points = bias_sweep(alphas, radio, deploy, task, mec, n_max=n_max, quad=quad)
    best = points[0]
    for p in points[1:]:
        if p.tau_alpha_s < best.tau_alpha_s:
            best = p
    return best


def _check_alpha(alpha: float):
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"alpha must lie in [0, 1], got {alpha!r}")
