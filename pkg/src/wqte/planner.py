"""Precision targets to sampling, Trotter and shot parameters, plus a resource report."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .acquisition import SamplingPlan
from .statevector import TrotterPlan

# shots constant of the 4-sigma < p detectability condition: 16 * 4
SHOT_CONSTANT = 64.0
_ROUND_SLACK = 1e-9


def _ceil(x: float) -> int:
    """Ceiling that ignores floating-point excess below ``1e-9`` relative."""
    return math.ceil(x - _ROUND_SLACK * max(1.0, abs(x)))


def _positive(**kwargs):
    for name, value in kwargs.items():
        if not (value > 0 and math.isfinite(value)):
            raise ValueError(f"{name} must be positive and finite, got {value}")


def plan_absolute(epsilon: float, E0_bound: float, delta_cap: float | None = None,
                  shots: int | None = None) -> SamplingPlan:
    """Sampling plan reaching absolute resolution ``epsilon`` without aliasing.

    ``T_max = 2 pi / epsilon``, ``delta = min(pi / E0_bound, delta_cap)`` and
    ``N = ceil(T_max / delta)`` (at least 2), so the realised resolution is
    never coarser than ``epsilon``.
    """
    _positive(epsilon=epsilon, E0_bound=E0_bound)
    t_max = 2 * math.pi / epsilon
    delta = math.pi / E0_bound
    if delta_cap is not None:
        _positive(delta_cap=delta_cap)
        delta = min(delta, delta_cap)
    return SamplingPlan(delta, max(2, _ceil(t_max / delta)), shots)


def plan_relative(rel_err: float, safety_factor: float = 1.0) -> int:
    """Samples ``N = ceil(safety_factor * 2 / rel_err)`` for a ground-state relative error."""
    if not 0 < rel_err < 1:
        raise ValueError(f"relative error must lie in (0, 1), got {rel_err}")
    if safety_factor < 1:
        raise ValueError("safety factor must be >= 1")
    return _ceil(safety_factor * 2.0 / rel_err)


def trotter_step_for(epsilon: float, T_max: float, c: float = 1.0) -> TrotterPlan:
    """Step ``tau = c sqrt(epsilon / T_max)`` keeping the compiled phase error near ``epsilon``."""
    _positive(epsilon=epsilon, T_max=T_max, c=c)
    return TrotterPlan(c * math.sqrt(epsilon / T_max))


def min_shots(n_samples: int, overlap: float) -> int:
    """Smallest integer ``M`` with ``4 sigma < p``, i.e. ``M >= 64 / (N p^2)``."""
    return max(1, _ceil(SHOT_CONSTANT / (n_samples * overlap ** 2)))


def noise_gate_budget(gamma: float, M_budget: int) -> int:
    """Gate count at which the noise attenuation costs a factor ``M_budget`` in shots.

    Returns ``ln(M_budget) / ln(1 / (1 - gamma))`` rounded to the nearest integer.
    """
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if M_budget < 1:
        raise ValueError("shot budget must be >= 1")
    return int(round(math.log(M_budget) / -math.log1p(-gamma)))


@dataclass(frozen=True)
class ResourceEstimate:
    epsilon: float
    overlap: float
    system_size: int
    E0_bound: float
    t_max: float
    resolution: float
    delta_max: float
    delta: float
    n_samples: int
    tau: float
    trotter_slices: int
    pauli_terms: int
    gate_count_order: float
    m_min: int
    total_samples: float
    total_samples_integer: int
    gamma: float | None = None
    noise_gate_budget: int | None = None
    shot_budget: int | None = None

    def as_dict(self) -> dict:
        d = asdict(self)
        d["notes"] = {
            "gate_count_order": "estimate N_p * (T_max / tau) * L, not a measured count",
            "total_samples": "64 / p^2, the continuous shot bound",
            "total_samples_integer": "N * m_min with integer shots per point",
        }
        return d


def estimate_resources(L: int, epsilon: float, p: float, N_p: int, E0_bound: float,
                       gamma: float | None = None, M_budget: int | None = None,
                       c: float = 1.0) -> ResourceEstimate:
    """Fill every row of the cost table for one target.

    ``total_samples`` is the continuous bound ``64 / p^2``; the integer
    schedule ``N * m_min`` is reported separately since rounding ``M`` up
    can only increase it.
    """
    if not 0 < p <= 1:
        raise ValueError(f"overlap must lie in (0, 1], got {p}")
    _positive(L=L, N_p=N_p)
    plan = plan_absolute(epsilon, E0_bound)
    trotter = trotter_step_for(epsilon, plan.t_max, c)
    slices = _ceil(plan.t_max / trotter.tau)
    m_min = min_shots(plan.n_samples, p)
    budget = None
    if gamma is not None:
        budget = noise_gate_budget(gamma, M_budget if M_budget is not None else 10_000)
    return ResourceEstimate(
        epsilon=epsilon,
        overlap=p,
        system_size=L,
        E0_bound=E0_bound,
        t_max=2 * math.pi / epsilon,
        resolution=plan.resolution,
        delta_max=math.pi / E0_bound,
        delta=plan.delta,
        n_samples=plan.n_samples,
        tau=trotter.tau,
        trotter_slices=slices,
        pauli_terms=N_p,
        gate_count_order=N_p * (plan.t_max / trotter.tau) * L,
        m_min=m_min,
        total_samples=SHOT_CONSTANT / p ** 2,
        total_samples_integer=plan.n_samples * m_min,
        gamma=gamma,
        noise_gate_budget=budget,
        shot_budget=(M_budget if M_budget is not None else 10_000) if gamma is not None else None,
    )
