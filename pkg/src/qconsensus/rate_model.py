"""Operational rate-distortion models for Gaussian sources.

High-rate model: ``R = 0.5 * log2(sigma2 / D) + r_c`` saturating at zero
rate once ``sigma2 / D <= 2**(-2 r_c)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

FAMILIES = ("ecsq", "dithered_uniform", "fixed_uniform", "vq_proxy")


def ecsq_rate_constant() -> float:
    """High-rate entropy gap of uniform scalar quantization, 0.5*log2(pi*e/6)."""
    return 0.5 * math.log2(math.pi * math.e / 6.0)


def fixed_uniform_rate_constant(range_multiplier: float = 12.0) -> float:
    # 2**R levels over range_multiplier * sigma gives D = range_multiplier**2 sigma^2 / (12 * 4**R)
    return 0.5 * math.log2(range_multiplier**2 / 12.0)


def default_rate_constant(family: str) -> float:
    if family in ("ecsq", "dithered_uniform"):
        return ecsq_rate_constant()
    if family == "fixed_uniform":
        return fixed_uniform_rate_constant()
    if family == "vq_proxy":
        return 0.0
    raise ValueError(f"unknown RD family {family!r}")


def d_max_from_nonzero_rule(p_nonzero: float = 0.01) -> float:
    """Largest normalized distortion keeping a nonzero index with probability ``p_nonzero``.

    A midtread quantizer with step ``delta`` on a unit-variance Gaussian emits
    a nonzero index with probability ``2 Q(delta / 2)``. Solving for
    ``delta`` gives ``D_max = delta**2 / 12``.
    """
    if not 0.0 < p_nonzero < 1.0:
        raise ValueError(f"p_nonzero must lie in (0, 1), got {p_nonzero}")
    delta = 2.0 * norm.isf(p_nonzero / 2.0)
    return delta * delta / 12.0


@dataclass(frozen=True)
class RdModel:
    family: str = "ecsq"
    r_c: float | None = None
    d_max: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown RD family {self.family!r}; expected one of {FAMILIES}")
        r_c = default_rate_constant(self.family) if self.r_c is None else float(self.r_c)
        if self.family == "vq_proxy":
            r_c = 0.0
        d_max = d_max_from_nonzero_rule(0.01) if self.d_max is None else float(self.d_max)
        if r_c < 0:
            raise ValueError("r_c must be nonnegative")
        if not d_max > 0:
            raise ValueError("d_max must be positive")
        object.__setattr__(self, "r_c", r_c)
        object.__setattr__(self, "d_max", d_max)

    @classmethod
    def from_config(cls, cfg: dict) -> "RdModel":
        """Build from ``{"family": ..., "r_c": float | "auto", "d_max": float | "auto:p=0.01"}``."""
        family = cfg.get("family", "ecsq")
        r_c = cfg.get("r_c", "auto")
        d_max = cfg.get("d_max", "auto:p=0.01")
        if r_c == "auto":
            r_c = None
        if isinstance(d_max, str):
            if d_max == "auto":
                d_max = d_max_from_nonzero_rule(0.01)
            elif d_max.startswith("auto:p="):
                d_max = d_max_from_nonzero_rule(float(d_max[len("auto:p="):]))
            else:
                raise ValueError(f"bad d_max setting {d_max!r}")
        return cls(family, r_c, d_max)

    def to_dict(self) -> dict:
        return {"family": self.family, "r_c": self.r_c, "d_max": self.d_max}


def rate_of(model: RdModel, variance, distortion):
    """Bits per symbol to code a source of ``variance`` at ``distortion``.

    Works elementwise on arrays.
    """
    variance = np.asarray(variance, dtype=np.float64)
    distortion = np.asarray(distortion, dtype=np.float64)
    if np.any(variance <= 0) or np.any(distortion <= 0):
        raise ValueError("variance and distortion must be positive")
    log_ratio = np.log2(variance) - np.log2(distortion)
    rate = np.where(log_ratio > -2.0 * model.r_c, 0.5 * log_ratio + model.r_c, 0.0)
    return float(rate) if rate.ndim == 0 else rate


def distortion_of(model: RdModel, variance, rate):
    """Inverse of :func:`rate_of` on the unsaturated branch."""
    return np.asarray(variance) * 2.0 ** (-2.0 * (np.asarray(rate) - model.r_c))


def aggregate_rate(r) -> float:
    return float(np.sum(r))


def schedule_from_distortions(model: RdModel, problem, d) -> np.ndarray:
    """Per-node rates ``(T, m)`` implied by distortion schedule ``d``."""
    var = problem.variances(d)
    D = problem.schedule(problem.flatten(d)).as_matrix(problem.m)
    if np.any(D <= 0):
        raise ValueError("distortions must be strictly positive")
    return rate_of(model, var, D)
