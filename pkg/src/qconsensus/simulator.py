"""Monte-Carlo runs of quantized consensus with concrete quantizers.

Each trial draws ``z_i(0) = x + n_i`` as length-``L`` vectors and iterates
``z(t+1) = z(t) + (W - I) Q(z(t))`` coordinatewise. Randomness for trial
``k`` comes from generators keyed by ``(seed, k, t, role)`` so results do not
depend on the order in which trials run.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .rate_model import RdModel, rate_of

KINDS = ("fixed_uniform", "ecsq_uniform", "dithered_uniform", "gaussian_noise_proxy", "zero_rate", "lossless")

_ROLE_INIT = 0
_ROLE_QUANT = 1


@dataclass(frozen=True)
class QuantizerSpec:
    """Quantizer used by one node at one iteration.

    ``fixed_uniform`` needs ``rate`` (integer bits) and ``sigma`` (model
    standard deviation); its range is ``range_multiplier * sigma`` centred on
    ``mean``. The uniform kinds take ``step`` or ``distortion``
    (``step = sqrt(12 D)``). ``gaussian_noise_proxy`` adds independent noise of
    variance ``distortion``. ``zero_rate`` transmits ``mean``; ``lossless``
    passes the state through unchanged.
    """

    kind: str
    step: float | None = None
    distortion: float | None = None
    rate: int | None = None
    sigma: float | None = None
    mean: float = 0.0
    range_multiplier: float = 12.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown quantizer kind {self.kind!r}")
        if self.kind in ("ecsq_uniform", "dithered_uniform"):
            if self.step is None:
                if self.distortion is None or not self.distortion > 0:
                    raise ValueError(f"{self.kind} needs a positive step or distortion")
                object.__setattr__(self, "step", math.sqrt(12.0 * self.distortion))
            if not self.step > 0:
                raise ValueError("step must be positive")
        elif self.kind == "fixed_uniform":
            if self.rate is None or int(self.rate) < 1:
                raise ValueError("fixed_uniform needs an integer rate >= 1")
            if self.sigma is None or not self.sigma > 0:
                raise ValueError("fixed_uniform needs a positive sigma")
            object.__setattr__(self, "rate", int(self.rate))
            object.__setattr__(self, "step", self.range_multiplier * self.sigma / 2**self.rate)
        elif self.kind == "gaussian_noise_proxy":
            if self.distortion is None or not self.distortion > 0:
                raise ValueError("gaussian_noise_proxy needs a positive distortion")


@dataclass
class SimResult:
    empirical_mse_per_iter: np.ndarray
    empirical_rate: np.ndarray
    aggregate_rate_bits: float
    trials: int
    L: int
    seed: int
    empirical_distortion: np.ndarray = field(repr=False)
    empirical_variance: np.ndarray = field(repr=False)
    zero_rate_slots: list = field(default_factory=list)
    max_average_drift: float = 0.0

    def to_dict(self) -> dict:
        return {
            "empirical_mse_per_iter": self.empirical_mse_per_iter.tolist(),
            "empirical_rate": self.empirical_rate.tolist(),
            "aggregate_rate_bits": self.aggregate_rate_bits,
            "trials": self.trials,
            "L": self.L,
            "seed": self.seed,
            "empirical_distortion": self.empirical_distortion.tolist(),
            "empirical_variance": self.empirical_variance.tolist(),
            "zero_rate_slots": [list(s) for s in self.zero_rate_slots],
            "max_average_drift": self.max_average_drift,
        }


def quantize_uniform(values, step: float, dither=None):
    """Midtread uniform quantizer, optionally with subtractive dither.

    Returns integer indices and reconstructions ``step * index - dither``.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    values = np.asarray(values, dtype=np.float64)
    u = 0.0 if dither is None else np.asarray(dither, dtype=np.float64)
    idx = np.rint((values + u) / step).astype(np.int64)
    return idx, step * idx - u


def quantize_fixed(values, spec: QuantizerSpec):
    """Fixed-rate uniform quantizer with ``2**rate`` cells over the configured range."""
    levels = 2**spec.rate
    lo = spec.mean - 0.5 * spec.range_multiplier * spec.sigma
    idx = np.clip(np.floor((np.asarray(values) - lo) / spec.step), 0, levels - 1).astype(np.int64)
    return idx, lo + (idx + 0.5) * spec.step


def entropy_bits(counts) -> float:
    """Plug-in entropy of a histogram given as counts."""
    c = np.asarray(list(counts.values()) if isinstance(counts, dict) else counts, dtype=np.float64)
    c = c[c > 0]
    if c.size == 0:
        raise ValueError("no symbols")
    p = c / c.sum()
    return float(-(p * np.log2(p)).sum()) + 0.0


def empirical_rate(indices, kind: str = "ecsq_uniform", spec: QuantizerSpec | None = None, variance=None) -> float:
    """Bits per symbol for a block of quantizer output.

    Entropy-coded kinds use the plug-in entropy of ``indices``; fixed-rate
    uses the nominal rate; the Gaussian proxy uses the Gaussian RD function of
    ``variance`` at the quantizer's distortion.
    """
    if kind in ("ecsq_uniform", "dithered_uniform"):
        indices = np.asarray(indices).reshape(-1)
        if indices.size == 0:
            raise ValueError("empty input")
        _, counts = np.unique(indices, return_counts=True)
        return entropy_bits(counts)
    if kind == "fixed_uniform":
        return float(spec.rate)
    if kind == "gaussian_noise_proxy":
        return rate_of(RdModel("vq_proxy"), variance, spec.distortion)
    if kind in ("zero_rate", "lossless"):
        return 0.0
    raise ValueError(f"unknown kind {kind!r}")


def zero_rate_value(model_mean: float, shape) -> np.ndarray:
    """A zero-rate slot sends the model mean of the node's state."""
    return np.full(shape, model_mean)


def _rng(seed: int, trial: int, t: int, role: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, trial, t, role])))


class _TrialStats:
    def __init__(self, T, m):
        self.sq_err = np.zeros(T + 1)
        self.dist = np.zeros((T, m))
        self.z_sum = np.zeros((T, m))
        self.z_sq = np.zeros((T, m))
        self.counts = [[None] * m for _ in range(T)]
        self.drift = 0.0


def _run_trial(W, sigma_x2, sigma_n2, L, schedule, T, seed, trial):
    m = W.shape[0]
    WmI = W - np.eye(m)
    st = _TrialStats(T, m)
    rng = _rng(seed, trial, 0, _ROLE_INIT)
    x = rng.standard_normal(L) * math.sqrt(sigma_x2)
    z = x[None, :] + rng.standard_normal((m, L)) * math.sqrt(sigma_n2)
    avg0 = z.mean(axis=0)
    scale = np.maximum(1.0, np.abs(avg0))
    st.sq_err[0] = np.sum((z - avg0) ** 2)
    for t in range(T):
        rng = _rng(seed, trial, t, _ROLE_QUANT)
        q = np.empty_like(z)
        for i in range(m):
            spec = schedule[t][i]
            v = z[i]
            if spec.kind == "lossless":
                q[i] = v
            elif spec.kind == "zero_rate":
                q[i] = zero_rate_value(spec.mean, L)
            elif spec.kind == "gaussian_noise_proxy":
                q[i] = v + rng.standard_normal(L) * math.sqrt(spec.distortion)
            elif spec.kind == "fixed_uniform":
                _, q[i] = quantize_fixed(v, spec)
            else:
                u = rng.uniform(-0.5 * spec.step, 0.5 * spec.step, L) if spec.kind == "dithered_uniform" else None
                idx, q[i] = quantize_uniform(v, spec.step, u)
                vals, counts = np.unique(idx, return_counts=True)
                st.counts[t][i] = dict(zip(vals.tolist(), counts.tolist()))
        st.dist[t] = np.sum((q - z) ** 2, axis=1)
        st.z_sum[t] = z.sum(axis=1)
        st.z_sq[t] = np.sum(z**2, axis=1)
        z = z + WmI @ q
        avg = z.mean(axis=0)
        st.drift = max(st.drift, float(np.max(np.abs(avg - avg0) / scale)))
        st.sq_err[t + 1] = np.sum((z - avg) ** 2)
    return st


def run_consensus(
    W,
    sigma_x2: float,
    sigma_n2: float,
    L: int,
    schedule,
    T: int,
    trials: int,
    seed: int,
    threads: int = 1,
) -> SimResult:
    """Simulate quantized consensus and measure MSE and rates.

    ``schedule[t][i]`` is the :class:`QuantizerSpec` node ``i`` uses at
    iteration ``t``. Empirical MSE is measured against the per-coordinate
    average of the initial states and pooled over nodes, coordinates and
    trials.
    """
    W = np.asarray(W, dtype=np.float64)
    m = W.shape[0]
    if T < 1 or L < 1 or trials < 1:
        raise ValueError("T, L and trials must be positive")
    if len(schedule) < T or any(len(row) != m for row in schedule[:T]):
        raise ValueError(f"schedule must have {T} rows of {m} quantizer specs")

    def one(k):
        return _run_trial(W, sigma_x2, sigma_n2, L, schedule, T, seed, k)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            stats = list(pool.map(one, range(trials)))
    else:
        stats = [one(k) for k in range(trials)]

    # reduce in trial order so the floating point sums are reproducible
    n_sym = L * trials
    sq_err = np.zeros(T + 1)
    dist = np.zeros((T, m))
    z_sum = np.zeros((T, m))
    z_sq = np.zeros((T, m))
    drift = 0.0
    for st in stats:
        sq_err += st.sq_err
        dist += st.dist
        z_sum += st.z_sum
        z_sq += st.z_sq
        drift = max(drift, st.drift)
    mean = z_sum / n_sym
    variance = z_sq / n_sym - mean**2

    rates = np.zeros((T, m))
    zero_slots = []
    for t in range(T):
        for i in range(m):
            spec = schedule[t][i]
            if spec.kind in ("ecsq_uniform", "dithered_uniform"):
                total = Counter()
                for st in stats:
                    total.update(st.counts[t][i])
                rates[t, i] = entropy_bits(np.array([total[k] for k in sorted(total)]))
            else:
                rates[t, i] = empirical_rate(None, spec.kind, spec, variance[t, i])
            if spec.kind == "zero_rate":
                zero_slots.append((t, i))

    return SimResult(
        empirical_mse_per_iter=sq_err / (m * n_sym),
        empirical_rate=rates,
        aggregate_rate_bits=float(rates.sum()),
        trials=trials,
        L=L,
        seed=seed,
        empirical_distortion=dist / n_sym,
        empirical_variance=variance,
        zero_rate_slots=zero_slots,
        max_average_drift=drift,
    )


def schedule_from_solution(solution, kind: str, variances=None, means=None, rates=None):
    """Quantizer specs realizing an optimized distortion schedule.

    Slots whose model rate is zero become ``zero_rate`` specs sending the
    model mean. ``fixed_uniform`` rounds each model rate up to an integer and
    needs the model ``variances``.
    """
    D = solution.d_star.as_matrix(solution.r_star.shape[1])
    R = solution.r_star if rates is None else rates
    T, m = D.shape
    means = np.zeros((T, m)) if means is None else np.asarray(means)
    out = []
    for t in range(T):
        row = []
        for i in range(m):
            if R[t, i] <= 0:
                row.append(QuantizerSpec("zero_rate", mean=float(means[t, i])))
            elif kind == "fixed_uniform":
                row.append(
                    QuantizerSpec(
                        "fixed_uniform",
                        rate=max(1, int(math.ceil(R[t, i]))),
                        sigma=math.sqrt(variances[t, i]),
                        mean=float(means[t, i]),
                    )
                )
            else:
                row.append(QuantizerSpec(kind, distortion=float(D[t, i])))
        out.append(row)
    return out


def lossless_schedule(T: int, m: int):
    spec = QuantizerSpec("lossless")
    return [[spec] * m for _ in range(T)]
