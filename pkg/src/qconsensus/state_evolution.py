"""Exact moment recursions for quantized consensus.

The quantized update ``z(t+1) = z(t) + (W - I) Q(z(t))`` with additive,
independent quantization noise of variance ``D_i(t)`` keeps Gaussian states
Gaussian, so the first two moments describe everything. Every marginal
variance and MSE is a nonnegative-affine function of the distortions, which is
what makes the rate allocation a generalized geometric program.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rate_model import RdModel

PSD_RTOL = 1e-10


class NumericalInstabilityError(RuntimeError):
    pass


class UnreachableTargetError(ValueError):
    pass


def _centering(m: int) -> np.ndarray:
    return np.eye(m) - np.full((m, m), 1.0 / m)


def _sym(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


def check_psd(S: np.ndarray, name: str = "covariance") -> None:
    tr = float(np.trace(S))
    if tr <= 0:
        if np.allclose(S, 0.0):
            return
    lo = float(np.min(np.linalg.eigvalsh(_sym(S))))
    if lo < -PSD_RTOL * max(tr, 0.0) - 1e-300:
        raise NumericalInstabilityError(f"{name} not PSD: min eigenvalue {lo:.3e}, trace {tr:.3e}")


@dataclass
class MomentState:
    """Mean and covariance of states and estimation errors at iteration ``t``."""

    t: int
    mu_z: np.ndarray
    sigma_z: np.ndarray
    mu_e: np.ndarray
    sigma_e: np.ndarray

    @property
    def m(self) -> int:
        return self.mu_z.shape[0]

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "mu_z": self.mu_z.tolist(),
            "sigma_z": self.sigma_z.tolist(),
            "mu_e": self.mu_e.tolist(),
            "sigma_e": self.sigma_e.tolist(),
        }


def initial_state(mu_z, sigma_z) -> MomentState:
    """Moments at ``t = 0`` from an arbitrary state mean and covariance."""
    mu_z = np.asarray(mu_z, dtype=np.float64).reshape(-1)
    sigma_z = _sym(np.asarray(sigma_z, dtype=np.float64))
    m = mu_z.shape[0]
    if sigma_z.shape != (m, m):
        raise ValueError(f"sigma_z must be {m}x{m}, got {sigma_z.shape}")
    check_psd(sigma_z, "sigma_z(0)")
    C = _centering(m)
    return MomentState(0, mu_z, sigma_z, C @ mu_z, _sym(C @ sigma_z @ C))


def signal_plus_noise_state(m: int, sigma_x2: float, sigma_n2: float) -> MomentState:
    """Zero-mean states ``z_i(0) = x + n_i`` with a common signal and private noise."""
    return initial_state(np.zeros(m), sigma_x2 * np.ones((m, m)) + sigma_n2 * np.eye(m))


@dataclass
class DistortionSchedule:
    """Quantizer distortions for iterations ``0..T-1``.

    ``per_node`` schedules store a ``(T, m)`` array indexed ``[t, i]``;
    ``constant`` schedules store one value per iteration.
    """

    d: np.ndarray
    mode: str = "per_node"

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=np.float64)
        if self.mode not in ("per_node", "constant"):
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if self.mode == "per_node" and self.d.ndim != 2:
            raise ValueError("per_node schedule needs a (T, m) array")
        if self.mode == "constant" and self.d.ndim != 1:
            raise ValueError("constant schedule needs a length-T array")

    @property
    def T(self) -> int:
        return self.d.shape[0]

    def as_matrix(self, m: int) -> np.ndarray:
        if self.mode == "constant":
            return np.repeat(self.d[:, None], m, axis=1)
        if self.d.shape[1] != m:
            raise ValueError(f"schedule has {self.d.shape[1]} nodes, expected {m}")
        return self.d

    @classmethod
    def zeros(cls, T: int, m: int) -> "DistortionSchedule":
        return cls(np.zeros((T, m)))


def propagate(W, initial: MomentState, d: DistortionSchedule | np.ndarray, T: int) -> list[MomentState]:
    """Moments for ``t = 0..T`` under the quantized consensus update."""
    W = np.asarray(W, dtype=np.float64)
    m = initial.m
    if W.shape != (m, m):
        raise ValueError(f"W is {W.shape}, states have dimension {m}")
    if not isinstance(d, DistortionSchedule):
        d = DistortionSchedule(np.asarray(d, dtype=np.float64))
    D = d.as_matrix(m)
    if D.shape[0] < T:
        raise ValueError(f"schedule covers {D.shape[0]} iterations, need {T}")
    if np.any(D[:T] < 0):
        raise ValueError("distortions must be nonnegative")

    C = _centering(m)
    WmI = W - np.eye(m)
    CW = C @ W
    states = [initial]
    mu_z, sigma_z, mu_e = initial.mu_z, initial.sigma_z, initial.mu_e
    for t in range(T):
        mu_z = W @ mu_z
        mu_e = CW @ mu_e
        sigma_z = _sym(W @ sigma_z @ W + (WmI * D[t]) @ WmI)
        sigma_e = _sym(C @ sigma_z @ C)
        check_psd(sigma_z, f"sigma_z({t + 1})")
        states.append(MomentState(t + 1, mu_z, sigma_z, mu_e, sigma_e))
    return states


def _check_node(state: MomentState, i: int) -> None:
    if not 0 <= i < state.m:
        raise IndexError(f"node {i} out of range for m={state.m}")


def marginal_variance(state: MomentState, i: int) -> float:
    _check_node(state, i)
    return float(state.sigma_z[i, i])


def node_mse(state: MomentState, i: int) -> float:
    _check_node(state, i)
    return float(state.sigma_e[i, i] + state.mu_e[i] ** 2)


def network_mse(state: MomentState) -> float:
    return float((np.trace(state.sigma_e) + state.mu_e @ state.mu_e) / state.m)


def lossless_mse(W, initial: MomentState, t: int) -> float:
    """Network MSE after ``t`` iterations of unquantized consensus."""
    return network_mse(propagate(W, initial, DistortionSchedule.zeros(t, initial.m), t)[t])


def lossless_mse_sequence(W, initial: MomentState, T: int) -> np.ndarray:
    states = propagate(W, initial, DistortionSchedule.zeros(T, initial.m), T)
    return np.array([network_mse(s) for s in states])


def emse(mse: float, lossless: float) -> float:
    """Excess MSE over lossless consensus, in dB."""
    if not lossless > 0:
        raise ValueError("EMSE undefined: lossless MSE is zero")
    return 10.0 * math.log10(mse / lossless)


def t_min(W, initial: MomentState, mse_target: float, cap: int | None = None) -> int:
    """Smallest horizon at which lossless consensus beats ``mse_target``."""
    if not mse_target > 0:
        raise ValueError("mse_target must be positive")
    m = initial.m
    cap = 10 * m if cap is None else cap
    W = np.asarray(W, dtype=np.float64)
    C = _centering(m)
    CW = C @ W
    mu_e, sigma_z = initial.mu_e, initial.sigma_z
    for T in range(cap + 1):
        if T > 0:
            mu_e = CW @ mu_e
            sigma_z = _sym(W @ sigma_z @ W)
        mse = (np.trace(C @ sigma_z @ C) + mu_e @ mu_e) / m
        if mse < mse_target:
            return T
    raise UnreachableTargetError(f"lossless MSE stays above {mse_target:g} for T <= {cap}")


@dataclass
class GgpProblem:
    """Affine (posynomial) dependence of variances and MSEs on distortions.

    Decision variables are flattened as ``j = s * m + k`` for ``per_node``
    problems (node ``k``, iteration ``s``) and ``j = s`` for ``constant``
    problems. ``own_index[t, i]`` gives the variable that node ``i`` uses at
    iteration ``t``.

    ``var_const[t, i] + var_coef[t, i] @ d`` is the marginal variance of node
    ``i`` at iteration ``t``; ``mse_const + mse_coef @ d`` is the network MSE
    at the horizon and ``node_mse_const + node_mse_coef @ d`` the node MSEs.
    """

    mode: str
    T: int
    m: int
    var_const: np.ndarray
    var_coef: np.ndarray
    mse_const: float
    mse_coef: np.ndarray
    node_mse_const: np.ndarray
    node_mse_coef: np.ndarray
    model: RdModel
    own_index: np.ndarray = field(repr=False)

    @property
    def n_vars(self) -> int:
        return self.var_coef.shape[-1]

    def flatten(self, d: DistortionSchedule | np.ndarray) -> np.ndarray:
        if isinstance(d, DistortionSchedule):
            if self.mode == "constant":
                if d.mode != "constant":
                    raise ValueError("constant problem needs a constant schedule")
                return d.d.copy()
            return d.as_matrix(self.m).reshape(-1)
        d = np.asarray(d, dtype=np.float64)
        return d.reshape(-1)

    def schedule(self, x: np.ndarray) -> DistortionSchedule:
        x = np.asarray(x, dtype=np.float64)
        if self.mode == "constant":
            return DistortionSchedule(x.copy(), "constant")
        return DistortionSchedule(x.reshape(self.T, self.m).copy())

    def variances(self, d) -> np.ndarray:
        """Marginal variances, ``(T, m)`` indexed ``[t, i]``."""
        return self.var_const + self.var_coef @ self.flatten(d)

    def mse(self, d) -> float:
        return float(self.mse_const + self.mse_coef @ self.flatten(d))

    def node_mses(self, d) -> np.ndarray:
        return self.node_mse_const + self.node_mse_coef @ self.flatten(d)

    def upper_bounds(self) -> np.ndarray:
        """Largest allowed distortion per variable: ``d_max`` times the lossless variance."""
        ub = self.model.d_max * self.var_const
        if self.mode == "constant":
            return ub.min(axis=1)
        return ub.reshape(-1)

    def tied(self) -> "GgpProblem":
        """Same program with one shared distortion per iteration."""
        if self.mode == "constant":
            return self
        T, m = self.T, self.m
        collapse = lambda a: a.reshape(a.shape[:-1] + (T, m)).sum(axis=-1)
        return GgpProblem(
            mode="constant",
            T=T,
            m=m,
            var_const=self.var_const,
            var_coef=collapse(self.var_coef),
            mse_const=self.mse_const,
            mse_coef=collapse(self.mse_coef),
            node_mse_const=self.node_mse_const,
            node_mse_coef=collapse(self.node_mse_coef),
            model=self.model,
            own_index=np.repeat(np.arange(T)[:, None], m, axis=1),
        )

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "T": self.T,
            "m": self.m,
            "var_const": self.var_const.tolist(),
            "var_coef": self.var_coef.tolist(),
            "mse_const": self.mse_const,
            "mse_coef": self.mse_coef.tolist(),
            "node_mse_const": self.node_mse_const.tolist(),
            "node_mse_coef": self.node_mse_coef.tolist(),
            "model": self.model.to_dict(),
        }


def extract_ggp(W, initial: MomentState, T: int, model: RdModel, mode: str = "per_node") -> GgpProblem:
    """Unroll the moment recursions into affine forms in the distortions.

    With ``A = W^(t-1-s) (W - I)``, the quantization noise injected by node
    ``k`` at iteration ``s`` adds ``A[i, k]**2 * D_k(s)`` to the variance of
    node ``i`` at iteration ``t > s``. The error forms use ``(I - J) A``.
    """
    if T < 1:
        raise ValueError("horizon must be at least 1")
    if mode not in ("per_node", "constant"):
        raise ValueError(f"unknown mode {mode!r}")
    W = np.asarray(W, dtype=np.float64)
    m = initial.m
    I = np.eye(m)
    C = _centering(m)
    WmI = W - I

    # powers[u] = W^u, symmetrized after each product
    powers = [I]
    for _ in range(T):
        powers.append(_sym(powers[-1] @ W))

    var_const = np.empty((T, m))
    var_coef = np.zeros((T, m, T, m))
    for t in range(T):
        Pt = powers[t]
        var_const[t] = np.diag(Pt @ initial.sigma_z @ Pt)
        for s in range(t):
            A = powers[t - 1 - s] @ WmI
            var_coef[t, :, s, :] = A**2

    node_mse_coef = np.zeros((m, T, m))
    for s in range(T):
        B = C @ powers[T - 1 - s] @ WmI
        node_mse_coef[:, s, :] = B**2
    PT = powers[T]
    mu_e_T = C @ PT @ initial.mu_z
    node_mse_const = np.diag(C @ PT @ initial.sigma_z @ PT @ C) + mu_e_T**2

    problem = GgpProblem(
        mode="per_node",
        T=T,
        m=m,
        var_const=var_const,
        var_coef=var_coef.reshape(T, m, T * m),
        mse_const=float(node_mse_const.mean()),
        mse_coef=node_mse_coef.reshape(m, T * m).mean(axis=0),
        node_mse_const=node_mse_const,
        node_mse_coef=node_mse_coef.reshape(m, T * m),
        model=model,
        own_index=np.arange(T * m).reshape(T, m),
    )
    return problem.tied() if mode == "constant" else problem
