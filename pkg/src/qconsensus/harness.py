"""Experiment configuration, batch drivers and the command line interface.

Subcommands: ``gen-graph``, ``tmin``, ``optimize``, ``simulate``, ``sweep``.
All randomness comes from seeds in the JSON config, so rerunning a command
reproduces its output files byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import DisconnectedGraphError, Graph, generate_connected_rgg, metropolis_weights, second_eigenvalue
from .optimizer import InfeasibleTargetError, SolverError, solve
from .rate_model import RdModel
from .simulator import KINDS, run_consensus, schedule_from_solution
from .state_evolution import (
    UnreachableTargetError,
    emse,
    extract_ggp,
    lossless_mse_sequence,
    network_mse,
    propagate,
    signal_plus_noise_state,
    t_min,
)

log = logging.getLogger(__name__)

RATES_COLUMNS = ["node", "t", "rate_bits", "distortion", "sigma2"]
MSE_COLUMNS = ["t", "predicted_mse", "empirical_mse", "lossless_mse"]
SWEEP_COLUMNS = [
    "graph_seed", "rho_c", "T", "mode", "quantizer_kind", "mse_target", "predicted_mse",
    "empirical_mse", "emse_db", "predicted_Ragg", "empirical_Ragg", "tmin", "status",
]
AVERAGE_COLUMNS = [
    "rho_c", "T", "mode", "quantizer_kind", "target", "n_ok", "n_failed", "mse_target",
    "predicted_mse", "empirical_mse", "predicted_emse_db", "emse_db", "predicted_Ragg", "empirical_Ragg",
]

FULL_SCALE = {"n_graphs": 32, "L": 10000, "trials": 1000}

KIND_TO_FAMILY = {
    "gaussian_noise_proxy": "vq_proxy",
    "dithered_uniform": "dithered_uniform",
    "ecsq_uniform": "ecsq",
    "fixed_uniform": "fixed_uniform",
}


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".9g")
    return str(x)


# configuration

def _get(d: dict, key: str, path: str, kind, default=..., positive=False):
    if key not in d:
        if default is ...:
            raise ConfigError(f"{path}.{key}", "missing required field")
        return default
    v = d[key]
    if v is None and default is None:
        return None
    if kind is float and isinstance(v, int) and not isinstance(v, bool):
        v = float(v)
    if not isinstance(v, kind) or isinstance(v, bool):
        raise ConfigError(f"{path}.{key}", f"expected {kind.__name__}, got {type(v).__name__}")
    if positive and not v > 0:
        raise ConfigError(f"{path}.{key}", "must be positive")
    return v


def _float_list(d: dict, key: str, path: str) -> list[float]:
    v = d.get(key, [])
    if not isinstance(v, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        raise ConfigError(f"{path}.{key}", "expected a list of numbers")
    return [float(x) for x in v]


@dataclass
class GraphConfig:
    m: int = 20
    rho_c: float | None = 0.35
    seed: int = 1
    retries: int = 100
    edges: list | None = None

    @classmethod
    def from_dict(cls, d: dict, path="graph") -> "GraphConfig":
        if not isinstance(d, dict):
            raise ConfigError(path, "expected an object")
        edges = d.get("edges")
        if edges is not None:
            if not isinstance(edges, list) or not all(isinstance(e, list) and len(e) == 2 for e in edges):
                raise ConfigError(f"{path}.edges", "expected a list of [i, j] pairs")
        cfg = cls(
            m=_get(d, "m", path, int, 20, positive=True),
            rho_c=_get(d, "rho_c", path, float, None if edges is not None else 0.35, positive=True),
            seed=_get(d, "seed", path, int, 1),
            retries=_get(d, "retries", path, int, 100),
            edges=[[int(i), int(j)] for i, j in edges] if edges is not None else None,
        )
        if cfg.retries < 0:
            raise ConfigError(f"{path}.retries", "must be nonnegative")
        return cfg

    def to_dict(self) -> dict:
        out = {"m": self.m, "rho_c": self.rho_c, "seed": self.seed, "retries": self.retries}
        if self.edges is not None:
            out["edges"] = self.edges
        return out


@dataclass
class SignalConfig:
    sigma_x2: float = 1.0
    sigma_n2: float = 0.5
    L: int = 1000

    @classmethod
    def from_dict(cls, d: dict, path="signal") -> "SignalConfig":
        if not isinstance(d, dict):
            raise ConfigError(path, "expected an object")
        sx = _get(d, "sigma_x2", path, float, 1.0, positive=True)
        if "snr_db" in d and "sigma_n2" not in d:
            snr = _get(d, "snr_db", path, float)
            sn = sx / 10.0 ** (snr / 10.0)
        else:
            sn = _get(d, "sigma_n2", path, float, 0.5, positive=True)
        return cls(sx, sn, _get(d, "L", path, int, 1000, positive=True))

    def to_dict(self) -> dict:
        return {"sigma_x2": self.sigma_x2, "sigma_n2": self.sigma_n2, "L": self.L}

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.sigma_x2 / self.sigma_n2)


@dataclass
class OptimizerConfig:
    mode: str = "auto"
    constraint: str = "network"
    tol: float = 1e-4
    mse_targets: list = field(default_factory=list)
    from_emse: list = field(default_factory=list)
    size_threshold: int = 100

    @classmethod
    def from_dict(cls, d: dict, path="optimizer") -> "OptimizerConfig":
        if not isinstance(d, dict):
            raise ConfigError(path, "expected an object")
        cfg = cls(
            mode=_get(d, "mode", path, str, "auto"),
            constraint=_get(d, "constraint", path, str, "network"),
            tol=_get(d, "tol", path, float, 1e-4, positive=True),
            mse_targets=_float_list(d, "mse_targets", path),
            from_emse=_float_list(d, "from-emse", path),
            size_threshold=_get(d, "size_threshold", path, int, 100, positive=True),
        )
        if cfg.mode not in ("auto", "variable", "constant"):
            raise ConfigError(f"{path}.mode", "expected auto, variable or constant")
        if cfg.constraint not in ("network", "max-node", "per-node"):
            raise ConfigError(f"{path}.constraint", "expected network, max-node or per-node")
        if any(not x > 0 for x in cfg.mse_targets):
            raise ConfigError(f"{path}.mse_targets", "targets must be positive")
        if any(not x > 0 for x in cfg.from_emse):
            raise ConfigError(f"{path}.from-emse", "EMSE targets must be positive dB values")
        return cfg

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "constraint": self.constraint,
            "tol": self.tol,
            "mse_targets": self.mse_targets,
            "from-emse": self.from_emse,
            "size_threshold": self.size_threshold,
        }


@dataclass
class SimulationConfig:
    trials: int = 100
    quantizer_kind: str = "gaussian_noise_proxy"
    seed: int = 7

    @classmethod
    def from_dict(cls, d: dict, path="simulation") -> "SimulationConfig":
        if not isinstance(d, dict):
            raise ConfigError(path, "expected an object")
        cfg = cls(
            trials=_get(d, "trials", path, int, 100, positive=True),
            quantizer_kind=_get(d, "quantizer_kind", path, str, "gaussian_noise_proxy"),
            seed=_get(d, "seed", path, int, 7),
        )
        if cfg.quantizer_kind not in KIND_TO_FAMILY:
            raise ConfigError(f"{path}.quantizer_kind", f"expected one of {sorted(KIND_TO_FAMILY)}")
        return cfg

    def to_dict(self) -> dict:
        return {"trials": self.trials, "quantizer_kind": self.quantizer_kind, "seed": self.seed}


@dataclass
class SweepConfig:
    n_graphs: int = 8
    rho_c: list = field(default_factory=lambda: [0.35, 0.45])

    @classmethod
    def from_dict(cls, d: dict, path="sweep") -> "SweepConfig":
        if not isinstance(d, dict):
            raise ConfigError(path, "expected an object")
        cfg = cls(_get(d, "n_graphs", path, int, 8, positive=True), _float_list(d, "rho_c", path) if "rho_c" in d else [0.35, 0.45])
        if any(not r > 0 for r in cfg.rho_c):
            raise ConfigError(f"{path}.rho_c", "radii must be positive")
        return cfg

    def to_dict(self) -> dict:
        return {"n_graphs": self.n_graphs, "rho_c": self.rho_c}


@dataclass
class ExperimentConfig:
    graph: GraphConfig = field(default_factory=GraphConfig)
    signal: SignalConfig = field(default_factory=SignalConfig)
    T: int = 5
    model: dict = field(default_factory=lambda: {"family": "auto", "r_c": "auto", "d_max": "auto:p=0.01"})
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output: str = "out"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("$", "config must be a JSON object")
        known = {"graph", "signal", "T", "model", "optimizer", "simulation", "sweep", "output"}
        for key in d:
            if key not in known:
                raise ConfigError(key, "unknown field")
        cfg = cls(
            graph=GraphConfig.from_dict(d.get("graph", {})),
            signal=SignalConfig.from_dict(d.get("signal", {})),
            T=_get(d, "T", "$", int, 5, positive=True),
            model=dict(d.get("model", {"family": "auto", "r_c": "auto", "d_max": "auto:p=0.01"})),
            optimizer=OptimizerConfig.from_dict(d.get("optimizer", {})),
            simulation=SimulationConfig.from_dict(d.get("simulation", {})),
            sweep=SweepConfig.from_dict(d.get("sweep", {})),
            output=_get(d, "output", "$", str, "out"),
        )
        try:
            cfg.rd_model()
        except (ValueError, TypeError) as exc:
            raise ConfigError("model", str(exc)) from exc
        return cfg

    def to_dict(self) -> dict:
        return {
            "graph": self.graph.to_dict(),
            "signal": self.signal.to_dict(),
            "T": self.T,
            "model": self.model,
            "optimizer": self.optimizer.to_dict(),
            "simulation": self.simulation.to_dict(),
            "sweep": self.sweep.to_dict(),
            "output": self.output,
        }

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError("$", f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)

    def rd_model(self) -> RdModel:
        model = dict(self.model)
        if model.get("family", "auto") == "auto":
            model["family"] = KIND_TO_FAMILY[self.simulation.quantizer_kind]
        return RdModel.from_config(model)

    def resolve_mode(self, m: int | None = None) -> str:
        mode = self.optimizer.mode
        if mode != "auto":
            return mode
        m = self.graph.m if m is None else m
        return "variable" if m * self.T <= self.optimizer.size_threshold else "constant"

    def apply_full_scale(self) -> None:
        self.sweep.n_graphs = FULL_SCALE["n_graphs"]
        self.signal.L = FULL_SCALE["L"]
        self.simulation.trials = FULL_SCALE["trials"]


def desk_sweep_config() -> ExperimentConfig:
    """The default desk-scale sweep: 8 RGGs per radius, m=20, T=7, proxy quantizer."""
    return ExperimentConfig(
        graph=GraphConfig(m=20, rho_c=0.35, seed=1),
        signal=SignalConfig(1.0, 0.5, 1000),
        T=7,
        optimizer=OptimizerConfig(mode="constant", from_emse=[0.5, 1.0, 2.0, 3.0]),
        simulation=SimulationConfig(trials=100, quantizer_kind="gaussian_noise_proxy", seed=7),
        sweep=SweepConfig(8, [0.35, 0.45]),
    )


# building blocks

def build_graph(cfg: GraphConfig, rho_c: float | None = None, seed: int | None = None) -> Graph:
    if cfg.edges is not None and rho_c is None:
        return Graph(m=cfg.m, edges=tuple(tuple(e) for e in cfg.edges))
    rho = cfg.rho_c if rho_c is None else rho_c
    g, _ = generate_connected_rgg(cfg.m, rho, cfg.seed if seed is None else seed, cfg.retries)
    return g


def resolve_targets(cfg: ExperimentConfig, lossless_T: float) -> list[tuple[str, float]]:
    """``(label, mse_target)`` pairs; EMSE targets scale the lossless MSE at T."""
    out = [(f"mse={fmt(x)}", x) for x in cfg.optimizer.mse_targets]
    out += [(f"emse_db={fmt(db)}", lossless_T * 10.0 ** (db / 10.0)) for db in cfg.optimizer.from_emse]
    return out


def _write_csv(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) for x in r])
    path.write_text(buf.getvalue())


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _rates_rows(sol, problem):
    var = problem.variances(sol.d_star)
    D = sol.d_star.as_matrix(problem.m)
    for i in range(problem.m):
        for t in range(problem.T):
            yield [i, t, sol.r_star[t, i], D[t, i], var[t, i]]


def _derived_seed(*key) -> int:
    return int(np.random.SeedSequence(list(key)).generate_state(1)[0])


# commands

def cmd_gen_graph(cfg: ExperimentConfig, out: Path) -> dict:
    g = build_graph(cfg.graph)
    W = metropolis_weights(g)
    (out / "graph.json").write_text(g.to_json() + "\n")
    info = {"m": g.m, "edges": len(g.edges), "lambda2": second_eigenvalue(W)}
    print(f"m={info['m']} edges={info['edges']} lambda2={fmt(info['lambda2'])}")
    return info


def cmd_tmin(cfg: ExperimentConfig, out: Path, mse_target: float | None = None) -> dict:
    g = build_graph(cfg.graph)
    W = metropolis_weights(g)
    init = signal_plus_noise_state(g.m, cfg.signal.sigma_x2, cfg.signal.sigma_n2)
    targets = [mse_target] if mse_target is not None else cfg.optimizer.mse_targets
    report = []
    for target in targets:
        T = t_min(W, init, target)
        seq = lossless_mse_sequence(W, init, T)
        print(f"mse_target={fmt(target)} T_min={T}")
        print("lossless MSE: " + " ".join(fmt(x) for x in seq))
        report.append({"mse_target": target, "t_min": T, "lossless_mse": seq.tolist()})
    _write_json(out / "tmin.json", report)
    return {"results": report}


def _solve_one(problem, target, cfg: ExperimentConfig, mode: str):
    constraint = cfg.optimizer.constraint
    if constraint == "per-node":
        # a single CLI/config target becomes the same limit at every node
        target = np.full(problem.m, float(target))
    return solve(problem, target, mode=mode, constraint=constraint, tol=cfg.optimizer.tol)


def cmd_optimize(cfg: ExperimentConfig, out: Path) -> dict:
    g = build_graph(cfg.graph)
    W = metropolis_weights(g)
    init = signal_plus_noise_state(g.m, cfg.signal.sigma_x2, cfg.signal.sigma_n2)
    problem = extract_ggp(W, init, cfg.T, cfg.rd_model())
    mode = cfg.resolve_mode(g.m)
    summary = []
    for k, (label, target) in enumerate(resolve_targets(cfg, problem.mse_const)):
        entry = {"index": k, "label": label, "mse_target": target, "mode": mode}
        try:
            sol = _solve_one(problem, target, cfg, mode)
        except (InfeasibleTargetError, SolverError) as exc:
            entry.update(status="infeasible" if isinstance(exc, InfeasibleTargetError) else "failed", message=str(exc))
            print(f"[{k}] {label}: {entry['status']}: {exc}")
            summary.append(entry)
            continue
        _write_json(out / f"solution_{k:03d}.json", sol.to_dict())
        _write_csv(out / f"rates_{k:03d}.csv", RATES_COLUMNS, _rates_rows(sol, problem))
        entry.update(status=sol.report.status, objective_bits=sol.objective_bits, achieved_mse=sol.achieved_mse)
        print(f"[{k}] {label}: R_agg={fmt(sol.objective_bits)} bits, MSE={fmt(sol.achieved_mse)}")
        summary.append(entry)
    _write_json(out / "optimize.json", {"lossless_mse": problem.mse_const, "targets": summary})
    return {"targets": summary}


def _predicted_mse_sequence(W, init, sol, T):
    return np.array([network_mse(s) for s in propagate(W, init, sol.d_star, T)])


def cmd_simulate(cfg: ExperimentConfig, out: Path, threads: int = 1) -> dict:
    g = build_graph(cfg.graph)
    W = metropolis_weights(g)
    sig = cfg.signal
    init = signal_plus_noise_state(g.m, sig.sigma_x2, sig.sigma_n2)
    problem = extract_ggp(W, init, cfg.T, cfg.rd_model())
    mode = cfg.resolve_mode(g.m)
    lossless = lossless_mse_sequence(W, init, cfg.T)
    kind = cfg.simulation.quantizer_kind
    summary = []
    for k, (label, target) in enumerate(resolve_targets(cfg, problem.mse_const)):
        entry = {"index": k, "label": label, "mse_target": target, "mode": mode, "quantizer_kind": kind}
        try:
            sol = _solve_one(problem, target, cfg, mode)
        except (InfeasibleTargetError, SolverError) as exc:
            entry.update(status="infeasible" if isinstance(exc, InfeasibleTargetError) else "failed", message=str(exc))
            print(f"[{k}] {label}: {entry['status']}: {exc}")
            summary.append(entry)
            continue
        sched = schedule_from_solution(sol, kind, variances=problem.variances(sol.d_star))
        res = run_consensus(W, sig.sigma_x2, sig.sigma_n2, sig.L, sched, cfg.T, cfg.simulation.trials,
                            _derived_seed(cfg.simulation.seed, k), threads)
        pred = _predicted_mse_sequence(W, init, sol, cfg.T)
        _write_json(out / f"simulation_{k:03d}.json", {"solution": sol.to_dict(), "simulation": res.to_dict()})
        _write_csv(out / f"mse_{k:03d}.csv", MSE_COLUMNS,
                   ([t, pred[t], res.empirical_mse_per_iter[t], lossless[t]] for t in range(cfg.T + 1)))
        entry.update(status="ok", predicted_Ragg=sol.objective_bits, empirical_Ragg=res.aggregate_rate_bits,
                     predicted_mse=pred[-1], empirical_mse=float(res.empirical_mse_per_iter[-1]))
        print(f"[{k}] {label}: predicted MSE={fmt(pred[-1])} empirical={fmt(res.empirical_mse_per_iter[-1])} "
              f"R_agg predicted={fmt(sol.objective_bits)} empirical={fmt(res.aggregate_rate_bits)}")
        summary.append(entry)
    _write_json(out / "simulate.json", {"targets": summary})
    return {"targets": summary}


def _sweep_point(cfg: ExperimentConfig, ri: int, rho_c: float, gi: int, threads: int):
    """All target rows for one graph realization."""
    graph_seed = cfg.graph.seed + gi
    kind = cfg.simulation.quantizer_kind
    sig = cfg.signal
    T = cfg.T
    try:
        g = build_graph(cfg.graph, rho_c=rho_c, seed=graph_seed)
    except DisconnectedGraphError as exc:
        return [], [(graph_seed, rho_c, str(exc))]
    W = metropolis_weights(g)
    init = signal_plus_noise_state(g.m, sig.sigma_x2, sig.sigma_n2)
    problem = extract_ggp(W, init, T, cfg.rd_model())
    mode = cfg.resolve_mode(g.m)
    lossless_T = problem.mse_const
    rows = []
    for k, (label, target) in enumerate(resolve_targets(cfg, lossless_T)):
        nan = float("nan")
        row = dict(graph_seed=graph_seed, rho_c=rho_c, T=T, mode=mode, quantizer_kind=kind, mse_target=target,
                   predicted_mse=nan, empirical_mse=nan, emse_db=nan, predicted_Ragg=nan, empirical_Ragg=nan,
                   tmin=-1, status="ok", _label=label, _k=k, _ri=ri, _gi=gi, _pred_emse=nan)
        try:
            row["tmin"] = t_min(W, init, target)
        except UnreachableTargetError:
            pass
        try:
            sol = _solve_one(problem, target, cfg, mode)
            sched = schedule_from_solution(sol, kind, variances=problem.variances(sol.d_star))
            res = run_consensus(W, sig.sigma_x2, sig.sigma_n2, sig.L, sched, T, cfg.simulation.trials,
                                _derived_seed(cfg.simulation.seed, ri, gi, k), threads)
        except InfeasibleTargetError:
            row["status"] = "infeasible"
        except SolverError:
            row["status"] = "solver_failed"
        else:
            pred = _predicted_mse_sequence(W, init, sol, T)[-1]
            emp = float(res.empirical_mse_per_iter[-1])
            row.update(predicted_mse=pred, empirical_mse=emp, emse_db=emse(emp, lossless_T),
                       _pred_emse=emse(pred, lossless_T), predicted_Ragg=sol.objective_bits,
                       empirical_Ragg=res.aggregate_rate_bits)
            if res.zero_rate_slots:
                row["status"] = f"ok_zero_rate_slots={len(res.zero_rate_slots)}"
        rows.append(row)
    return rows, []


def cmd_sweep(cfg: ExperimentConfig, out: Path, threads: int = 1) -> dict:
    jobs = [(ri, rho, gi) for ri, rho in enumerate(cfg.sweep.rho_c) for gi in range(cfg.sweep.n_graphs)]

    def run(job):
        return _sweep_point(cfg, *job, threads=1)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]

    rows = [r for rs, _ in results for r in rs]
    rows.sort(key=lambda r: (r["_ri"], r["_gi"], r["_k"]))
    graph_failures = [f for _, fs in results for f in fs]
    _write_csv(out / "tradeoff.csv", SWEEP_COLUMNS, ([r[c] for c in SWEEP_COLUMNS] for r in rows))

    groups: dict = {}
    for r in rows:
        groups.setdefault((r["_ri"], r["_k"]), []).append(r)
    avg_rows = []
    for (ri, k), rs in sorted(groups.items()):
        ok = [r for r in rs if r["status"].startswith("ok")]
        mean = lambda key: float(np.mean([r[key] for r in ok])) if ok else float("nan")
        first = rs[0]
        avg_rows.append([
            first["rho_c"], first["T"], first["mode"], first["quantizer_kind"], first["_label"], len(ok),
            len(rs) - len(ok), mean("mse_target"), mean("predicted_mse"), mean("empirical_mse"),
            mean("_pred_emse"), mean("emse_db"), mean("predicted_Ragg"), mean("empirical_Ragg"),
        ])
    _write_csv(out / "tradeoff_avg.csv", AVERAGE_COLUMNS, avg_rows)
    summary = {
        "rows": len(rows),
        "ok": sum(r["status"].startswith("ok") for r in rows),
        "failed": sum(not r["status"].startswith("ok") for r in rows),
        "graph_failures": [list(f) for f in graph_failures],
    }
    _write_json(out / "sweep_summary.json", summary)
    print(f"sweep: {summary['rows']} rows, {summary['ok']} ok, {summary['failed']} failed, "
          f"{len(graph_failures)} graph draws failed")
    return summary


# CLI

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qconsensus", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="experiment config (JSON)")
    parser.add_argument("--out", help="output directory (overrides config.output)")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--full-scale", action="store_true", help="32 graphs, L=10000, 1000 trials")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-graph", help="generate a connected graph and write graph.json")
    p = sub.add_parser("tmin", help="minimum lossless horizon for an MSE target")
    p.add_argument("--mse-target", type=float)
    for name in ("optimize", "simulate", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--mode", choices=["auto", "variable", "constant"])
        p.add_argument("--constraint", choices=["network", "max-node", "per-node"])
        p.add_argument("--mse-target", type=float, action="append", help="repeatable; replaces config targets")
        p.add_argument("--tol", type=float)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
        if args.full_scale:
            cfg.apply_full_scale()
        if getattr(args, "mode", None):
            cfg.optimizer.mode = args.mode
        if getattr(args, "constraint", None):
            cfg.optimizer.constraint = args.constraint
        if getattr(args, "tol", None):
            cfg.optimizer.tol = args.tol
        if args.command != "tmin" and getattr(args, "mse_target", None):
            cfg.optimizer.mse_targets = list(args.mse_target)
            cfg.optimizer.from_emse = []
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    out = Path(args.out or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "gen-graph":
            cmd_gen_graph(cfg, out)
        elif args.command == "tmin":
            cmd_tmin(cfg, out, args.mse_target)
        elif args.command == "optimize":
            cmd_optimize(cfg, out)
        elif args.command == "simulate":
            cmd_simulate(cfg, out, args.threads)
        elif args.command == "sweep":
            cmd_sweep(cfg, out, args.threads)
    except (DisconnectedGraphError, UnreachableTargetError, SolverError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0
