"""Experiment runner: config parsing, seeded execution, CSV output and summary tables.

Seeding: a run with ``seed=N`` draws from ``SeedSequence([N, code])`` where
``code`` identifies the algorithm (see ``ALGORITHM_CODES``); index learners
further split that stream per threshold slice.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import math
import sys
from collections import defaultdict
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import envs, oracle
from .explore import LABELS, ExplorationPolicy
from .linfa import Aggregation, expand, run_fa_index_learning
from .metrics import RunRecord
from .neural import DqnConfig, run_dqn_index_learning
from .tabular import ReinitScheme, run_qlearning
from .windex import run_index_learning

EXAMPLES = ("circular", "unstructured", "restart", "random_walk", "file")
ALGORITHMS = ("qlearn", "index_qlearn", "index_fa", "index_dqn", "solve")
ALGORITHM_CODES = {name: i for i, name in enumerate(ALGORITHMS, start=1)}
INDEX_ALGORITHMS = ("index_qlearn", "index_fa", "index_dqn")

CURVE_HEADER = ["iter", "error", "wallclock_ms"]
INDEX_HEADER = ["state", "learned_index", "oracle_index"]
SUMMARY_HEADER = ["algorithm", "policy", "iterations", "compute_time_min", "final_error"]

EXAMPLE_TITLES = {
    "circular": "Example with circular dynamics",
    "unstructured": "Example with no structure on transition model",
    "restart": "Example with restart model",
}
ALGORITHM_ORDER = ["QL", "DQN", "QLL", "QLL-FA", "DQNLL"]
POLICY_ORDER = ["EG", "SO", "ES"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    example: str = "circular"
    k_states: int = 5
    rho: float = 0.95
    model_file: str = ""
    algorithm: str = "qlearn"
    policy: str = "eg"
    alpha: float = 0.05
    gamma: float = 0.01
    k_max: int = 1000
    t_max: int = 5000
    delta: float = 0.001
    beta: float = 0.9
    epsilon: float = 0.4
    reinit: str = "none"
    group_size: int = 10
    stop_delta: float = 0.0
    stride: int = 100
    tau: float = 0.001
    minibatch: int = 64
    memory_size: int = 10_000
    soft_update: str = "retain"
    n_jobs: int = 1
    timing: bool = True
    seed: int = 0
    out_dir: str = "runs"

    def echo(self) -> str:
        return " ".join(f"{k}={_fmt(v)}" for k, v in dataclasses.asdict(self).items())

    def to_text(self) -> str:
        return "".join(f"{k}={_fmt(v)}\n" for k, v in dataclasses.asdict(self).items())

    @property
    def scheme(self) -> ReinitScheme:
        return ReinitScheme.parse(self.reinit)

    @property
    def exploration(self) -> ExplorationPolicy:
        return ExplorationPolicy(self.policy, self.epsilon)

    @property
    def run_name(self) -> str:
        return "solve" if self.algorithm == "solve" else f"{self.algorithm}_{self.policy}"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(key: str, raw: str, where: str):
    kind = _FIELD_TYPES[key]
    try:
        if kind == "bool":
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if kind == "int":
            return int(raw)
        if kind == "float":
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError(raw)
            return value
        return raw
    except ValueError:
        raise ConfigError(f"{where}: {key}={raw!r} is not a valid {kind}") from None


def _validate(cfg: ExperimentConfig, where: dict[str, str]) -> None:
    def fail(key: str, msg: str):
        raise ConfigError(f"{where.get(key, 'default')}: {key}: {msg}")

    if cfg.example not in EXAMPLES:
        fail("example", f"must be one of {', '.join(EXAMPLES)}")
    if cfg.example == "file" and not cfg.model_file:
        fail("model_file", "required when example=file")
    if cfg.algorithm not in ALGORITHMS:
        fail("algorithm", f"must be one of {', '.join(ALGORITHMS)}")
    if cfg.policy not in LABELS:
        fail("policy", "must be one of eg, so, es")
    if cfg.k_states < 2:
        fail("k_states", "must be at least 2")
    if not 0.0 < cfg.rho < 1.0:
        fail("rho", "must lie in (0, 1)")
    if not 0.0 <= cfg.beta < 1.0:
        fail("beta", "must lie in [0, 1)")
    if not 0.0 <= cfg.epsilon <= 1.0:
        fail("epsilon", "must lie in [0, 1]")
    if not 0.0 < cfg.alpha <= 1.0:
        fail("alpha", "must lie in (0, 1]")
    if cfg.algorithm in INDEX_ALGORITHMS and not 0.0 <= cfg.gamma < cfg.alpha:
        key = "gamma" if "gamma" in where else "alpha"
        fail(key, f"timescale ordering requires 0 <= gamma < alpha (gamma={cfg.gamma}, alpha={cfg.alpha})")
    for key in ("k_max", "t_max", "group_size", "stride", "minibatch", "memory_size", "n_jobs"):
        if getattr(cfg, key) < 1:
            fail(key, "must be positive")
    if cfg.delta < 0 or cfg.stop_delta < 0:
        fail("delta" if cfg.delta < 0 else "stop_delta", "must be nonnegative")
    if not 0.0 < cfg.tau < 1.0:
        fail("tau", "must lie in (0, 1)")
    if cfg.soft_update not in ("retain", "polyak"):
        fail("soft_update", "must be retain or polyak")
    if cfg.memory_size < cfg.minibatch:
        fail("memory_size", "must be at least minibatch")
    try:
        cfg.scheme
    except ValueError as exc:
        fail("reinit", str(exc))


def build_config(pairs: list[tuple[str, str, str]]) -> ExperimentConfig:
    """Build a validated config from ``(key, raw_value, location)`` triples; later pairs win."""
    values, where = {}, {}
    for key, raw, loc in pairs:
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{loc}: unknown key {key!r}")
        values[key] = _coerce(key, raw, loc)
        where[key] = loc
    cfg = ExperimentConfig(**values)
    _validate(cfg, where)
    return cfg


def _pairs_from_text(text: str, source: str = "config") -> list[tuple[str, str, str]]:
    pairs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        for token in line.split():
            key, sep, raw = token.partition("=")
            if not sep or not key:
                raise ConfigError(f"{source} line {lineno}: expected key=value, got {token!r}")
            pairs.append((key.strip(), raw.strip(), f"{source} line {lineno}"))
    return pairs


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key=value`` text (whitespace- or newline-separated, ``#`` comments)."""
    return build_config(_pairs_from_text(text))


# ---------------------------------------------------------------------------
# running


def make_model(cfg: ExperimentConfig) -> envs.MdpModel:
    if cfg.example == "circular":
        return envs.make_circular()
    if cfg.example == "unstructured":
        return envs.make_unstructured()
    if cfg.example == "restart":
        return envs.make_restart()
    if cfg.example == "random_walk":
        return envs.make_random_walk(cfg.k_states, cfg.rho)
    return envs.load_model(cfg.model_file)


def oracle_indices(model: envs.MdpModel, beta: float) -> np.ndarray | None:
    """Exact indices, or ``None`` when some state has no index."""
    if np.array_equal(model.p0, model.p1):
        # identical dynamics: the action gap is r(s,1) - r(s,0) - lam
        return model.rewards[:, 1] - model.rewards[:, 0]
    try:
        return oracle.whittle_indices(model, beta)
    except oracle.NoRootError:
        return None


def _seed(cfg: ExperimentConfig) -> np.random.SeedSequence:
    return np.random.SeedSequence([cfg.seed, ALGORITHM_CODES[cfg.algorithm]])


def _num(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"refusing to write non-finite value {x!r}")
    return repr(float(x))


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_curve(path: Path, record: RunRecord, timing: bool) -> None:
    extras = list(record.extras)
    rows = []
    for i, (it, err, ms) in enumerate(record.curve):
        rows.append([it, _num(err), _num(ms if timing else 0.0), *(_num(record.extras[k][i]) for k in extras)])
    _write_csv(path, CURVE_HEADER + extras, rows)


def _write_index(path: Path, learned: np.ndarray | None, truth: np.ndarray | None, n: int) -> None:
    rows = []
    for s in range(n):
        rows.append([
            s,
            "" if learned is None else _num(learned[s]),
            "" if truth is None else _num(truth[s]),
        ])
    _write_csv(path, INDEX_HEADER, rows)


def _append_summary(path: Path, record: RunRecord, timing: bool) -> None:
    new = not path.exists()
    with path.open("a", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if new:
            writer.writerow(SUMMARY_HEADER)
        row = record.summary()
        writer.writerow([
            row["algorithm"], row["policy"], row["iterations"],
            _num(row["compute_time_min"] if timing else 0.0), _num(row["final_error"]),
        ])


def run_experiment(cfg: ExperimentConfig) -> dict[str, Path]:
    """Run one configured experiment and write its files into ``cfg.out_dir``."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model = make_model(cfg)
    name = cfg.run_name
    written = {"config": out / f"config_{name}.txt"}
    written["config"].write_text(cfg.to_text())

    if cfg.algorithm == "solve":
        truth = oracle_indices(model, cfg.beta)
        written["index"] = out / "index_solve.csv"
        _write_index(written["index"], None, truth, model.n_states)
        return written

    policy, scheme = cfg.exploration, cfg.scheme
    learned = truth = None
    if cfg.algorithm == "qlearn":
        v_star = oracle.value_iteration(model, cfg.beta).v
        record, _ = run_qlearning(
            model, policy, cfg.alpha, cfg.beta, cfg.t_max, np.random.default_rng(_seed(cfg)),
            scheme=scheme, probe=v_star, delta=cfg.stop_delta or None, stride=cfg.stride,
        )
    elif cfg.algorithm == "index_qlearn":
        truth = oracle_indices(model, cfg.beta)
        run = run_index_learning(
            model, policy, cfg.alpha, cfg.gamma, cfg.beta, cfg.k_max, cfg.t_max, cfg.delta,
            _seed(cfg), scheme, truth, cfg.n_jobs,
        )
        record, learned = run.record, run.lambdas
    elif cfg.algorithm == "index_fa":
        agg = Aggregation(model.n_states, cfg.group_size)
        truth = oracle_indices(model, cfg.beta)
        probe = None if truth is None else truth[agg.representatives]
        run = run_fa_index_learning(
            model, agg, policy, cfg.alpha, cfg.gamma, cfg.beta, cfg.k_max, cfg.t_max, cfg.delta,
            _seed(cfg), scheme, probe, cfg.n_jobs,
        )
        record, learned = run.record, expand(agg, run.lambdas)
    else:
        dqn = DqnConfig(
            net_stepsize=cfg.alpha, index_stepsize=cfg.gamma, beta=cfg.beta, tau=cfg.tau,
            minibatch=cfg.minibatch, memory_size=cfg.memory_size, t_max=cfg.t_max, k_max=cfg.k_max,
            delta=cfg.delta, soft_update=cfg.soft_update,
        )
        truth = oracle_indices(model, cfg.beta)
        run = run_dqn_index_learning(model, dqn, policy, _seed(cfg), scheme, truth)
        record, learned = run.record, run.lambdas

    written["curve"] = out / f"curve_{name}.csv"
    _write_curve(written["curve"], record, cfg.timing)
    if learned is not None:
        written["index"] = out / f"index_{name}.csv"
        _write_index(written["index"], learned, truth, model.n_states)
    written["summary"] = out / "summary.csv"
    _append_summary(written["summary"], record, cfg.timing)
    return written


# ---------------------------------------------------------------------------
# reporting


def _example_title(directory: Path) -> str:
    for path in sorted(directory.glob("config_*.txt")):
        try:
            cfg = parse_config(path.read_text())
        except ConfigError:
            continue
        if cfg.example == "random_walk":
            return f"Example of one-step random walk with K = {cfg.k_states}"
        if cfg.example == "file":
            return f"Model {Path(cfg.model_file).stem}"
        return EXAMPLE_TITLES[cfg.example]
    return directory.name


def _row_key(row: dict) -> tuple:
    alg = row["algorithm"]
    pol = row["policy"]
    return (
        ALGORITHM_ORDER.index(alg) if alg in ALGORITHM_ORDER else len(ALGORITHM_ORDER),
        POLICY_ORDER.index(pol) if pol in POLICY_ORDER else len(POLICY_ORDER),
    )


def report(out_dir: str | Path) -> str:
    """Aligned text table of every ``summary.csv`` under ``out_dir``, one block per example."""
    out_dir = Path(out_dir)
    files = sorted(out_dir.rglob("summary.csv"))
    blocks: dict[str, list[dict]] = defaultdict(list)
    for path in files:
        with path.open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        blocks[_example_title(path.parent)].extend(rows)
    if not any(blocks.values()):
        raise FileNotFoundError(f"no summary rows under {out_dir}")

    header = ["", "#Iterations", "Compute Time", "Error"]
    lines = []
    for title, rows in blocks.items():
        rows = sorted(rows, key=_row_key)
        table = [header] + [
            [
                f"{r['algorithm']} ({r['policy']})",
                r["iterations"],
                f"{float(r['compute_time_min']):.2f}",
                f"{float(r['final_error']):.3f}",
            ]
            for r in rows
        ]
        widths = [max(len(row[i]) for row in table) for i in range(len(header))]
        lines.append(title)
        for row in table:
            cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
            lines.append("  ".join(cells).rstrip())
        lines.append("")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# command line


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", help="key=value config file; flags override it")
    for f in fields(ExperimentConfig):
        if f.name == "algorithm":
            continue
        flag = "--" + f.name.replace("_", "-")
        if f.type == "bool":
            p.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction, default=None)
        else:
            p.add_argument(flag, dest=f.name, default=None, metavar=f.name.upper())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="whittlelearn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for algorithm in ALGORITHMS:
        p = sub.add_parser(algorithm.replace("_", "-"), help=f"run {algorithm}")
        _add_run_flags(p)
    rep = sub.add_parser("report", help="print summary tables")
    rep.add_argument("out_dir")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    pairs = []
    if args.config:
        pairs += _pairs_from_text(Path(args.config).read_text(), args.config)
    pairs.append(("algorithm", args.command.replace("-", "_"), "command line"))
    for f in fields(ExperimentConfig):
        value = getattr(args, f.name, None)
        if value is not None and f.name != "algorithm":
            pairs.append((f.name, _fmt(value) if isinstance(value, bool) else str(value), "command line"))
    return build_config(pairs)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "report":
        try:
            print(report(args.out_dir))
        except FileNotFoundError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        return 0
    try:
        cfg = config_from_args(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(cfg.echo())
    try:
        written = run_experiment(cfg)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for kind, path in written.items():
        print(f"{kind}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
