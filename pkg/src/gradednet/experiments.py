"""Synthetic datasets and end-to-end runs for the two case studies.

* genus-2: inputs on the grades (2, 4, 6, 10), target ``x_2 / x_10^(1/5)``, a
  4 -> 2 -> 1 graded network against a dense network of the same widths.
* SUSY oscillator: parity-graded wavefunctions on a 100-point grid, a
  two-layer block-diagonal network against a dense 200 x 200 network.

The dataset depends only on the config seed.  Each run seed draws its own
train/validation split and initialisations; both arms of a comparison share
the split.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .grading import Grade, GradingSignature
from .gspace import GradedVector
from .network import (
    ActivationKind, DenseBaseline, GradedNetwork, TrainingDiverged, build_network, train,
)
from .norms import LossWeights

INIT_VARIANCE = 0.1
INIT_STD = math.sqrt(INIT_VARIANCE)

GENUS2_GRADES = (2, 4, 6, 10)
GENUS2_IN = GradingSignature.of(*GENUS2_GRADES)
GENUS2_HIDDEN = GradingSignature.of(2, 4)
GENUS2_OUT = GradingSignature.of(1)


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class RunAborted(RuntimeError):
    def __init__(self, experiment: str, model: str, seed: int, cause: Exception):
        super().__init__(f"{experiment}/{model} seed {seed}: {cause}")
        self.seed, self.cause = seed, cause


def _check_int(name, v, lo):
    if isinstance(v, bool) or not isinstance(v, int) or v < lo:
        raise ConfigError(name, f"must be an integer >= {lo}, got {v!r}")


def _check_pos(name, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not (math.isfinite(v) and v > 0):
        raise ConfigError(name, f"must be a positive number, got {v!r}")


@dataclass(frozen=True)
class _Config:
    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict):
        known = {f.name for f in fields(cls)}
        extra = sorted(set(obj) - known)
        if extra:
            raise ConfigError(extra[0], f"unknown field for {cls.__name__}")
        return cls(**obj)

    def sha256(self) -> str:
        return hashlib.sha256(json.dumps(self.to_json(), sort_keys=True).encode()).hexdigest()


@dataclass(frozen=True)
class Genus2Config(_Config):
    n_samples: int = 1000
    seed: int = 0
    x10_floor: float = 1e-3
    split: float = 0.8
    epochs: int = 100
    eta: float = 0.01

    def __post_init__(self):
        _check_int("n_samples", self.n_samples, 2)
        _check_int("seed", self.seed, 0)
        _check_pos("x10_floor", self.x10_floor)
        if isinstance(self.split, bool) or not isinstance(self.split, (int, float)) or not 0 < self.split < 1:
            raise ConfigError("split", f"must lie strictly between 0 and 1, got {self.split!r}")
        _check_int("epochs", self.epochs, 1)
        _check_pos("eta", self.eta)


@dataclass(frozen=True)
class SusyConfig(_Config):
    n_samples: int = 500
    seed: int = 0
    grid_min: float = -5.0
    grid_max: float = 5.0
    grid_points: int = 100
    w0: float = 2.0
    w1: float = 1.0
    split: float = 0.8
    epochs: int = 100
    eta: float = 0.01

    def __post_init__(self):
        _check_int("n_samples", self.n_samples, 2)
        _check_int("seed", self.seed, 0)
        _check_int("grid_points", self.grid_points, 2)
        if not self.grid_max > self.grid_min:
            raise ConfigError("grid_max", f"must exceed grid_min={self.grid_min}")
        _check_pos("w0", self.w0)
        _check_pos("w1", self.w1)
        if isinstance(self.split, bool) or not isinstance(self.split, (int, float)) or not 0 < self.split < 1:
            raise ConfigError("split", f"must lie strictly between 0 and 1, got {self.split!r}")
        _check_int("epochs", self.epochs, 1)
        _check_pos("eta", self.eta)

    @property
    def grid(self) -> np.ndarray:
        g = np.linspace(self.grid_min, self.grid_max, self.grid_points)
        if self.grid_min == -self.grid_max:
            g = 0.5 * (g - g[::-1])     # exactly symmetric, so parity checks on the grid are exact
        return g

    @property
    def spacing(self) -> float:
        return (self.grid_max - self.grid_min) / (self.grid_points - 1)

    @property
    def signature(self) -> GradingSignature:
        return GradingSignature.parity(self.grid_points, self.grid_points)


CONFIGS = {"genus2": Genus2Config, "susy": SusyConfig}


# -- data ------------------------------------------------------------------------

def genus2_target(x2: float, x10: float) -> float:
    return x2 / x10 ** 0.2


def gen_genus2(cfg: Genus2Config) -> list:
    """Samples ``x_q ~ N(0, 1/q)``; ``x_10`` is redrawn until it is at least the floor."""
    rng = np.random.default_rng(cfg.seed)
    std = np.sqrt(1.0 / np.array(GENUS2_GRADES, dtype=float))
    X = rng.standard_normal((cfg.n_samples, 4)) * std
    low = X[:, 3] < cfg.x10_floor
    while low.any():
        X[low, 3] = rng.standard_normal(int(low.sum())) * std[3]
        low = X[:, 3] < cfg.x10_floor
    y = X[:, 0] / X[:, 3] ** 0.2
    return [(GradedVector.from_flat(GENUS2_IN, X[i]), GradedVector(GENUS2_OUT, [[y[i]]]))
            for i in range(cfg.n_samples)]


def _positive_normal(rng, mean, std, n):
    out = rng.normal(mean, std, n)
    bad = out <= 0
    while bad.any():
        out[bad] = rng.normal(mean, std, int(bad.sum()))
        bad = out <= 0
    return out


def even_profile(grid, a):
    return np.exp(-a * grid ** 2)


def odd_profile(grid, amp, a):
    return amp * grid * np.exp(-a * grid ** 2)


def susy_truth(grid) -> tuple:
    """Ground states with unit constants: ``exp(-x^2/2)`` and ``x exp(-x^2/2)``."""
    return np.exp(-grid ** 2 / 2), grid * np.exp(-grid ** 2 / 2)


def gen_susy(cfg: SusyConfig) -> list:
    """Even inputs ``exp(-a x^2)``, odd inputs ``c x exp(-a' x^2)``; targets are the fixed ground states.

    ``a ~ N(1, 0.1)``, ``c, a' ~ N(0.8, 0.1)`` (second argument a variance);
    decay rates are redrawn until positive.
    """
    rng = np.random.default_rng(cfg.seed)
    n, grid, sig = cfg.n_samples, cfg.grid, cfg.signature
    s = math.sqrt(0.1)
    a = _positive_normal(rng, 1.0, s, n)
    amp = rng.normal(0.8, s, n)
    a1 = _positive_normal(rng, 0.8, s, n)
    y0, y1 = susy_truth(grid)
    e, o = Grade.parity(0), Grade.parity(1)
    truth = GradedVector(sig, {e: y0, o: y1})
    return [(GradedVector(sig, {e: even_profile(grid, a[i]), o: odd_profile(grid, amp[i], a1[i])}), truth)
            for i in range(n)]


def generate(cfg):
    return gen_genus2(cfg) if isinstance(cfg, Genus2Config) else gen_susy(cfg)


def dataset_lines(data, provenance: dict | None = None) -> list:
    lines = []
    for i, (x, y) in enumerate(data):
        rec = {"x": x.to_json(), "y": y.to_json()}
        if i == 0 and provenance is not None:
            rec["provenance"] = provenance
        lines.append(json.dumps(rec, sort_keys=True))
    return lines


def read_jsonl(path) -> list:
    data = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                data.append((GradedVector.from_json(rec["x"]), GradedVector.from_json(rec["y"])))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad dataset record ({exc})") from exc
    return data


# -- models ------------------------------------------------------------------------

def genus2_graded(rng) -> GradedNetwork:
    plan = [(GENUS2_HIDDEN, ActivationKind.GRADED_RELU, "graded"),
            (GENUS2_OUT, ActivationKind.STANDARD_RELU, "readout")]
    return build_network(GENUS2_IN, plan, rng, INIT_STD)


def genus2_baseline(rng) -> DenseBaseline:
    return DenseBaseline.random([4, 2, 1], GENUS2_IN, GENUS2_OUT, rng, INIT_STD)


def susy_graded(sig: GradingSignature, rng) -> GradedNetwork:
    plan = [(sig, ActivationKind.STANDARD_RELU, "graded")] * 2
    return build_network(sig, plan, rng, INIT_STD)


def susy_baseline(sig: GradingSignature, rng) -> DenseBaseline:
    n = sig.total_dim
    return DenseBaseline.random([n, n, n], sig, sig, rng, INIT_STD)


def susy_weights(cfg: SusyConfig) -> LossWeights:
    """Riemann-sum quadrature of the two integrals: ``w_j * h`` per grid point."""
    h = cfg.spacing
    return LossWeights(cfg.signature, {Grade.parity(0): cfg.w0 * h, Grade.parity(1): cfg.w1 * h})


# -- metrics ------------------------------------------------------------------------

def val_mse(net: GradedNetwork, data) -> float:
    """Unweighted mean squared error over samples and output coordinates."""
    sq = [np.mean((net(x).flat() - y.flat()) ** 2) for x, y in data]
    return float(np.mean(sq))


def epochs_to_improvement(history, threshold: float = 0.01) -> int:
    """First epoch (1-based) whose relative loss improvement over the previous epoch is below ``threshold``.

    Returns ``len(history)`` when every epoch still improves by at least that much.
    """
    for e in range(1, len(history)):
        prev = history[e - 1]
        rel = (prev - history[e]) / prev if prev > 0 else 0.0
        if rel < threshold:
            return e + 1
    return len(history)


@dataclass
class MetricsRecord:
    experiment: str
    model: str
    params: int
    seeds: list = field(default_factory=list)
    val_mse: list = field(default_factory=list)
    epochs_to_1pct: list = field(default_factory=list)
    seconds: list = field(default_factory=list)     # None entries unless timing was requested

    def __post_init__(self):
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError(f"duplicate seeds {self.seeds}")
        if any(m < 0 for m in self.val_mse):
            raise ValueError("negative MSE")

    @property
    def mean(self) -> float:
        return float(np.mean(self.val_mse))

    @property
    def std(self) -> float:
        return float(np.std(self.val_mse))     # population std, 0 for a single seed

    @property
    def median(self) -> float:
        return float(np.median(self.val_mse))

    def to_json(self) -> dict:
        return {"experiment": self.experiment, "model": self.model, "params": self.params,
                "seeds": self.seeds, "val_mse": self.val_mse, "epochs_to_1pct": self.epochs_to_1pct,
                "seconds": self.seconds, "mean": self.mean, "std": self.std, "median": self.median}

    def csv_rows(self) -> list:
        rows = []
        for s, m, t in zip(self.seeds, self.val_mse, self.seconds):
            rows.append(f"{self.experiment},{self.model},{s},{m!r},{self.params},"
                        f"{'' if t is None else f'{t:.3f}'}")
        return rows


CSV_HEADER = "experiment,model,seed,val_mse,params,seconds"


def format_table(records) -> str:
    head = f"{'experiment':<11}{'model':<10}{'val MSE (mean ± std)':<26}{'median':<12}{'params':>8}  {'epochs to 1%':>12}"
    lines = [head, "-" * len(head)]
    for r in records:
        ep = float(np.mean(r.epochs_to_1pct)) if r.epochs_to_1pct else float("nan")
        lines.append(f"{r.experiment:<11}{r.model:<10}{f'{r.mean:.4f} ± {r.std:.4f}':<26}"
                     f"{r.median:<12.4f}{r.params:>8}  {ep:>12.1f}")
    return "\n".join(lines)


# -- runners ------------------------------------------------------------------------

def split_indices(n: int, frac: float, rng) -> tuple:
    perm = rng.permutation(n)
    k = int(round(frac * n))
    k = min(max(k, 1), n - 1)
    return perm[:k], perm[k:]


@dataclass
class SeedResult:
    seed: int
    model: str
    val_mse: float
    params: int
    epochs_to_1pct: int
    history: list
    seconds: float | None
    net: GradedNetwork


def _run_seed(name, cfg, data, builders, weights, seed, record_timing) -> list:
    split_rng, *init_rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)]
    tr_idx, va_idx = split_indices(len(data), cfg.split, split_rng)
    tr = [data[i] for i in tr_idx]
    va = [data[i] for i in va_idx]
    out = []
    for (model, build), rng in zip(builders, init_rngs):
        net = build(rng)
        t0 = time.perf_counter()
        try:
            res = train(net, tr, weights, cfg.eta, cfg.epochs)
        except TrainingDiverged as exc:
            raise RunAborted(name, model, seed, exc) from exc
        dt = time.perf_counter() - t0
        out.append(SeedResult(seed, model, val_mse(res.net, va), net.parameter_count,
                              epochs_to_improvement(res.history), res.history,
                              dt if record_timing else None, res.net))
    return out


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("GRADEDNET_THREADS", "1")))
    except ValueError:
        return 1


def run_experiment(name: str, cfg, seeds, data=None, record_timing: bool = False,
                   threads: int | None = None) -> tuple:
    """Train both arms for each seed; returns ``(graded record, baseline record, seed results)``."""
    seeds = sorted(int(s) for s in seeds)
    if not seeds:
        raise ConfigError("seeds", "at least one seed is required")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds", f"duplicate seeds in {seeds}")
    data = generate(cfg) if data is None else data
    if name == "genus2":
        builders = [("graded", genus2_graded), ("baseline", genus2_baseline)]
        weights = LossWeights.uniform(GENUS2_OUT)
    elif name == "susy":
        sig = cfg.signature
        builders = [("graded", lambda r: susy_graded(sig, r)), ("baseline", lambda r: susy_baseline(sig, r))]
        weights = susy_weights(cfg)
    else:
        raise ConfigError("experiment", f"unknown experiment {name!r}")
    job = lambda s: _run_seed(name, cfg, data, builders, weights, s, record_timing)
    threads = thread_count() if threads is None else threads
    if threads > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(seeds))) as ex:
            per_seed = list(ex.map(job, seeds))
    else:
        per_seed = [job(s) for s in seeds]
    results = sorted((r for rs in per_seed for r in rs), key=lambda r: (r.seed, r.model != "graded"))
    recs = []
    for model in ("graded", "baseline"):
        rs = [r for r in results if r.model == model]
        recs.append(MetricsRecord(name, model, rs[0].params, [r.seed for r in rs], [r.val_mse for r in rs],
                                  [r.epochs_to_1pct for r in rs], [r.seconds for r in rs]))
    return recs[0], recs[1], results


def run_genus2(cfg: Genus2Config, seeds, **kw) -> tuple:
    g, b, _ = run_experiment("genus2", cfg, seeds, **kw)
    return g, b


def run_susy(cfg: SusyConfig, seeds, **kw) -> tuple:
    g, b, _ = run_experiment("susy", cfg, seeds, **kw)
    return g, b
