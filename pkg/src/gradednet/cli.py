"""Command line entry point: ``gen-data``, ``train``, ``check`` and ``experiment``.

Exit codes: 0 success (or equivariant for ``check``), 2 equivariance
violated, 1 configuration, I/O or training error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .equivariance import check_map_equivariance, check_swap_equivariance
from .experiments import (
    CONFIGS, CSV_HEADER, ConfigError, RunAborted, dataset_lines, epochs_to_improvement, format_table,
    generate, genus2_baseline, genus2_graded, read_jsonl, run_experiment, split_indices,
    susy_baseline, susy_graded, susy_weights, val_mse,
)
from .gmap import map_from_json
from .grading import PARITY, GradingSignature
from .network import GradedLayer, GradedNetwork, TrainingDiverged, build_network, train
from .norms import LossWeights


class CliError(Exception):
    pass


# -- io helpers ----------------------------------------------------------------------

def load_json(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise CliError(f"{path}: top level must be a JSON object")
    return obj


def write_atomic(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def config_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def provenance(cfg_obj: dict, seeds) -> dict:
    return {"tool": "gradednet", "version": __version__, "config_sha256": config_hash(cfg_obj),
            "seeds": list(seeds)}


def header_lines(prov: dict, cfg_obj: dict) -> list:
    return [f"# tool: gradednet {prov['version']}",
            f"# config_sha256: {prov['config_sha256']}",
            f"# seeds: {','.join(map(str, prov['seeds']))}",
            f"# config: {json.dumps(cfg_obj, sort_keys=True)}"]


def parse_seeds(text: str) -> list:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise CliError(f"--seeds: expected comma separated integers, got {text!r}") from exc
    if not seeds:
        raise CliError("--seeds: empty seed list")
    return seeds


def experiment_config(obj: dict, name: str | None = None, extra=()):
    """Split a JSON config into the experiment name, its typed config and the remaining keys."""
    obj = dict(obj)
    kind = obj.pop("experiment", name)
    if name is not None and kind != name:
        raise ConfigError("experiment", f"config is for {kind!r}, command asked for {name!r}")
    if kind not in CONFIGS:
        raise ConfigError("experiment", f"must be one of {sorted(CONFIGS)}, got {kind!r}")
    rest = {k: obj.pop(k) for k in list(obj) if k in extra}
    try:
        cfg = CONFIGS[kind].from_json(obj)
    except TypeError as exc:
        raise ConfigError("config", str(exc)) from exc
    return kind, cfg, rest


def _say(args, msg):
    if not args.quiet:
        print(msg)


# -- commands ---------------------------------------------------------------------------

def cmd_gen_data(args) -> int:
    obj = load_json(args.config)
    kind, cfg, _ = experiment_config(obj)
    out = Path(args.out)
    if out.suffix != ".jsonl":
        out = out / "dataset.jsonl"
    data = generate(cfg)
    prov = provenance(obj, [cfg.seed])
    prov["experiment"] = kind
    text = "\n".join(dataset_lines(data, prov)) + "\n"
    write_atomic(out, text)
    digest = hashlib.sha256(text.encode()).hexdigest()
    _say(args, f"wrote {len(data)} rows to {out} (sha256 {digest})")
    return 0


TRAIN_EXTRA = ("model", "run_seed", "dataset", "layers", "loss_weights")


def _parse_plan(rest):
    plan = []
    for i, entry in enumerate(rest["layers"]):
        try:
            plan.append((GradingSignature.from_json(entry["codomain"]), entry.get("activation", "graded_relu"),
                         entry.get("map", "graded")))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"layers[{i}]", str(exc)) from exc
    return plan


def cmd_train(args) -> int:
    obj = load_json(args.config)
    kind, cfg, rest = experiment_config(obj, extra=TRAIN_EXTRA)
    seed = rest.get("run_seed", cfg.seed)
    if args.seeds:
        seed = parse_seeds(args.seeds)[0]
    model = rest.get("model", "graded")
    if model not in ("graded", "baseline"):
        raise ConfigError("model", f"must be 'graded' or 'baseline', got {model!r}")
    if "dataset" in rest:
        base = Path(args.config).parent
        data = read_jsonl(base / rest["dataset"])
    else:
        data = generate(cfg)
    x_sig, y_sig = data[0][0].sig, data[0][1].sig
    split_rng, g_rng, b_rng = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)]
    tr_idx, va_idx = split_indices(len(data), cfg.split, split_rng)
    if "layers" in rest:
        if model != "graded":
            raise ConfigError("layers", "a custom layer plan always builds a graded network")
        net = build_network(x_sig, _parse_plan(rest), g_rng, np.sqrt(0.1))
    elif kind == "genus2":
        net = genus2_graded(g_rng) if model == "graded" else genus2_baseline(b_rng)
    else:
        net = susy_graded(x_sig, g_rng) if model == "graded" else susy_baseline(x_sig, b_rng)
    if net.input_sig != x_sig or net.output_sig != y_sig:
        raise ConfigError("layers", f"network maps {net.input_sig} -> {net.output_sig} but data is "
                                    f"{x_sig} -> {y_sig}")
    if "loss_weights" in rest:
        weights = LossWeights(y_sig, rest["loss_weights"])
    elif kind == "susy":
        weights = susy_weights(cfg)
    else:
        weights = LossWeights.uniform(y_sig)
    tr = [data[i] for i in tr_idx]
    va = [data[i] for i in va_idx]
    try:
        res = train(net, tr, weights, cfg.eta, cfg.epochs)
    except TrainingDiverged as exc:
        raise CliError(f"training aborted (seed {seed}): {exc}") from exc
    prov = provenance(obj, [seed])
    out = Path(args.out)
    ckpt = res.net.to_json()
    ckpt["provenance"] = prov
    write_atomic(out / "checkpoint.json", dumps(ckpt))
    hist = header_lines(prov, obj) + ["epoch,loss"] + [f"{e + 1},{l!r}" for e, l in enumerate(res.history)]
    write_atomic(out / "history.csv", "\n".join(hist) + "\n")
    metrics = {"experiment": kind, "model": model, "seed": seed, "val_mse": val_mse(res.net, va),
               "params": res.net.parameter_count, "epochs": len(res.history),
               "final_train_loss": res.history[-1], "epochs_to_1pct": epochs_to_improvement(res.history),
               "provenance": prov}
    write_atomic(out / "metrics.json", dumps(metrics))
    _say(args, f"{kind}/{model} seed {seed}: val MSE {metrics['val_mse']:.6f}, "
               f"{metrics['params']} params, {len(res.history)} epochs -> {out}")
    return 0


def _load_target(obj: dict, base: Path):
    """A network, layer or bare map from a check config (or a checkpoint itself)."""
    if "checkpoint" in obj:
        return _load_target(load_json(base / obj["checkpoint"]), base)
    if "network" in obj:
        obj = obj["network"]
    if "layers" in obj:
        return GradedNetwork.from_json(obj)
    if "layer" in obj:
        return GradedLayer.from_json(obj["layer"])
    if "map" in obj:
        return map_from_json(obj["map"])
    raise ConfigError("checkpoint", "expected a checkpoint, 'network', 'layer' or 'map'")


def cmd_check(args) -> int:
    if args.checkpoint:
        obj, base = {"checkpoint": str(Path(args.checkpoint).resolve())}, Path(".")
    elif args.config:
        obj, base = load_json(args.config), Path(args.config).parent
    else:
        raise CliError("check needs --checkpoint or --config")
    try:
        target = _load_target(obj, base)
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"malformed checkpoint: {exc}") from exc
    opts = {k: obj[k] for k in ("lambdas", "tol", "seed") if k in obj}
    in_sig = target.input_sig if isinstance(target, GradedNetwork) else target.domain
    out_sig = target.output_sig if isinstance(target, GradedNetwork) else target.codomain
    if in_sig.variant == PARITY:
        if not isinstance(target, (GradedNetwork, GradedLayer)):
            raise CliError("swap check needs a layer or network")
        rep = check_swap_equivariance(target, tol=opts.get("tol", 0.0), seed=opts.get("seed", 0))
        report = {"check": "swap", **rep.to_json()}
        ok = rep.ok
        summary = f"{'equivariant' if ok else 'violated'} under the parity swap: " \
                  f"max violation {rep.max_violation:.3g}; {rep.diagnosis}"
    else:
        f = target if callable(target) else target.apply
        rep = check_map_equivariance(f, in_sig, out_sig, **opts)
        report = {"check": "scalar", **rep.to_json()}
        ok, summary = rep.ok, rep.summary()
    if args.out:
        write_atomic(Path(args.out) / "report.json", dumps(report))
    _say(args, summary)
    return 0 if ok else 2


def cmd_experiment(args) -> int:
    obj = load_json(args.config) if args.config else {}
    kind, cfg, rest = experiment_config(obj, args.name, extra=("seeds",))
    seeds = parse_seeds(args.seeds) if args.seeds else rest.get("seeds", [cfg.seed])
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("seeds", "must be a non-empty list of integers")
    effective = {"experiment": kind, **cfg.to_json(), "seeds": sorted(seeds)}
    try:
        graded, base, _ = run_experiment(kind, cfg, seeds, record_timing=args.record_timing)
    except RunAborted as exc:
        raise CliError(f"training aborted: {exc}") from exc
    prov = provenance(effective, sorted(seeds))
    out = Path(args.out)
    rows = header_lines(prov, effective) + [CSV_HEADER] + graded.csv_rows() + base.csv_rows()
    write_atomic(out / "metrics.csv", "\n".join(rows) + "\n")
    write_atomic(out / "summary.json", dumps({"provenance": prov, "config": effective,
                                              "records": [graded.to_json(), base.to_json()]}))
    table = format_table([graded, base])
    write_atomic(out / "table.txt", table + "\n")
    _say(args, table)
    return 0


# -- parser --------------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    # usage errors exit 1 so that 2 stays reserved for "violated"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gradednet", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"gradednet {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--out", required=out_required, help="output directory (or .jsonl path for gen-data)")
        sp.add_argument("--seeds", help="comma separated seeds, overrides the config")
        sp.add_argument("--quiet", action="store_true", help="suppress the human summary")

    g = sub.add_parser("gen-data", help="write a synthetic dataset as JSON lines")
    common(g)
    g.set_defaults(func=cmd_gen_data)
    t = sub.add_parser("train", help="train one network and write checkpoint, history and metrics")
    common(t)
    t.set_defaults(func=cmd_train)
    c = sub.add_parser("check", help="equivariance report for a checkpoint or map")
    common(c, out_required=False)
    c.add_argument("--checkpoint", help="network checkpoint JSON")
    c.set_defaults(func=cmd_check)
    e = sub.add_parser("experiment", help="graded vs dense comparison over seeds")
    e.add_argument("name", choices=sorted(CONFIGS))
    common(e)
    e.add_argument("--record-timing", action="store_true",
                   help="fill the seconds column (output is then no longer byte-reproducible)")
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in ("gen-data", "train") and not args.config:
        parser.error(f"{args.command} requires --config")
    try:
        return args.func(args)
    except (CliError, ConfigError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
