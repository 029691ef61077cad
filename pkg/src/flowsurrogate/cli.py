"""Operator command line: dataset synthesis, training, evaluation, headless
exploration, prediction, reverse prediction, and serving.

Every artifact-producing command writes a run manifest (command, effective
config, seed, inputs/outputs, version, duration) next to its main output; a
re-run from the manifest's snapshot reproduces the artifact bit for bit.

Exit codes: 0 success, 1 validation/config problems, 2 runtime or numeric
failures.
"""

from __future__ import annotations

import argparse
import json
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .autoencoder import AEConfig, encode_batch, load_ae, save_ae, train_ae
from .checkpoint import file_sha256
from .data import FieldGrid, load_dataset
from .errors import (
    ConfigError,
    DomainError,
    FlowSurrogateError,
    ShapeError,
    UsageError,
)
from .explorer import FitnessWeights, GAConfig, lineage_to_doc, make_preference, optimize
from .flow import FlowTrainConfig, load_flow, save_flow, train_flow
from .metrics import evaluate_models
from .surrogate import denormalize, normalize, predict_and_quantify, reverse_predict
from .synth import SynthConfig, make_dataset

DEFAULTS = {
    "latent_dim": 64,       # autoencoder latent size
    "ae_hidden": "256,256",
    "ae_epochs": 400,
    "flow_hidden": "64,64",
    "flow_epochs": 400,
    "k1": 4,                # conditional flow blocks
    "k2": 4,                # unconditional flow blocks
    "alpha": 1.0,           # condition-recovery loss weight
    "lr": 1e-4,
    "batch_size": 32,
    "n_samples": 20,        # sampled draws for prediction with uncertainty
    "population": 40,
    "generations": 30,
    "mutation_rate": 0.2,
    "mutation_sigma": 0.1,
    "k_nearest": 5,
    "elite_count": 1,
    "uq_samples": 8,        # latent fast-path draws per GA candidate
    "k_clusters": 3,
    "resolution": "16,16,16",
    "n_params": 4,
    "train_count": 128,
    "test_count": 20,
    "seed": 0,
}


class CliParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(1)


def version_string() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"flowsurrogate-{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return f"flowsurrogate-{__version__}"


def write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    tmp.replace(path)


def write_manifest(artifact: Path, command: str, config: dict, seed,
                   inputs: dict, outputs: list, started: float) -> None:
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": inputs,
        "outputs": [str(o) for o in outputs],
        "version": version_string(),
        "duration_s": round(time.monotonic() - started, 3),
    }
    write_json(Path(str(artifact) + ".manifest.json"), manifest)


class Settings:
    """Config-file values overridden by explicit flags, with shared defaults."""

    def __init__(self, args: argparse.Namespace):
        self.doc = {}
        if getattr(args, "config", None):
            path = Path(args.config)
            if not path.exists():
                raise ConfigError(f"config file not found: {path}")
            self.doc = json.loads(path.read_text())
            if not isinstance(self.doc, dict):
                raise ConfigError("config file must hold a JSON object")
        self.args = args

    def get(self, key: str, cast=None):
        flag = getattr(self.args, key.replace("-", "_"), None)
        if flag is not None:
            value = flag
        elif key in self.doc:
            value = self.doc[key]
        else:
            value = DEFAULTS[key]
        return cast(value) if cast is not None else value

    def snapshot(self, keys: list[str]) -> dict:
        return {k: self.get(k) for k in keys}


def parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in str(text).split(","))


def parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in str(text).split(","))


# --- subcommands --------------------------------------------------------------

def cmd_synth(args) -> int:
    started = time.monotonic()
    s = Settings(args)
    seed = s.get("seed", int)
    cfg = SynthConfig(
        resolution=parse_ints(s.get("resolution")),
        n_params=s.get("n_params", int),
        seed=seed,
        train_count=s.get("train_count", int),
        test_count=s.get("test_count", int),
    )
    out = Path(args.out)
    make_dataset(cfg, out)
    keys = ["resolution", "n_params", "train_count", "test_count"]
    write_manifest(out.with_suffix(".json"), "synth", s.snapshot(keys), seed,
                   {}, [out.with_suffix(".json"), out.with_suffix(".bin")], started)
    print(f"dataset written to {out.with_suffix('.json')}")
    return 0


def cmd_train_ae(args) -> int:
    started = time.monotonic()
    s = Settings(args)
    seed = s.get("seed", int)
    dataset = load_dataset(args.dataset)
    cfg = AEConfig(
        latent_dim=s.get("latent_dim", int),
        hidden=parse_ints(s.get("ae_hidden")),
        epochs=s.get("ae_epochs", int),
        batch_size=s.get("batch_size", int),
        lr=s.get("lr", float),
    )
    model, log = train_ae(dataset, cfg, seed=seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_ae(out, model)
    write_json(Path(str(out) + ".losses.json"),
               {"epochs": log.epochs, "loss": log.losses})
    keys = ["latent_dim", "ae_hidden", "ae_epochs", "batch_size", "lr"]
    write_manifest(out, "train-ae", s.snapshot(keys), seed,
                   {"dataset": str(args.dataset)}, [out], started)
    print(f"autoencoder checkpoint written to {out} "
          f"(final loss {log.losses[-1]:.6g})")
    return 0


def cmd_train_flow(args) -> int:
    started = time.monotonic()
    s = Settings(args)
    seed = s.get("seed", int)
    dataset = load_dataset(args.dataset)
    ae_path = Path(args.ae)
    ae = load_ae(ae_path)
    train_idx = dataset.indices("train")
    latents = encode_batch(ae, dataset.fields[train_idx])
    conds = np.array([normalize(dataset.space, dataset.params[i]) for i in train_idx])
    cfg = FlowTrainConfig(
        k1=s.get("k1", int),
        k2=s.get("k2", int),
        hidden=parse_ints(s.get("flow_hidden")),
        alpha=s.get("alpha", float),
        epochs=s.get("flow_epochs", int),
        batch_size=s.get("batch_size", int),
        lr=s.get("lr", float),
    )
    model, log = train_flow(latents, conds, cfg, seed=seed)
    model.ae_ref = {"name": ae_path.name, "sha256": file_sha256(ae_path)}
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_flow(out, model)
    write_json(Path(str(out) + ".losses.json"),
               {"epochs": log.epochs, "loss": log.losses,
                "nll": log.extra["nll"], "cond": log.extra["cond"]})
    keys = ["k1", "k2", "flow_hidden", "alpha", "flow_epochs", "batch_size", "lr"]
    write_manifest(out, "train-flow", s.snapshot(keys), seed,
                   {"dataset": str(args.dataset), "ae": str(args.ae)}, [out], started)
    print(f"flow checkpoint written to {out} (final nll {log.extra['nll'][-1]:.4f}, "
          f"cond {log.extra['cond'][-1]:.4f})")
    return 0


def cmd_eval(args) -> int:
    started = time.monotonic()
    s = Settings(args)
    seed = s.get("seed", int)
    dataset = load_dataset(args.dataset)
    ae = load_ae(args.ae)
    flow = load_flow(args.flow) if args.flow else None
    report = evaluate_models(dataset, ae, flow, n_samples=s.get("n_samples", int),
                             seed=seed, split=args.split)
    out = Path(args.out)
    write_json(out, report)
    inputs = {"dataset": str(args.dataset), "ae": str(args.ae)}
    if args.flow:
        inputs["flow"] = str(args.flow)
    write_manifest(out, "eval", {"n_samples": s.get("n_samples"), "split": args.split},
                   seed, inputs, [out], started)
    for key, value in report["aggregate"].items():
        print(f"{key}: {value}")
    return 0


def load_preferences(path: str, flow, space, pref_seed: int):
    """Preference latents always use the shared default sample count, so a
    headless run and a service session with matching seeds agree exactly."""
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, list) or not doc:
        raise ConfigError("preferences file must be a non-empty JSON array")
    prefs = []
    for entry in doc:
        prefs.append(make_preference(flow, space, entry["params"], entry["score"],
                                     seed=pref_seed))
    return prefs


def cmd_explore(args) -> int:
    started = time.monotonic()
    s = Settings(args)
    seed = s.get("seed", int)
    dataset = load_dataset(args.dataset)
    flow = load_flow(args.flow)
    weights = FitnessWeights(*parse_floats(args.weights))
    uq_samples = s.get("uq_samples", int)
    prefs = load_preferences(args.prefs, flow, dataset.space, pref_seed=args.pref_seed)
    cfg = GAConfig(
        population=s.get("population", int),
        generations=s.get("generations", int),
        mutation_rate=s.get("mutation_rate", float),
        mutation_sigma=s.get("mutation_sigma", float),
        k_nearest=s.get("k_nearest", int),
        elite_count=s.get("elite_count", int),
        uq_samples=uq_samples,
        seed=seed,
    )
    records = optimize(cfg, prefs, weights, flow)
    doc = lineage_to_doc(records, dataset.space)
    doc["config"] = {"population": cfg.population, "generations": cfg.generations,
                     "mutation_rate": cfg.mutation_rate, "mutation_sigma": cfg.mutation_sigma,
                     "k_nearest": cfg.k_nearest, "elite_count": cfg.elite_count,
                     "uq_samples": cfg.uq_samples, "seed": cfg.seed}
    out = Path(args.out)
    write_json(out, doc)
    keys = ["population", "generations", "mutation_rate", "mutation_sigma",
            "k_nearest", "elite_count", "uq_samples"]
    config = s.snapshot(keys)
    config["pref_seed"] = args.pref_seed
    config["weights"] = list(parse_floats(args.weights))
    write_manifest(out, "explore", config, seed,
                   {"dataset": str(args.dataset), "flow": str(args.flow),
                    "prefs": str(args.prefs)}, [out], started)
    best = max(records[-1].candidates, key=lambda c: c.fitness)
    print(f"lineage written to {out} (best fitness {best.fitness:.4f})")
    return 0


def cmd_predict(args) -> int:
    started = time.monotonic()
    s = Settings(args)
    seed = s.get("seed", int)
    dataset = load_dataset(args.dataset)
    ae = load_ae(args.ae)
    flow = load_flow(args.flow)
    raw = np.array(parse_floats(args.params))
    params = normalize(dataset.space, raw)
    n = s.get("n_samples", int)
    result = predict_and_quantify(flow, ae, params, n, seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    mean_path = Path(str(out) + ".mean.bin")
    var_path = Path(str(out) + ".var.bin")
    result.mean_field.values.astype("<f4").tofile(mean_path)
    result.var_field.values.astype("<f4").tofile(var_path)
    meta_path = Path(str(out) + ".json")
    write_json(meta_path, {
        "params_raw": [float(v) for v in raw],
        "params_normalized": [float(v) for v in params],
        "n_samples": n,
        "seed": seed,
        "dims": list(ae.dims),
        "mean_file": mean_path.name,
        "var_file": var_path.name,
        "mean_uncertainty": float(result.var_field.values.mean()),
        "latent_uncertainty": float(result.var_latent.mean()),
    })
    write_manifest(meta_path, "predict",
                   {"params": list(map(float, raw)), "n_samples": n}, seed,
                   {"dataset": str(args.dataset), "ae": str(args.ae),
                    "flow": str(args.flow)},
                   [meta_path, mean_path, var_path], started)
    print(f"prediction written to {meta_path}")
    return 0


def cmd_reverse(args) -> int:
    started = time.monotonic()
    s = Settings(args)
    dataset = load_dataset(args.dataset)
    ae = load_ae(args.ae)
    flow = load_flow(args.flow)
    field_path = Path(args.field)
    if not field_path.exists():
        raise ConfigError(f"field file not found: {field_path}")
    values = np.fromfile(field_path, dtype="<f4").astype(np.float64)
    d, h, w = dataset.dims
    if values.size != d * h * w:
        raise ShapeError(f"field file has {values.size} values, expected {d * h * w}")
    field = FieldGrid(dataset.dims, values, dataset.value_range)
    params = reverse_predict(flow, ae, field)
    doc = {
        "params_normalized": [float(v) for v in params],
        "params_raw": [float(v) for v in denormalize(dataset.space, params)],
    }
    out = Path(args.out)
    write_json(out, doc)
    write_manifest(out, "reverse", {}, s.get("seed", int),
                   {"dataset": str(args.dataset), "ae": str(args.ae),
                    "flow": str(args.flow), "field": str(args.field)}, [out], started)
    print(json.dumps(doc))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(Path(args.workspace), Path(args.state_dir))
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> CliParser:
    parser = CliParser(prog="flowsurrogate",
                       description="flow-based surrogate modeling and parameter exploration")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override its keys")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("synth", help="generate a synthetic dataset file pair")
    common(p)
    p.add_argument("--out", required=True, help="output path stem (no extension)")
    p.add_argument("--resolution", default=None, help="D,H,W")
    p.add_argument("--n-params", type=int, default=None)
    p.add_argument("--train-count", type=int, default=None)
    p.add_argument("--test-count", type=int, default=None)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("train-ae", help="train the autoencoder")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--latent-dim", type=int, default=None)
    p.add_argument("--ae-hidden", default=None, help="comma-separated widths")
    p.add_argument("--ae-epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.set_defaults(fn=cmd_train_ae)

    p = sub.add_parser("train-flow", help="train the conditional flow on AE latents")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--ae", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k1", type=int, default=None)
    p.add_argument("--k2", type=int, default=None)
    p.add_argument("--flow-hidden", default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--flow-epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.set_defaults(fn=cmd_train_flow)

    p = sub.add_parser("eval", help="metrics report for AE and flow on a split")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--ae", required=True)
    p.add_argument("--flow", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--n-samples", type=int, default=None)
    p.add_argument("--split", default="test")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("explore", help="headless GA exploration run")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--flow", required=True)
    p.add_argument("--prefs", required=True, help="JSON [{params, score}, ...]")
    p.add_argument("--weights", required=True, help="w1,w2,w3")
    p.add_argument("--out", required=True)
    p.add_argument("--pref-seed", type=int, default=0,
                   help="seed for cached preference latents")
    p.add_argument("--population", type=int, default=None)
    p.add_argument("--generations", type=int, default=None)
    p.add_argument("--mutation-rate", type=float, default=None)
    p.add_argument("--mutation-sigma", type=float, default=None)
    p.add_argument("--k-nearest", type=int, default=None)
    p.add_argument("--elite-count", type=int, default=None)
    p.add_argument("--uq-samples", type=int, default=None)
    p.set_defaults(fn=cmd_explore)

    p = sub.add_parser("predict", help="sampled prediction with uncertainty for one parameter set")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--ae", required=True)
    p.add_argument("--flow", required=True)
    p.add_argument("--params", required=True, help="raw values v1,v2,...")
    p.add_argument("--out", required=True, help="output path stem")
    p.add_argument("--n-samples", type=int, default=None)
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("reverse", help="predict parameters for a field file")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--ae", required=True)
    p.add_argument("--flow", required=True)
    p.add_argument("--field", required=True, help="little-endian float32 blob")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_reverse)

    p = sub.add_parser("serve", help="run the HTTP exploration service")
    p.add_argument("--workspace", required=True, help="directory with datasets and checkpoints")
    p.add_argument("--state-dir", required=True, help="directory for session persistence")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8360)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, DomainError, UsageError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FlowSurrogateError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # unexpected: still exit 2, never a traceback dump
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
