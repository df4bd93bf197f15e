import argparse
import copy
import logging
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Tuple

import pandas as pd

from ..config import RunConfig, dump_config, load_run_config
from ..data.bundle import DatasetBundle, load_bundle
from ..distill.types import ABLATIONS, Method
from ..evaluation.metrics import evaluate_peers
from ..training.checkpoint import load_peers
from ..training.trainer import run_training, select_peer_for_eval

# (variant name, distill overrides)
ABLATION_VARIANTS: List[Tuple[str, Dict[str, object]]] = [("full", {})] + [(name, {name: True}) for name in ABLATIONS]
BASELINE_VARIANTS: List[Tuple[str, Dict[str, object]]] = [
    ("dkd", {"method": "dkd"}),
    ("dml", {"method": "dml"}),
    ("ce", {"method": "none", "peers": 1}),
]


def add_override_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="run config YAML")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--peers", type=int, help="number of peers K")
    parser.add_argument("--method", choices=[method.value for method in Method])
    for name in ABLATIONS:
        parser.add_argument(f"--{name.replace('_', '-')}", dest=name, action="store_true")


def apply_overrides(config: RunConfig, args: argparse.Namespace) -> Dict[str, object]:
    """Fold command-line flags into the config; returns what was overridden."""
    applied: Dict[str, object] = {}
    if getattr(args, "seed", None) is not None:
        config.trainer.seed = applied["seed"] = args.seed
    if getattr(args, "epochs", None) is not None:
        config.trainer.epochs = applied["epochs"] = args.epochs
    if getattr(args, "peers", None) is not None:
        config.distill.peers = applied["peers"] = args.peers
        if config.peers and len(config.peers) != args.peers:
            config.peers = []
    if getattr(args, "method", None) is not None:
        config.distill.method = applied["method"] = args.method
    for name in ABLATIONS:
        if getattr(args, name, False):
            setattr(config.distill, name, True)
            applied[name] = True
    config.validate()
    return applied


class TrainingCommands:
    """train: one K-peer run. ablate: the full model against its ablations (and optional baselines)."""

    def __init__(self, app) -> None:
        self.app = app
        self.log = logging.getLogger("crimedistill.commands.training")

    def register(self) -> None:
        train = self.app.add_command("train", "Train K peers with curriculum mutual distillation.", self.train)
        train.add_argument("bundle", type=Path, help="dataset bundle directory")
        train.add_argument("--run-dir", type=Path, help="output directory (default: under CRIMEDISTILL_RUNS_DIR)")
        train.add_argument("--resume", action="store_true", help="continue from the last checkpoint in --run-dir")
        add_override_arguments(train)

        ablate = self.app.add_command("ablate", "Run the full model and each ablation, then compare.", self.ablate)
        ablate.add_argument("bundle", type=Path, help="dataset bundle directory")
        ablate.add_argument("--run-dir", type=Path, help="output directory (default: under CRIMEDISTILL_RUNS_DIR)")
        ablate.add_argument("--seeds", type=int, nargs="+", help="one run per seed and variant")
        ablate.add_argument("--baselines", action="store_true", help="add DKD, DML and single-peer CE rows")
        add_override_arguments(ablate)

    def _trainer_config(self, config: RunConfig):
        return replace(config.trainer_config(), device=self.app.device, progress=self.app.progress)

    def train_once(self, bundle: DatasetBundle, config: RunConfig, run_dir: Path, resume: bool = False, extra=None):
        dump_config(config, run_dir, extra=extra)
        return run_training(bundle, self._trainer_config(config), run_dir, resume=resume)

    def train(self, args: argparse.Namespace) -> None:
        config = load_run_config(args.config)
        applied = apply_overrides(config, args)
        bundle = load_bundle(args.bundle)
        run_dir = args.run_dir or self.app.runs_dir / f"{config.distill.method}-{bundle.dataset_id}-seed{config.trainer.seed}"

        result = self.train_once(
            bundle,
            config,
            run_dir,
            resume=args.resume,
            extra={"command": "train", "bundle": str(args.bundle), **applied},
        )
        state = result.run_state
        if state.best_epoch >= 0:
            print(f"{run_dir}: best validation NDCG@5 {state.best_score:.4f} at epoch {state.best_epoch + 1}")
        else:
            print(f"{run_dir}: trained {state.epochs_completed} epochs")

    def ablate(self, args: argparse.Namespace) -> None:
        base = load_run_config(args.config)
        applied = apply_overrides(base, args)
        bundle = load_bundle(args.bundle)
        root = args.run_dir or self.app.runs_dir / f"ablate-{bundle.dataset_id}"
        seeds = args.seeds or [base.trainer.seed]
        variants = ABLATION_VARIANTS + (BASELINE_VARIANTS if args.baselines else [])

        rows = []
        for seed in seeds:
            for name, overrides in variants:
                config = self._variant(base, seed, overrides)
                run_dir = root / f"seed{seed}" / name
                self.log.info("Ablation run %s (seed %d)", name, seed)
                self.train_once(
                    bundle,
                    config,
                    run_dir,
                    extra={"command": "ablate", "variant": name, "seed": seed, **applied},
                )
                models = load_peers(run_dir, config.eval.checkpoint)
                peer = select_peer_for_eval(len(models), min(config.eval.peer_index, len(models) - 1))
                metrics = evaluate_peers(models, bundle, config.eval, indices=[peer], device=self.app.device)[0]
                rows.append({"variant": name, "seed": seed, "peer": peer, **metrics.to_dict()})

        table = pd.DataFrame(rows)
        summary = table.drop(columns=["seed", "peer", "count"]).groupby("variant", sort=False).mean()
        root.mkdir(parents=True, exist_ok=True)
        table.to_csv(root / "ablation_runs.csv", index=False)
        summary.to_csv(root / "ablation_summary.csv")
        print(summary.to_string(float_format=lambda value: f"{value:.4f}"))

    @staticmethod
    def _variant(base: RunConfig, seed: int, overrides: Dict[str, object]) -> RunConfig:
        config = copy.deepcopy(base)
        config.trainer.seed = seed
        for key, value in overrides.items():
            setattr(config.distill, key, value)
        if config.distill.peers == 1:
            config.peers = config.peers[:1]
        config.validate()
        return config


def setup(app) -> None:
    TrainingCommands(app).register()
