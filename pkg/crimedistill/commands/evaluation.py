import argparse
import json
import logging
from pathlib import Path

import pandas as pd

from ..config import dump_config, load_run_config
from ..data.bundle import load_bundle
from ..evaluation.metrics import evaluate_peers, metrics_report
from ..training.checkpoint import checkpoint_dir, load_peers
from ..training.trainer import select_peer_for_eval


class EvaluationCommands:
    """evaluate: sampled (or full) ranking metrics of a trained run's peers."""

    def __init__(self, app) -> None:
        self.app = app
        self.log = logging.getLogger("crimedistill.commands.evaluation")

    def register(self) -> None:
        command = self.app.add_command("evaluate", "Score a trained run on the validation or test split.", self.evaluate)
        command.add_argument("run_dir", type=Path, help="training run directory")
        command.add_argument("bundle", type=Path, help="dataset bundle directory")
        command.add_argument("--config", type=Path, help="run config YAML (defaults to the run's resolved config)")
        command.add_argument("--split", choices=["val", "test"])
        command.add_argument("--peer", type=int, help="peer index to report")
        command.add_argument("--both-peers", action="store_true", help="report every peer and their differences")
        command.add_argument("--full-ranking", action="store_true", help="rank against all classes")
        command.add_argument("--checkpoint", choices=["best", "last"])

    def evaluate(self, args: argparse.Namespace) -> None:
        config_path = args.config
        if config_path is None and (args.run_dir / "resolved_config.yaml").exists():
            config_path = args.run_dir / "resolved_config.yaml"
        config = load_run_config(config_path)
        settings = config.eval
        if args.split:
            settings.split = args.split
        if args.peer is not None:
            settings.peer_index = args.peer
        settings.both_peers = settings.both_peers or args.both_peers
        settings.full_ranking = settings.full_ranking or args.full_ranking
        if args.checkpoint:
            settings.checkpoint = args.checkpoint
        settings.validate()

        bundle = load_bundle(args.bundle)
        models = load_peers(args.run_dir, settings.checkpoint)
        checkpoint_id = self._checkpoint_id(args.run_dir, settings.checkpoint, bundle.dataset_id)
        if settings.both_peers:
            indices = list(range(len(models)))
        else:
            indices = [select_peer_for_eval(len(models), settings.peer_index)]

        results = evaluate_peers(models, bundle, settings, indices=indices, device=self.app.device)
        reports = [
            metrics_report(metrics, bundle.dataset_id, checkpoint_id, k, settings.split, settings.full_ranking)
            for k, metrics in zip(indices, results)
        ]
        payload = {"reports": reports}
        table = pd.DataFrame(reports).set_index("peer_index")
        metric_columns = [col for col in table.columns if "@" in col or col == "MRR"]
        if len(reports) > 1:
            differences = table[metric_columns] - table[metric_columns].iloc[0]
            payload["difference_vs_peer0"] = {
                f"peer{k}": {col: float(value) for col, value in row.items()}
                for k, row in differences.to_dict(orient="index").items()
            }
            spread = table[metric_columns].max() - table[metric_columns].min()
            payload["max_spread"] = {col: float(value) for col, value in spread.items()}

        out_dir = args.run_dir / "reports"
        out_dir.mkdir(parents=True, exist_ok=True)
        protocol = "full" if settings.full_ranking else "sampled"
        out_path = out_dir / f"{settings.split}_{settings.checkpoint}_{protocol}.json"
        out_path.write_text(json.dumps(payload, indent=2))
        dump_config(config, out_dir, extra={"command": "evaluate", "run_dir": str(args.run_dir)})
        self.log.info("Wrote %s", out_path)

        print(table[metric_columns + ["count"]].to_string(float_format=lambda value: f"{value:.4f}"))
        if "max_spread" in payload:
            print("max spread: " + ", ".join(f"{key} {value:.4f}" for key, value in payload["max_spread"].items()))

    def _checkpoint_id(self, run_dir: Path, which: str, dataset_id: str) -> str:
        state_path = checkpoint_dir(run_dir, which) / "state.json"
        if not state_path.exists():
            return f"{run_dir.name}/last"
        state = json.loads(state_path.read_text())
        if state.get("dataset_id") and state["dataset_id"] != dataset_id:
            self.log.warning("Run %s was trained on dataset %s, evaluating on %s", run_dir, state["dataset_id"], dataset_id)
        return f"{run_dir.name}/{which}/epoch{state.get('epochs_completed', 0)}"


def setup(app) -> None:
    EvaluationCommands(app).register()
