import argparse
import logging
from pathlib import Path

import numpy as np

from ..config import dump_config, load_run_config
from ..data.bundle import build_bundle, save_bundle
from ..data.records import format_statistics, read_records, write_records
from ..data.synthetic import synth_generate


class DataCommands:
    """prepare: raw events to a dataset bundle. synth: switching-intent synthetic events."""

    def __init__(self, app) -> None:
        self.app = app
        self.log = logging.getLogger("crimedistill.commands.data")

    def register(self) -> None:
        prepare = self.app.add_command("prepare", "Build a dataset bundle from a raw event export.", self.prepare)
        prepare.add_argument("raw", type=Path, help="delimited event file")
        prepare.add_argument("--out", type=Path, required=True, help="bundle directory")
        prepare.add_argument("--config", type=Path, help="run config YAML")
        prepare.add_argument("--seed", type=int, help="negative sampling / thinning seed")
        prepare.add_argument("--drop-rate", type=float, help="fraction of each spot's events to drop")

        synth = self.app.add_command("synth", "Generate synthetic raw events.", self.synth)
        synth.add_argument("--out", type=Path, required=True, help="output file, or directory for a sweep")
        synth.add_argument("--config", type=Path, help="run config YAML")
        synth.add_argument("--n-spots", type=int)
        synth.add_argument("--n-classes", type=int)
        synth.add_argument("--switch-prob", type=float, nargs="+", help="one value, or several for a sweep")
        synth.add_argument("--seed", type=int)

    def prepare(self, args: argparse.Namespace) -> None:
        config = load_run_config(args.config)
        if args.seed is not None:
            config.data.seed = args.seed
        if args.drop_rate is not None:
            config.data.drop_rate = args.drop_rate
        config.validate()

        records = read_records(args.raw, config.data)
        bundle = build_bundle(records, config.data)
        save_bundle(bundle, args.out)
        dump_config(config, args.out, extra={"command": "prepare", "raw": str(args.raw)})
        self.log.info("Prepared bundle %s in %s", bundle.dataset_id, args.out)
        print(format_statistics(bundle.stats))

    def synth(self, args: argparse.Namespace) -> None:
        config = load_run_config(args.config)
        synth = config.synth
        for flag, name in (("n_spots", "n_spots"), ("n_classes", "n_classes"), ("seed", "seed")):
            value = getattr(args, flag)
            if value is not None:
                setattr(synth, name, value)
        probs = args.switch_prob or [synth.switch_prob]

        sweep = len(probs) > 1
        out_dir = args.out if sweep else args.out.parent
        for prob in probs:
            records = synth_generate(
                n_spots=synth.n_spots,
                n_classes=synth.n_classes,
                switch_prob=prob,
                seq_len_range=(synth.seq_len_min, synth.seq_len_max),
                rng=np.random.default_rng(synth.seed),
            )
            path = args.out / f"synth_p{prob:g}.csv" if sweep else args.out
            write_records(records, path)
            print(path)
        dump_config(config, out_dir, extra={"command": "synth", "switch_probs": [float(p) for p in probs]})


def setup(app) -> None:
    DataCommands(app).register()
