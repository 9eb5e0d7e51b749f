"""The full command-line workflow, end to end.

Drives the installed entry points in-process: synthesize a cohort to
disk, derive feature CSVs, train with cross-validation, then score one
of the raw recordings against the saved checkpoint. Each step prints
the equivalent shell command, so this doubles as CLI documentation.
"""

import json
import tempfile
from pathlib import Path

from pendetect.cli import main

with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp)
    data = root / "data"
    out = root / "run"

    def run(argv):
        print(f"\n$ pendetect {' '.join(argv)}")
        code = main(argv)
        assert code == 0, f"exit code {code}"

    run(["synth", "--out", str(data), "--n-per-class", "6",
         "--min-length", "80", "--max-length", "140", "--seed", "9"])

    config = {
        "seed": 9,
        "source": {
            "kind": "manifest",
            "path": str(data / "manifest.csv"),
            "format": "synthetic",
        },
        "features": {"groups": ["derived"]},
        "model": {"cell": "gru", "with_conv": True},
        "train": {"epochs": 10, "early_stop_patience": None},
        "split": {"kind": "kfold", "k": 4},
    }
    cfg = root / "experiment.json"
    cfg.write_text(json.dumps(config, indent=2))

    run(["features", "--config", str(cfg), "--out", str(out)])
    run(["train", "--config", str(cfg), "--out", str(out)])

    print(f"\nartifacts in {out.name}/: "
          + ", ".join(sorted(p.name for p in out.iterdir() if p.is_file())))

    # Score a raw recording against the saved checkpoint. The checkpoint
    # carries the feature groups, length cutoff, and a pointer to the
    # normalization stats, so scoring replays training preprocessing.
    sample = sorted(data.glob("*.svc"))[0]
    run(["score", "--checkpoint", str(out / "model.ckpt"), "--input", str(sample)])
    truth = next(
        line.split(",")[3]
        for line in (data / "manifest.csv").read_text().splitlines()[1:]
        if line.split(",")[0] == sample.name
    )
    print(f"(true label for {sample.name}: {truth})")
