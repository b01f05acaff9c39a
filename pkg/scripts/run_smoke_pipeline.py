"""Run datagen -> train -> lcd -> sample -> eval on a config, twice if asked.

With --check-repro the pipeline runs into two directories and the loss and
sample files are compared byte for byte.
"""

import argparse
import sys
from pathlib import Path

from qcbm.cli import main as qcbm

ROOT = Path(__file__).resolve().parents[1]


def pipeline(config: Path, out: Path, shots: int) -> None:
    steps = [
        ["datagen", "--config", config, "--out-dir", out],
        ["train", "--config", config, "--data", out / "data.csv", "--out-dir", out],
        ["lcd", "--config", config, "--checkpoint", out / "checkpoint.json", "--out-dir", out],
        ["sample", "--checkpoint", out / "checkpoint_lcd.json", "--n-shots", shots, "--seed", 1, "--out-dir", out],
        ["eval", "--config", config, "--checkpoint", out / "checkpoint_lcd.json", "--data", out / "data.csv",
         "--out-dir", out / "eval"],
    ]
    for argv in steps:
        code = qcbm([str(a) for a in argv])
        if code:
            sys.exit(f"{argv[0]} failed with exit code {code}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", type=Path, default=ROOT / "configs" / "smoke.yaml")
    parser.add_argument("--out-dir", type=Path, default=Path("runs/smoke"))
    parser.add_argument("--shots", type=int, default=8192)
    parser.add_argument("--check-repro", action="store_true")
    args = parser.parse_args()

    if not args.check_repro:
        pipeline(args.config, args.out_dir, args.shots)
        return
    dirs = [args.out_dir / "a", args.out_dir / "b"]
    for d in dirs:
        pipeline(args.config, d, args.shots)
    for name in ("loss.csv", "samples.csv"):
        same = (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()
        print(f"{name}: {'identical' if same else 'DIFFERENT'}")
        if not same:
            sys.exit(1)


if __name__ == "__main__":
    main()
