"""Run the smoke pipeline in-process through the CLI entry point."""

from pathlib import Path

from qcbm.cli import main

SMOKE = Path(__file__).resolve().parents[1] / "configs" / "smoke.yaml"


def run_pipeline(out: Path, config=SMOKE, sample_shots=8192) -> dict:
    out = Path(out)
    steps = [
        ["datagen", "--config", config, "--out-dir", out],
        ["train", "--config", config, "--data", out / "data.csv", "--out-dir", out],
        ["lcd", "--config", config, "--checkpoint", out / "checkpoint.json", "--out-dir", out],
        ["sample", "--checkpoint", out / "checkpoint_lcd.json", "--n-shots", sample_shots, "--seed", 1, "--out-dir", out],
        ["eval", "--config", config, "--checkpoint", out / "checkpoint_lcd.json", "--data", out / "data.csv",
         "--out-dir", out / "eval"],
    ]
    codes = {}
    for argv in steps:
        codes[argv[0]] = main([str(a) for a in argv])
    return codes
