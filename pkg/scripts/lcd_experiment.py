"""Tune a trained 4-qubit model with LCD under readout noise, over seeds.

Prints noisy-backend JS (infinite shots through the noise channel) before
tuning, after the last sweep and at the best parameters seen.
"""

import argparse

import numpy as np

from qcbm.ansatz import CircuitSpec
from qcbm.datagen import SurrogateConfig, synthesize
from qcbm.encoding import build_target, fit_binning
from qcbm.lcd import LcdConfig, noisy_loss, run_lcd
from qcbm.simulator import NoiseConfig
from qcbm.training import TrainingConfig, train


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--flip", type=float, default=0.02, help="p01 = p10")
    parser.add_argument("--depolarizing", type=float, default=0.0)
    parser.add_argument("--seeds", type=int, default=10)
    parser.add_argument("--passes", type=int, default=1)
    parser.add_argument("--n-shots", type=int, default=20000)
    args = parser.parse_args()

    data = synthesize(SurrogateConfig(n_events=100_000, seed=0))
    target = build_target(data, fit_binning(data, [2, 2])).probabilities
    spec = CircuitSpec("tree", 4, 4)
    theta = train(spec, target, TrainingConfig(seed=0)).theta
    noise = NoiseConfig(args.flip, args.flip, args.depolarizing)
    before = noisy_loss(spec, theta, target, noise)
    print(f"untuned noisy JS {before:.6g}")
    print("seed,final_js,best_js,skipped")
    best = []
    for seed in range(args.seeds):
        cfg = LcdConfig(noise=noise, seed=seed, passes=args.passes, n_shots=args.n_shots)
        result = run_lcd(spec, theta, target, cfg)
        best.append(noisy_loss(spec, result.best_theta, target, noise))
        skipped = sum(s.skipped for s in result.steps)
        print(f"{seed},{noisy_loss(spec, result.theta, target, noise):.6g},{best[-1]:.6g},{skipped}")
    print(f"best-parameter JS improved on {sum(b < before for b in best)}/{args.seeds} seeds "
          f"(median {np.median(best):.6g})")


if __name__ == "__main__":
    main()
