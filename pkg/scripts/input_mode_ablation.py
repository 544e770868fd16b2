#!/usr/bin/env python3
"""Train the basic ELSTM language model with both cell-input layouts.

Runs the tiny shipped corpus twice — once feeding the cell [x_t; h_{t-1}]
(concat) and once x_t alone (input-only) — and writes one training-curve
CSV per mode for side-by-side comparison.

Usage: python scripts/input_mode_ablation.py [--out OUTDIR] [--epochs N]
"""

import argparse
import os

from elstm_lab.config import RunConfig, validate
from elstm_lab.train import build_model, load_task, train_model

CORPUS = os.path.join(os.path.dirname(__file__), "..", "data", "tiny_lm.txt")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="ablation_out")
    parser.add_argument("--epochs", type=int, default=300)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()
    os.makedirs(args.out, exist_ok=True)

    for mode in ("concat", "input-only"):
        cfg = validate(
            RunConfig(
                task="lm",
                model="basic",
                cell="elstm",
                input_mode=mode,
                embedding_dim=32,
                hidden_dim=32,
                batch_size=10,
                epochs=args.epochs,
                learning_rate=0.5,
                scale_period=3,
                seed=args.seed,
                data_path=os.path.abspath(CORPUS),
            )
        )
        pairs, src_vocab, tgt_vocab = load_task(cfg)
        model = build_model(cfg, src_vocab, tgt_vocab)
        csv_path = os.path.join(args.out, f"curve_{mode}.csv")
        result = train_model(model, pairs, cfg, metrics_path=csv_path)
        print(
            f"{mode:<11} final ppl={result.final.perplexity:.4f} "
            f"loss={result.final.loss:.5f} -> {csv_path}"
        )


if __name__ == "__main__":
    main()
