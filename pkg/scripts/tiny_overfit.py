#!/usr/bin/env python3
"""Overfit sanity run: DBRNN and seq2seq ELSTM on the tiny corpus.

Both models should drive training perplexity close to 1 on the shipped
ten-sentence corpus; this is the desk-scale stand-in for full-corpus
language-model numbers.

Usage: python scripts/tiny_overfit.py [--out OUTDIR] [--epochs N]
"""

import argparse
import os

from elstm_lab.config import RunConfig, validate
from elstm_lab.train import build_model, load_task, train_model

CORPUS = os.path.join(os.path.dirname(__file__), "..", "data", "tiny_lm.txt")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="overfit_out")
    parser.add_argument("--epochs", type=int, default=200)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()
    os.makedirs(args.out, exist_ok=True)

    for model_kind in ("dbrnn", "seq2seq"):
        cfg = validate(
            RunConfig(
                task="lm",
                model=model_kind,
                cell="elstm",
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
        csv_path = os.path.join(args.out, f"curve_{model_kind}.csv")
        result = train_model(model, pairs, cfg, metrics_path=csv_path)
        print(
            f"{model_kind:<8} final ppl={result.final.perplexity:.4f} "
            f"({cfg.epochs} epochs) -> {csv_path}"
        )


if __name__ == "__main__":
    main()
