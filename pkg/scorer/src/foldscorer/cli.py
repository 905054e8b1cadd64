"""Command line entry point: train, serve, report, toydata."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .data import load_image_folder, make_toy_dataset, stratified_split
from .model import embed_images, load_checkpoint
from .separability import separability
from .server import EmbeddingServer
from .train import TrainConfig, finetune


def cmd_train(args) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    dataset = load_image_folder(args.data)
    train_set, val_set = stratified_split(dataset, args.val_fraction, seed=args.seed)
    cfg = TrainConfig(
        arch=args.arch,
        learning_rate=args.lr,
        weight_decay=args.weight_decay,
        batch_size=args.batch_size,
        epochs=args.epochs,
        tau=args.tau,
        checkpoint_dir=args.out,
    )
    result = finetune(train_set, cfg, seed=args.seed)
    summary = {
        "epochs": cfg.epochs,
        "final_loss": result.epoch_losses[-1],
        "checkpoints": result.checkpoints,
        "train_size": len(train_set),
        "val_size": len(val_set),
        "text_pathway_frozen": result.text_checksum_before == result.text_checksum_after,
    }
    print(json.dumps(summary, indent=2))
    return 0


def cmd_serve(args) -> int:
    server = EmbeddingServer(args.checkpoint, args.addr)
    print(f"foldscorer serving {args.checkpoint} on {server.bound_addr}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return 0


def cmd_report(args) -> int:
    model, meta = load_checkpoint(args.checkpoint)
    dataset = load_image_folder(args.data)
    emb = embed_images(model, dataset.images).numpy()
    rep = separability(np.asarray(emb), dataset.labels, epoch=meta.get("epoch"))
    print(
        json.dumps(
            {
                "epoch": rep.epoch,
                "mu_intra": rep.mu_intra,
                "mu_inter": rep.mu_inter,
                "delta": rep.delta,
                "classes": dataset.class_names,
                "samples": len(dataset),
            },
            indent=2,
        )
    )
    return 0


def cmd_toydata(args) -> int:
    dataset = make_toy_dataset(per_class=args.per_class, seed=args.seed)
    root = Path(args.out)
    for img, label in zip(dataset.images, dataset.labels):
        cls = dataset.class_names[label]
        directory = root / cls
        directory.mkdir(parents=True, exist_ok=True)
        n = len(list(directory.glob("*.png")))
        img.save(directory / f"{cls}_{n:03d}.png")
    print(f"wrote {len(dataset)} images across {len(dataset.class_names)} classes to {root}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="foldscorer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fine-tune the image pathway with SupCon")
    p.add_argument("--data", required=True, help="directory with one subfolder per class")
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.add_argument("--arch", default="tiny", choices=["tiny", "clip-vit-b16"])
    p.add_argument("--lr", type=float, default=5e-6)
    p.add_argument("--weight-decay", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--tau", type=float, default=0.07)
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("serve", help="serve embeddings from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--addr", default="127.0.0.1:8901", help="host:port or unix:PATH")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("report", help="intra/inter-class separability of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("toydata", help="write the synthetic 3-class shape dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--per-class", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_toydata)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
