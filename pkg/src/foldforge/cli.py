"""Command line entry point: validate, render, fold, score, episode, serve, mcq."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .agents import RandomAgent, ScriptedAgent, load_script
from .config import DEFAULT_CONFIG, EnvConfig, load_config
from .env import run_episode
from .foldfile import load_fold, save_fold, serialize_fold
from .metrics import geometric_similarity, semantic_similarity, silhouette_image
from .pattern import CreasePattern
from .render import rasterize, render_crease_pattern, render_folded
from .scorer_client import EmbeddingClient, ScorerUnavailable
from .service import serve
from .solver import SolverError, Status, fold, is_foldable
from .taskgen import InfeasiblePrefix, build_dataset, build_sequence


def _config(args) -> EnvConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    return DEFAULT_CONFIG


def cmd_validate(args) -> int:
    cfg = _config(args)
    cp = CreasePattern.from_fold_file(load_fold(args.fold))
    verdict = is_foldable(cp, cfg.solver_budget())
    out = {
        "status": verdict.status.value,
        "violations": [[v, rule] for v, rule in verdict.violations],
        "nodes_used": verdict.nodes_used,
    }
    print(json.dumps(out, indent=2))
    return 0 if verdict.status is Status.VALID else 1


def cmd_render(args) -> int:
    cfg = _config(args)
    cp = CreasePattern.from_fold_file(load_fold(args.fold))
    if args.view == "cp":
        doc = render_crease_pattern(cp, cfg.style)
    else:
        try:
            state = fold(cp, cfg.solver_budget())
        except SolverError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        doc = render_folded(cp, state, args.view, cfg.style)
    if args.svg:
        Path(args.svg).write_text(doc.to_svg(args.size, args.size), encoding="utf-8")
    out = args.out or (Path(args.fold).stem + f"_{args.view}.png")
    rasterize(doc, args.size, args.size).save(out)
    print(out)
    return 0


def cmd_fold(args) -> int:
    cfg = _config(args)
    base = load_fold(args.fold)
    script = load_script(args.script)
    try:
        seq = build_sequence(script, base=base, design_id=Path(args.fold).stem, config=cfg)
    except InfeasiblePrefix as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    final = seq.states[-1]
    if args.out:
        save_fold(final, args.out)
        print(args.out)
    else:
        sys.stdout.write(serialize_fold(final))
    return 0


def cmd_score(args) -> int:
    cfg = _config(args)
    result = load_fold(args.result)
    target = load_fold(args.target)
    try:
        gs = geometric_similarity(result, target, cfg.style, cfg.image_size, cfg.solver_budget())
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    ss = None
    addr = cfg.resolved_scorer_addr(args.scorer)
    if addr:
        try:
            ss = semantic_similarity(
                silhouette_image(result, cfg.style, cfg.image_size),
                silhouette_image(target, cfg.style, cfg.image_size),
                EmbeddingClient(addr),
            )
        except ScorerUnavailable as exc:
            print(f"warning: scorer unavailable ({exc})", file=sys.stderr)
    print(json.dumps({"gs": gs, "ss": ss}, indent=2))
    return 0


def cmd_episode(args) -> int:
    cfg = _config(args)
    target = load_fold(args.target)
    if args.agent == "scripted":
        if not args.script:
            print("scripted agent needs --script", file=sys.stderr)
            return 2
        agent = ScriptedAgent(load_script(args.script))
    else:
        agent = RandomAgent(seed=args.seed)
    scorer = None
    addr = cfg.resolved_scorer_addr(args.scorer)
    if addr:
        scorer = EmbeddingClient(addr)
    record, score = run_episode(
        target,
        agent,
        max_steps=args.max_steps,
        config=cfg,
        scorer=scorer,
        target_name=Path(args.target).stem,
    )
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "record.json").write_text(
            json.dumps(record.as_dict(), indent=2) + "\n", encoding="utf-8"
        )
        (out / "final.fold").write_text(record.final_fold_text, encoding="utf-8")
    print(json.dumps(score.as_dict(), indent=2))
    return 0


def cmd_serve(args) -> int:
    cfg = _config(args)
    if args.targets:
        import dataclasses

        cfg = dataclasses.replace(cfg, targets_dir=args.targets)
    serve(args.addr, cfg)
    return 0


def cmd_mcq(args) -> int:
    cfg = _config(args)
    sequences = []
    for path in sorted(Path(args.scripts).glob("*.json")):
        script = load_script(path)
        sequences.append(build_sequence(script, design_id=path.stem, config=cfg))
    index = build_dataset(sequences, args.out, args.count, args.variant, args.seed)
    print(f"wrote {len(index)} instances to {args.out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="forge", description=__doc__)
    parser.add_argument("--config", help="path to a JSON config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check flat-foldability of a FOLD file")
    p.add_argument("fold")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("render", help="render a FOLD file to PNG (and SVG)")
    p.add_argument("fold")
    p.add_argument("--view", choices=["cp", "front", "back"], default="cp")
    p.add_argument("-o", "--out")
    p.add_argument("--svg")
    p.add_argument("--size", type=int, default=512)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("fold", help="apply a crease script to a FOLD file")
    p.add_argument("fold")
    p.add_argument("--script", required=True)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_fold)

    p = sub.add_parser("score", help="geometric/semantic similarity of two FOLD files")
    p.add_argument("result")
    p.add_argument("target")
    p.add_argument("--scorer", help="embedding sidecar address (host:port or unix:PATH)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("episode", help="run one agent episode against a target")
    p.add_argument("--target", required=True)
    p.add_argument("--agent", choices=["scripted", "random"], default="random")
    p.add_argument("--script")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, default=25)
    p.add_argument("--scorer")
    p.add_argument("--out", help="directory for record.json and final.fold")
    p.set_defaults(func=cmd_episode)

    p = sub.add_parser("serve", help="run the session service")
    p.add_argument("--addr", default="127.0.0.1:8765")
    p.add_argument("--targets", help="directory of <name>.fold target files")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("mcq", help="build a one-step multiple-choice dataset")
    p.add_argument("--scripts", required=True, help="directory of crease-script JSON files")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--variant", choices=["associative", "causal"], default="associative")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_mcq)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
