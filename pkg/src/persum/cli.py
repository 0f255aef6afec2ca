"""Command-line entry points: summarize, interact, simulate, eval, serve,
train-exdos. Exit codes: 0 success, 2 usage error, 1 runtime error."""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

from . import adaptive, exdos
from .config import EngineConfig
from .corpus import featurize, load_corpus, tokenize
from .errors import PersumError, SessionConverged
from .evaluation import SimUser, ground_truth_reward, rouge_l, rouge_n


def _load(path, fmt=None):
    p = Path(path)
    fmt = fmt or ("txt_dir" if p.is_dir() else "jsonl")
    corp = load_corpus(p, fmt)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        featurize(corp)
    return corp


def _train(corp, cfg: EngineConfig, seed):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        data = exdos.labeled_set_from_corpus(corp)
        return exdos.train(data, K=2, hyper=cfg.exdos_hyper(), seed=seed)


def cmd_summarize(args, cfg):
    corp = _load(args.corpus)
    model = _train(corp, cfg, args.seed)
    summary = exdos.select_summary(
        model, corp, args.budget, hyper=cfg.exdos_hyper(), seed=args.seed)
    for sid in summary.sentence_ids:
        print(corp.sentences[sid].text)
    print(json.dumps(summary.as_dict(), sort_keys=True))
    if args.out:
        Path(args.out).write_text(json.dumps(summary.as_dict(), sort_keys=True), encoding="utf-8")
    return 0


def cmd_eval(args, cfg):
    cand = tokenize(Path(args.cand).read_text(encoding="utf-8"))
    refs = [tokenize(Path(r).read_text(encoding="utf-8")) for r in args.ref]
    rows = []
    for n in (1, 2):
        for mode in ("recall", "f1"):
            rows.append(rouge_n(cand, refs, n=n, mode=mode, truncation=args.truncate).as_dict())
    for mode in ("recall", "f1"):
        rows.append(rouge_l(cand, refs, mode=mode, truncation=args.truncate).as_dict())
    for row in rows:
        print(json.dumps(row, sort_keys=True))
    return 0


def cmd_train_exdos(args, cfg):
    corp = _load(args.corpus)
    model = _train(corp, cfg, args.seed)
    Path(args.out).write_text(model.to_json(), encoding="utf-8")
    print(f"model written to {args.out} "
          f"({model.diagnostics['iterations']} iterations, "
          f"J={model.diagnostics['final_objective']:.6f})")
    return 0


def cmd_simulate(args, cfg):
    from .simulate import (
        generic_baseline_summary,
        run_adaptive_simulation,
        run_sumrecom_pipeline,
        summary_sentences,
        trajectory_csv,
    )

    corp = _load(args.corpus)
    if not corp.reference_summaries:
        print("simulate needs reference summaries (refs/ directory)", file=sys.stderr)
        return 1
    user = SimUser(kind="reference", references=corp.reference_summaries,
                   seed=args.seed, noise=args.noise,
                   reward_coeffs=cfg.reward_coeffs())
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if args.mode == "adaptive":
            records = run_adaptive_simulation(
                corp, user, rounds=args.rounds, budget=args.budget,
                seed=args.seed, group_size=cfg.group_size, unit=cfg.unit)
            csv = trajectory_csv(records)
            if args.out:
                Path(args.out).write_text(csv, encoding="utf-8")
            sys.stdout.write(csv)
        else:
            out = run_sumrecom_pipeline(
                corp, user, concept_budget=args.rounds,
                summary_budget=cfg.summary_queries, word_budget=args.budget,
                seed=args.seed, unit=cfg.unit, pool_size=cfg.pool_size,
                concept_lr=cfg.gamma1, reward_lr=cfg.gamma2)
            base = generic_baseline_summary(corp, args.budget, seed=args.seed)
            result = {
                "final_summary": out["summary"].as_dict(),
                "ground_truth_v": out.get("ground_truth_v"),
                "baseline_v": ground_truth_reward(
                    user, summary_sentences(corp, base.sentence_ids),
                    corp.reference_summaries),
                "n_concept_prefs": out["n_concept_prefs"],
                "n_summary_prefs": out["n_summary_prefs"],
                "pool_size": out["pool_size"],
            }
            text = json.dumps(result, sort_keys=True, indent=2) + "\n"
            if args.out:
                Path(args.out).write_text(text, encoding="utf-8")
            sys.stdout.write(text)
    return 0


def cmd_interact(args, cfg):
    corp = _load(args.corpus)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        session = adaptive.start_session(
            corp, budget_words=args.budget, unit=cfg.unit, seed=args.seed,
            hyper=cfg.exdos_hyper())
    print("# commands: accept <id> <weight> [conf] | reject <id> [conf] | "
          "drop <sentence_id> | summary | done")
    while True:
        try:
            group = adaptive.next_query_group(session, cfg.group_size)
        except SessionConverged:
            print("# all concepts queried; session converged")
            break
        print("# pending concepts:")
        for item in group:
            c = item["concept"]
            print(f"#   [{c.concept_id}] {c.label} (salience {c.base_score:.2f})")
            for s in item["examples"]:
                print(f"#       s{s.id}: {s.text}")
        try:
            line = input("> ").strip()
        except EOFError:
            break
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "done":
                break
            elif parts[0] == "summary":
                pass
            elif parts[0] == "accept":
                session = adaptive.apply_feedback(session, adaptive.ConceptFeedback(
                    concept_id=int(parts[1]), action=1, weight=float(parts[2]),
                    confidence=float(parts[3]) if len(parts) > 3 else 1.0))
            elif parts[0] == "reject":
                session = adaptive.apply_feedback(session, adaptive.ConceptFeedback(
                    concept_id=int(parts[1]), action=-1, weight=1.0,
                    confidence=float(parts[2]) if len(parts) > 2 else 1.0))
            elif parts[0] == "drop":
                session = adaptive.apply_feedback(
                    session, adaptive.SentenceRejection(sentence_id=int(parts[1])))
            else:
                print(f"# unknown command {parts[0]!r}")
                continue
        except (PersumError, ValueError, IndexError) as exc:
            print(f"# error: {exc}")
            continue
        print("# current summary:")
        for sid in session.current_summary.sentence_ids:
            print(f"#   {corp.sentences[sid].text}")
    if args.save:
        adaptive.save_session(session, args.save)
        print(f"# session saved to {args.save}")
    return 0


def cmd_serve(args, cfg):
    from .service import serve
    serve(cfg, port=args.port, host=args.host, data_root=args.data_dir)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="persum")
    parser.add_argument("--config", help="path to a JSON EngineConfig file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("summarize", help="one-shot generic summary")
    p.add_argument("--corpus", required=True)
    p.add_argument("--budget", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("eval", help="ROUGE report for candidate vs references")
    p.add_argument("--cand", required=True)
    p.add_argument("--ref", required=True, action="append")
    p.add_argument("--truncate", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", help="run a simulated user end-to-end")
    p.add_argument("--corpus", required=True)
    p.add_argument("--mode", choices=("adaptive", "sumrecom"), default="adaptive")
    p.add_argument("--rounds", type=int, default=10)
    p.add_argument("--budget", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("interact", help="terminal feedback loop")
    p.add_argument("--corpus", required=True)
    p.add_argument("--budget", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--save")
    p.set_defaults(func=cmd_interact)

    p = sub.add_parser("serve", help="run the HTTP session API")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data-dir")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("train-exdos", help="fit and dump a weighting model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_exdos)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = EngineConfig.from_file(args.config) if args.config else EngineConfig.from_env()
        return args.func(args, cfg)
    except PersumError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
