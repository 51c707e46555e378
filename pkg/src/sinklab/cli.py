"""Command line entry point: ``sinklab <command> ...``.

Exit status: 0 success, 1 validation error (bad input, bad configuration,
lint findings), 2 I/O or network error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from ._io import atomic_write_bytes, atomic_write_text
from .errors import RemoteError
from .kvcache import CachePolicy

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _out(text: str, path=None) -> None:
    if path:
        atomic_write_text(Path(path), text)
    else:
        sys.stdout.write(text)


def _policy(text: str) -> CachePolicy:
    try:
        return CachePolicy.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


# commands

def cmd_tokenize(args) -> int:
    from .vlex import tokenize
    stream = tokenize(Path(args.file).read_bytes())
    _out(stream.to_json() + "\n" if args.emit == "json" else stream.to_text(), args.out)
    return EXIT_OK


def cmd_score(args) -> int:
    from .harness.report import extract_code, load_reference
    from .score import CSV_FIELDS, score_design
    ref = load_reference(args.ref)
    gen_text = Path(args.gen).read_text(encoding="utf-8", errors="surrogateescape")
    report = score_design(ref, [extract_code(gen_text)])
    if args.emit == "json":
        text = report.to_json() + "\n"
    elif args.emit == "csv":
        text = ",".join(CSV_FIELDS) + "\n" + report.csv_row()
    else:
        correct = "n/a" if report.correct_pct is None else f"{report.correct_pct:.2f}%"
        lines = [f"reference tokens: {report.ref_tokens}", f"fix cost: {report.fix_cost}",
                 f"  substitutions {report.substitutions}, insertions {report.insertions}, "
                 f"deletions {report.deletions}",
                 f"success: {report.success_pct:.2f}%", f"correct: {correct}"]
        lines += [f"  {name}: {r.fix_cost}/{r.ref_tokens} ({r.success_pct:.2f}%)"
                  for name, r in report.modules.items()]
        text = "\n".join(lines) + "\n"
    _out(text, args.out)
    return EXIT_OK


def cmd_lint(args) -> int:
    from .rtllint import findings_to_json, findings_to_text, lint_files
    sources = [(f, Path(f).read_bytes()) for f in args.files]
    findings = lint_files(sources)
    _out(findings_to_json(findings) + "\n" if args.emit == "json" else findings_to_text(findings), args.out)
    return EXIT_INVALID if findings and not args.exit_zero else EXIT_OK


def cmd_prompt_render(args) -> int:
    from .promptkit import load_spec, render_prompt
    _out(render_prompt(load_spec(args.spec)), args.out)
    return EXIT_OK


def cmd_train(args) -> int:
    from .transformer import ModelConfig, TrainingLog, train_char_lm
    corpus = Path(args.corpus).read_bytes()
    config = ModelConfig(args.layers, args.heads, args.d_model, args.d_ff, 256, args.context)
    history = TrainingLog()
    model = train_char_lm(corpus, config, steps=args.steps, seed=args.seed,
                          learning_rate=args.lr, batch_size=args.batch, history=history)
    model.save(args.out)
    summary = {"model": str(args.out), "steps": args.steps, "seed": args.seed,
               "initial_loss": history.initial_loss, "final_loss": history.final_loss,
               "n_params": model.n_params}
    if args.emit == "json":
        _out(json.dumps(summary, indent=2) + "\n")
    else:
        _out(f"trained {model.n_params} parameters for {args.steps} steps: loss "
             f"{history.initial_loss:.4f} -> {history.final_loss:.4f}; saved {args.out}\n")
    return EXIT_OK


def cmd_gen(args) -> int:
    from .harness.transcript import local_transcript
    from .transformer import TinyLM, generate
    model = TinyLM.load(args.model)
    prompt = Path(args.prompt_file).read_bytes() if args.prompt_file else args.prompt.encode("utf-8")
    if not prompt:
        raise UsageError("prompt is empty")
    out = bytes(generate(model, list(prompt), args.max_new, args.policy))
    if args.transcript:
        local_transcript(prompt.decode("utf-8", "replace"), out.decode("utf-8", "replace"),
                         model=str(args.model), policy=args.policy.describe(),
                         params={"max_tokens": args.max_new, "temperature": 0.0}
                         ).save(args.transcript)
    if args.emit == "json":
        _out(json.dumps({"policy": args.policy.describe(),
                         "completion": out.decode("utf-8", "replace")}) + "\n")
    else:
        sys.stdout.buffer.write(out + b"\n")
        sys.stdout.flush()
    return EXIT_OK


def cmd_ppl(args) -> int:
    from .transformer import TinyLM, sliding_perplexity, streaming_perplexity
    model = TinyLM.load(args.model)
    data = list(Path(args.text).read_bytes())
    if args.limit:
        data = data[: args.limit]
    rows = [(p.describe(), streaming_perplexity(model, data, p)) for p in args.policy]
    if args.baseline:
        rows.append(("sliding-recompute", sliding_perplexity(model, data)))
    if args.emit == "json":
        text = json.dumps({"tokens": len(data), "perplexity": dict(rows)}, indent=2) + "\n"
    elif args.emit == "csv":
        text = "policy,perplexity\n" + "".join(f"{k},{v:.6f}\n" for k, v in rows)
    else:
        text = "".join(f"{k:>20}  {v:.4f}\n" for k, v in rows)
    _out(text)
    return EXIT_OK


def cmd_llm_run(args) -> int:
    from .harness.client import EndpointConfig, run_remote
    from .promptkit import load_spec, render_prompt
    config = EndpointConfig.from_env(args.endpoint, model=args.model)
    if args.spec:
        prompt = render_prompt(load_spec(args.spec))
    else:
        prompt = Path(args.prompt_file).read_text(encoding="utf-8")
    params = {"max_tokens": args.max_tokens, "temperature": args.temperature}
    tr = run_remote(config, prompt, params, policy=args.policy, label=args.label, out=args.out)
    _out(f"saved {args.out} ({len(tr.completion)} characters, {tr.retries} retries)\n"
         if args.emit == "text" else tr.to_json())
    return EXIT_OK


def cmd_replay(args) -> int:
    from .harness.transcript import Transcript
    tr = Transcript.load(args.transcript)
    if args.emit == "json":
        _out(tr.to_json(), args.out)
    else:
        _out(tr.completion, args.out)
    return EXIT_OK


def cmd_report(args) -> int:
    from .harness.report import evaluate_transcript, load_reference, published_rows, report_aggregate
    from .harness.transcript import Transcript
    rows = []
    if args.transcripts:
        if not args.ref:
            raise UsageError("--ref is required when scoring transcripts")
        ref = load_reference(args.ref)
        for path in args.transcripts:
            row, _ = evaluate_transcript(Transcript.load(path), ref, source=str(path))
            rows.append(row)
    if args.published:
        rows.extend(published_rows())
    report = report_aggregate(rows, {"reference": [str(r) for r in args.ref or []]})
    report.write(args.csv, args.json)
    if args.emit == "json":
        _out(report.to_json())
    elif args.emit == "csv":
        _out(report.to_csv())
    else:
        _out("".join(f"{r.label:>12} {r.policy:>8}  success {r.score.success_pct:6.2f}%  "
                     f"fix {r.score.fix_cost:5d}/{r.score.ref_tokens}  "
                     f"lint {'-' if r.lint_total is None else r.lint_total}\n"
                     for r in report.rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sinklab", description="KV-cache policy experiments and RTL generation scoring.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def emit(sp, choices=("text", "json"), default="text"):
        sp.add_argument("--emit", choices=choices, default=default)

    s = sub.add_parser("tokenize", help="lex a Verilog file")
    s.add_argument("file")
    s.add_argument("--out")
    emit(s)
    s.set_defaults(func=cmd_tokenize)

    s = sub.add_parser("score", help="token-level score of a generation against reference modules")
    s.add_argument("--ref", nargs="+", required=True, help="reference files or directories")
    s.add_argument("--gen", required=True, help="generated source (markdown fences allowed)")
    s.add_argument("--out")
    emit(s, ("text", "json", "csv"))
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("lint", help="check sources for generation failure modes")
    s.add_argument("files", nargs="+")
    s.add_argument("--out")
    s.add_argument("--exit-zero", action="store_true", help="exit 0 even when findings exist")
    emit(s)
    s.set_defaults(func=cmd_lint)

    s = sub.add_parser("prompt", help="prompt assembly")
    psub = s.add_subparsers(dest="prompt_command", required=True, parser_class=_Parser)
    r = psub.add_parser("render", help="render a design spec to prompt text")
    r.add_argument("--spec", required=True)
    r.add_argument("--out")
    r.set_defaults(func=cmd_prompt_render)

    s = sub.add_parser("train", help="train the byte-level toy LM")
    s.add_argument("--corpus", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--steps", type=int, default=2000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--lr", type=float, default=1.0)
    s.add_argument("--batch", type=int, default=16)
    s.add_argument("--layers", type=int, default=2)
    s.add_argument("--heads", type=int, default=2)
    s.add_argument("--d-model", type=int, default=64)
    s.add_argument("--d-ff", type=int, default=128)
    s.add_argument("--context", type=int, default=64)
    emit(s)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("gen", help="greedy generation with the toy LM")
    s.add_argument("--model", required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--prompt")
    g.add_argument("--prompt-file")
    s.add_argument("--max-new", type=int, default=128)
    s.add_argument("--policy", type=_policy, default=CachePolicy.sink(None, 60),
                   help="dense, window:W, sink:S:R or sink::R (S = prompt length)")
    s.add_argument("--transcript", help="also save a transcript here")
    emit(s)
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("ppl", help="streaming perplexity under cache policies")
    s.add_argument("--model", required=True)
    s.add_argument("--text", required=True)
    s.add_argument("--policy", type=_policy, action="append", required=True)
    s.add_argument("--baseline", action="store_true", help="add the sliding-recompute baseline")
    s.add_argument("--limit", type=int, help="only the first N bytes")
    emit(s, ("text", "json", "csv"))
    s.set_defaults(func=cmd_ppl)

    s = sub.add_parser("llm", help="remote completion endpoint")
    lsub = s.add_subparsers(dest="llm_command", required=True, parser_class=_Parser)
    r = lsub.add_parser("run", help="send a prompt and store the transcript")
    g = r.add_mutually_exclusive_group(required=True)
    g.add_argument("--spec")
    g.add_argument("--prompt-file")
    r.add_argument("--endpoint", help="chat-completions URL (default $SINKLAB_ENDPOINT)")
    r.add_argument("--model", default="default")
    r.add_argument("--policy", default="remote", help="label recorded in the transcript")
    r.add_argument("--label", default="")
    r.add_argument("--max-tokens", type=int, default=8192)
    r.add_argument("--temperature", type=float, default=0.0)
    r.add_argument("--out", required=True)
    emit(r)
    r.set_defaults(func=cmd_llm_run)

    s = sub.add_parser("replay", help="print the completion stored in a transcript")
    s.add_argument("transcript")
    s.add_argument("--out")
    emit(s)
    s.set_defaults(func=cmd_replay)

    s = sub.add_parser("report", help="aggregate scores and lint counts per policy")
    s.add_argument("--transcripts", nargs="*", default=[])
    s.add_argument("--ref", nargs="+")
    s.add_argument("--published", action="store_true", help="include rows from the published counts")
    s.add_argument("--csv")
    s.add_argument("--json")
    emit(s, ("text", "json", "csv"), default="csv")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (RemoteError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
