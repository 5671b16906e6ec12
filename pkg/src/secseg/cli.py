"""Command-line entry point: ``secseg <command> ...``.

Exit status is 0 on success, 1 for usage errors (bad flags, out-of-range
parameters, empty model library) and 2 for malformed or inconsistent data.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .extract import ExtractionOptions, extract_event_chain, read_frames, write_frames
from .harness import GroundTruth, evaluate_recognition, framewise_accuracy, inject_noise, steps_from_dict, synthesize
from .learn import learn_model, library_from_dict, library_to_dict
from .model import ActionSegment, EventChain, InputError, Params, validate_event_chain
from .recognize import UNKNOWN, find_manipulators, prepare_templates, recognize_segment, scan_match
from .segment import denoise_manipulator_rows, merge_timelines, segment_chain, to_timeline

SEGMENTS_SCHEMA = "secseg.segments/1"
RESULT_SCHEMA = "secseg.result/1"
REPORT_SCHEMA = "secseg.report/1"
GRAPHS_SCHEMA = "secseg.graphs/1"
TRUTH_SCHEMA = "secseg.truth/1"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# file helpers
# --------------------------------------------------------------------------

def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}: {exc.msg}") from None


def _write_json(path, data) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")


def _header(schema: str, config: dict) -> str:
    return json.dumps({"schema": schema, "config": config}, separators=(",", ":")) + "\n"


def _load_chain(path) -> EventChain:
    data = _read_json(path)
    schema = data.get("schema") if isinstance(data, dict) else None
    if schema not in (None, "secseg.chain/1"):
        raise InputError(f"{path}: unsupported chain schema {schema!r}")
    try:
        chain = EventChain.from_dict(data)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None
    bad = [v for v in validate_event_chain(chain) if v.kind not in ("static row",)]
    if bad:
        v = bad[0]
        where = "".join(f" {k} {x}" for k, x in (("row", v.row), ("column", v.column)) if x is not None)
        raise InputError(f"{path}:{where}: {v.kind}")
    return chain


def _load_models(path):
    data = _read_json(path)
    try:
        models, w_min = library_from_dict(data)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None
    if not models:
        raise UsageError(f"{path}: empty model library")
    return models, w_min


def _params(args, **extra) -> Params:
    kw = {}
    for name in ("tau_conf", "tau_merge", "tau_sem", "hands", "min_event_frames", "w_min"):
        if getattr(args, name, None) is not None:
            kw[name] = getattr(args, name)
    kw.update(extra)
    try:
        return Params(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_extract(args) -> None:
    try:
        with open(args.graphs) as fh:
            frames = read_frames(fh, args.graphs, args.boxes, args.extended_alphabet)
    except OSError as exc:
        raise InputError(f"{args.graphs}: {exc.strerror}") from None
    chain = extract_event_chain(frames, ExtractionOptions(extended_alphabet=args.extended_alphabet))
    out = chain.to_dict()
    out["config"] = {"command": "extract", "boxes": args.boxes, "extended_alphabet": args.extended_alphabet}
    _write_json(args.out, out)


def _sample_chains(directory: Path) -> list[EventChain]:
    if not directory.is_dir():
        raise InputError(f"{directory}: not a directory")
    chains = []
    for path in sorted(directory.iterdir()):
        if path.suffix == ".json":
            chains.append(_load_chain(path))
        elif path.suffix == ".jsonl":
            with open(path) as fh:
                chains.append(extract_event_chain(read_frames(fh, str(path))))
    if not chains:
        raise InputError(f"{directory}: no .json chains or .jsonl graph files")
    return chains


def cmd_learn(args) -> None:
    params = _params(args)
    chains = _sample_chains(Path(args.samples))
    model = learn_model(args.class_name, chains, params)
    existing = []
    out = Path(args.out)
    if out.exists():
        existing, _ = library_from_dict(_read_json(out))
    models = [m for m in existing if m.name != model.name] + [model]
    models.sort(key=lambda m: m.name)
    # fail early if the new model has nothing left at this w_min
    prepare_templates([model], params.w_min)
    config = {"command": "learn", "w_min": params.w_min,
              "classes": {m.name: m.samples for m in models}}
    _write_json(out, library_to_dict(models, params.w_min, config))


def cmd_segment(args) -> None:
    params = _params(args)
    chain = _load_chain(args.chain)
    segments = []
    manips = find_manipulators(chain, params) if not chain.is_empty() else ()
    for manip in manips:
        _, segs = segment_chain(chain, manip, params)
        segments += segs
    segments.sort(key=lambda s: (s.start, s.manipulator))
    _write_json(args.out, {"schema": SEGMENTS_SCHEMA, "config": {"command": "segment", **params.to_dict()},
                           "manipulators": list(manips), "segments": [s.to_dict() for s in segments]})


def _load_segments(path) -> list[ActionSegment]:
    data = _read_json(path)
    if not isinstance(data, dict) or data.get("schema") != SEGMENTS_SCHEMA:
        raise InputError(f"{path}: expected a {SEGMENTS_SCHEMA} file")
    try:
        return [ActionSegment.from_dict(d) for d in data["segments"]]
    except (InputError, KeyError) as exc:
        raise InputError(f"{path}: {exc}") from None


def cmd_recognize(args) -> None:
    models, file_w_min = _load_models(args.models)
    params = _params(args, **({} if args.w_min is not None else {"w_min": file_w_min}))
    chain = _load_chain(args.chain)
    templates = prepare_templates(models, params.w_min)
    config = {"command": "recognize", **params.to_dict(), "scan": args.scan, "split_streams": not args.no_split,
              "models": [m.name for m in models]}
    entries = []
    if args.scan:
        for det in scan_match(chain, models, params, slack=args.slack, templates=templates):
            entries.append({"start_frame": det.segment.start, "end_frame": det.segment.end, "confidence": 1.0,
                            "score": round(det.delta, 6), "columns": [det.col_start, det.col_end],
                            "hypothesis": [{"label": det.label, "delta": round(det.delta, 6), "manipulator": None,
                                            "primary": None, "secondaries": []}]})
    elif not chain.is_empty():
        if args.segments:
            segments = _load_segments(args.segments)
        else:
            segments = []
            for manip in find_manipulators(chain, params):
                segments += segment_chain(chain, manip, params)[1]
        clean = {}
        for seg in sorted(segments, key=lambda s: (s.start, s.manipulator)):
            if seg.manipulator not in clean:
                clean[seg.manipulator] = denoise_manipulator_rows(chain, seg.manipulator, params.min_event_frames)
            res = recognize_segment(clean[seg.manipulator], seg, models, params, not args.no_split, templates)
            entries.append(res.to_dict())
    _write_json(args.out, {"schema": RESULT_SCHEMA, "config": config, "segments": entries})


def _result_segments(data, path) -> tuple[list[ActionSegment], list[str]]:
    if not isinstance(data, dict) or data.get("schema") != RESULT_SCHEMA:
        raise InputError(f"{path}: expected a {RESULT_SCHEMA} file")
    out = []
    try:
        for k, e in enumerate(data["segments"]):
            hyp = e["hypothesis"]
            manip = hyp[0]["manipulator"] if hyp and hyp[0]["manipulator"] is not None else -1
            labels = tuple(h["label"] for h in hyp) or (UNKNOWN,)
            out.append(ActionSegment(int(e["start_frame"]), int(e["end_frame"]), float(e["confidence"]),
                                     int(manip), labels=labels))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: segment {k}: {exc}") from None
    return out, list(data.get("config", {}).get("models", []))


def cmd_eval(args) -> None:
    segments, known = _result_segments(_read_json(args.result), args.result)
    try:
        with open(args.truth) as fh:
            truth = GroundTruth.read_jsonl(fh, args.truth)
    except OSError as exc:
        raise InputError(f"{args.truth}: {exc.strerror}") from None
    known = known or None
    by_hand: dict[int, list[ActionSegment]] = {}
    for s in segments:
        by_hand.setdefault(s.manipulator, []).append(s)
    tracks = [to_timeline(v, None, args.contiguous, truth.frame_range) for _, v in sorted(by_hand.items())]
    if not tracks:
        tracks = [to_timeline([], None, False, truth.frame_range)]
    predicted = merge_timelines(tracks)
    report = evaluate_recognition(segments, truth, known)
    out = {"schema": REPORT_SCHEMA,
           "config": {"command": "eval", "contiguous": args.contiguous, "per_label": args.per_label,
                      "known_labels": known},
           "frames": truth.frame_range[1] - truth.frame_range[0],
           "framewise_accuracy": round(framewise_accuracy(predicted, truth, args.per_label, known), 6),
           **report.to_dict()}
    _write_json(args.report, out)


def cmd_synth(args) -> None:
    for p in (args.flicker, args.relabel):
        if not 0.0 <= p <= 1.0:
            raise UsageError(f"probability {p} outside [0, 1]")
    steps = steps_from_dict(_read_json(args.script))
    frames, truth = synthesize(steps, seed=args.seed)
    frames = inject_noise(frames, args.flicker, args.relabel, seed=args.seed)
    config = {"command": "synth", "script": Path(args.script).name, "seed": args.seed,
              "flicker": args.flicker, "relabel": args.relabel}
    with open(args.out, "w") as fh:
        fh.write(_header(GRAPHS_SCHEMA, config))
        write_frames(frames, fh)
    with open(args.truth, "w") as fh:
        fh.write(_header(TRUTH_SCHEMA, config))
        truth.write_jsonl(fh)


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    d = Params()
    p = _Parser(prog="secseg", description="Segment and recognise manipulation actions from event chains.")
    from . import __version__

    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("extract", help="scene-graph JSONL -> event chain")
    s.add_argument("--graphs", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--boxes", action="store_true", help="derive relations from node bounding boxes")
    s.add_argument("--extended-alphabet", action="store_true", help="emit O for contained boxes")
    s.set_defaults(fn=cmd_extract)

    s = sub.add_parser("learn", help="fold sample chains into a class model")
    s.add_argument("--class", dest="class_name", required=True)
    s.add_argument("--samples", required=True, help="directory of chain .json or graph .jsonl files")
    s.add_argument("--out", required=True, help="model library; merged into when it exists")
    s.add_argument("--w-min", type=float, default=d.w_min)
    s.set_defaults(fn=cmd_learn)

    def seg_flags(s):
        s.add_argument("--hands", type=int, default=d.hands)
        s.add_argument("--tau-conf", type=float, default=d.tau_conf)
        s.add_argument("--tau-merge", type=float, default=d.tau_merge)
        s.add_argument("--min-event-frames", type=int, default=d.min_event_frames)

    s = sub.add_parser("segment", help="decompose a chain into action segments")
    s.add_argument("--chain", required=True)
    s.add_argument("--out", required=True)
    seg_flags(s)
    s.set_defaults(fn=cmd_segment)

    s = sub.add_parser("recognize", help="label segments against a model library")
    s.add_argument("--chain", required=True)
    s.add_argument("--models", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--tau-sem", type=float, default=d.tau_sem)
    s.add_argument("--w-min", type=float, default=None, help="defaults to the value stored in the library")
    s.add_argument("--scan", action="store_true", help="sliding-window matching instead of segmentation")
    s.add_argument("--slack", type=int, default=2, help="extra window columns for --scan")
    s.add_argument("--segments", help="reuse a segment file instead of segmenting again")
    s.add_argument("--no-split", action="store_true", help="keep all secondaries in one stream")
    seg_flags(s)
    s.set_defaults(fn=cmd_recognize)

    s = sub.add_parser("eval", help="score a result file against ground truth")
    s.add_argument("--result", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--report", required=True)
    s.add_argument("--contiguous", action="store_true", help="extend each segment up to the next one")
    s.add_argument("--per-label", action="store_true", help="Jaccard frame score instead of exact sets")
    s.set_defaults(fn=cmd_eval)

    s = sub.add_parser("synth", help="render a scripted activity to scene graphs")
    s.add_argument("--script", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--flicker", type=float, default=0.0)
    s.add_argument("--relabel", type=float, default=0.0)
    s.add_argument("--out", required=True)
    s.add_argument("--truth", required=True)
    s.set_defaults(fn=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except UsageError as exc:
        print(f"secseg {args.command}: usage error: {exc}", file=sys.stderr)
        return 1
    except InputError as exc:
        print(f"secseg {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
