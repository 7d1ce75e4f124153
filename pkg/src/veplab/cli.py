"""Command-line front end: stimulus schedules, synthetic datasets, analysis,
and the statistical battery.

Exit codes: 0 success, 2 input error, 3 numeric degeneracy.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields

from .decode import Decision
from .errors import DegenerateDataError, InputError
from .pipeline import (
    Report,
    analyze_dataset,
    analyze_recording,
    config_for_task,
    emit_report,
    run_pipeline,
    stats_report,
)
from .stimgen import (
    GABOR_PULSE,
    PATTERN_REVERSAL,
    RADIAL_MOTION,
    StimulusSpec,
    build_frame_schedule,
    write_frame_stack,
)
from .synth import SynthConfig, SynthProtocol, TaskProtocol, default_protocol, synth_dataset

_PARADIGM_ALIAS = {
    "reversal": PATTERN_REVERSAL,
    "radial": RADIAL_MOTION,
    "gabor": GABOR_PULSE,
}


def _cmd_stimgen(args) -> int:
    spec = StimulusSpec(
        paradigm=_PARADIGM_ALIAS[args.paradigm],
        stim_freq_hz=args.freq,
        refresh_rate_hz=args.refresh,
        duration_s=args.duration,
    )
    schedule = build_frame_schedule(spec)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(schedule.to_json())
        fh.write("\n")
    print(f"wrote {schedule.n_frames} frames to {args.out}")
    if args.render_dir:
        n = write_frame_stack(spec, schedule, args.render_dir)
        print(f"rendered {n} PGM frames to {args.render_dir}")
    return 0


def _load_synth_config(path) -> tuple[SynthConfig, SynthProtocol | None]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: not valid JSON: {exc}")
    protocol = None
    proto_raw = raw.pop("protocol", None)
    known = {f.name for f in fields(SynthConfig)}
    unknown = set(raw) - known
    if unknown:
        raise InputError(f"{path}: unknown config fields {sorted(unknown)}")
    cfg = SynthConfig(**raw)
    if proto_raw is not None:
        tasks = tuple(
            TaskProtocol(
                paradigm=t["paradigm"],
                targets_hz=tuple(float(f) for f in t["targets_hz"]),
                trials_per_target=int(t["trials_per_target"]),
                trial_s=float(t.get("trial_s", 5.0)),
                rest_s=float(t.get("rest_s", 5.0)),
            )
            for t in proto_raw["tasks"]
        )
        protocol = SynthProtocol(
            tasks=tasks,
            n_subjects=int(proto_raw.get("n_subjects", 14)),
            fs_hz=float(proto_raw.get("fs_hz", 500.0)),
        )
    return cfg, protocol


def _cmd_synth(args) -> int:
    if args.config:
        cfg, protocol = _load_synth_config(args.config)
    else:
        cfg, protocol = SynthConfig(), None
    if protocol is None:
        protocol = default_protocol()
    if args.subjects is not None:
        protocol = SynthProtocol(
            tasks=protocol.tasks,
            n_subjects=args.subjects,
            fs_hz=protocol.fs_hz,
            baseline_s=protocol.baseline_s,
            lead_out_s=protocol.lead_out_s,
        )
    manifest = synth_dataset(cfg, protocol, args.out)
    n_files = sum(len(s["tasks"]) for s in manifest["subjects"])
    print(f"wrote {n_files} recording/marker pairs + manifest to {args.out}")
    return 0


def _write_decisions_csv(trials, offsets, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        n_targets = len(trials[0].decision.rho) if trials else 1
        rho_cols = ",".join(f"rho_{k + 1}" for k in range(n_targets))
        fh.write(f"trial,predicted_hz,true_hz,{rho_cols},pass\n")

        def write_row(i: int, dec: Decision, true_hz: float):
            rhos = ",".join(repr(r) for r in dec.rho)
            flag = "" if dec.threshold_pass is None else str(int(dec.threshold_pass))
            fh.write(f"{i},{dec.predicted_hz!r},{true_hz!r},{rhos},{flag}\n")

        for tr in trials:
            write_row(tr.trial, tr.decision, tr.true_hz)
        for j, dec in enumerate(offsets):
            write_row(len(trials) + j, dec, 0.0)


def _cmd_analyze(args) -> int:
    fmt = args.format
    if args.dataset:
        report = analyze_dataset(args.dataset)
    else:
        if not (args.recording and args.markers and args.task):
            raise InputError(
                "analyze needs either --dataset or --recording/--markers/--task"
            )
        cfg = config_for_task(
            args.task, recording_path=args.recording, markers_path=args.markers
        )
        if args.decisions:
            result = analyze_recording(cfg)
            _write_decisions_csv(result.trials, result.offset_decisions, args.decisions)
        report = run_pipeline(cfg)
    emit_report(report, fmt, args.out)
    print(f"wrote {fmt} report to {args.out}")
    return 0


def _cmd_stats(args) -> int:
    reports = []
    for name in sorted(os.listdir(args.reports)):
        if name.endswith(".json"):
            with open(os.path.join(args.reports, name), "r", encoding="utf-8") as fh:
                try:
                    data = json.load(fh)
                except json.JSONDecodeError as exc:
                    raise InputError(f"{name}: not a report JSON: {exc}")
            if "tasks" in data:
                reports.append(Report(tasks=data["tasks"]))
    if not reports:
        raise InputError(f"no report JSON files found in {args.reports}")
    merged: dict[int, dict] = {}
    for rep in reports:
        for t in rep.tasks:
            entry = merged.setdefault(int(t["task"]), dict(t, rows=[]))
            entry["rows"].extend(t["rows"])
    combined = Report(tasks=[merged[k] for k in sorted(merged)])
    out = stats_report(combined, test=args.test, metric=args.metric)
    text = json.dumps(out, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="veplab",
        description="VEP stimulus schedules, synthetic EEG, and offline analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stimgen", help="build a frame-accurate stimulus schedule")
    p.add_argument("--paradigm", required=True, choices=sorted(_PARADIGM_ALIAS))
    p.add_argument("--freq", required=True, type=float, help="stimulus frequency, Hz")
    p.add_argument("--refresh", type=float, default=144.0, help="display refresh, Hz")
    p.add_argument("--duration", type=float, default=5.0, help="seconds")
    p.add_argument("--out", required=True, help="schedule JSON path")
    p.add_argument("--render-dir", help="also render every frame as PGM here")
    p.set_defaults(fn=_cmd_stimgen)

    p = sub.add_parser("synth", help="generate a synthetic ground-truth dataset")
    p.add_argument("--config", help="JSON with generator fields (optional)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--subjects", type=int, help="override subject count")
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("analyze", help="run the offline analysis pipeline")
    p.add_argument("--recording", help="recording CSV")
    p.add_argument("--markers", help="marker CSV")
    p.add_argument("--task", type=int, choices=(1, 2, 3), help="task id")
    p.add_argument("--dataset", help="dataset manifest JSON (batch mode)")
    p.add_argument("--out", required=True, help="report path")
    p.add_argument("--format", choices=("json", "markdown"), default="json")
    p.add_argument("--decisions", help="also write per-trial decisions CSV here")
    p.set_defaults(fn=_cmd_analyze)

    p = sub.add_parser("stats", help="statistical battery over report files")
    p.add_argument("--reports", required=True, help="directory of report JSONs")
    p.add_argument("--test", required=True, choices=("rm-anova", "posthoc"))
    p.add_argument("--metric", choices=("snr", "accuracy", "fatigue"), default="snr")
    p.add_argument("--out", help="write stats JSON here (default: stdout)")
    p.set_defaults(fn=_cmd_stats)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DegenerateDataError as exc:
        print(f"degenerate data: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
