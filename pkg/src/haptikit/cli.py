"""Command line interface.

Subcommands: characterize (stability | friction | frf), simulate, serve,
replay, analyze. Characterization results land as CSV plus a JSON summary;
sessions produce session.config.json / session.log.jsonl; analyze emits
report.json and an aligned-text report.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import characterization as ch
from .controller import ImpedanceConfig
from .device import DeviceParams
from .service import (SessionConfig, analyze_sessions, default_session_config,
                      replay_log, simulate_session, REPORT_NAME)


def _load_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _experiment_setup(args, experiment: str):
    """Device + overlay for one characterization experiment.

    Config file keys: "device", "overlay", and optionally one section per
    experiment with that experiment's knobs. The friction test defaults to
    the full-friction device; stability and frf default to the transparent
    bench device with the documented viscous term.
    """
    cfg = _load_json(args.config) if args.config else {}
    if "device" in cfg:
        device = DeviceParams.from_json_dict(cfg["device"])
    elif experiment == "friction":
        device = DeviceParams()
    else:
        device = ch.bench_device()
    if "overlay" in cfg:
        overlay = ImpedanceConfig.from_json_dict(cfg["overlay"])
    else:
        overlay = ImpedanceConfig(stiffness_K=ch.FRF_OVERLAY_STIFFNESS,
                                  torque_limit=device.torque_limit)
    return device, overlay, cfg.get(experiment, {})


def _write_summary(out_dir: Path, name: str, summary: dict) -> None:
    with open(out_dir / f"{name}.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_characterize(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    device, overlay, opts = _experiment_setup(args, args.experiment)

    if args.experiment == "frf":
        chirp = ch.make_chirp(opts.get("f0", ch.FRF_CHIRP_F0),
                              opts.get("f1", ch.FRF_CHIRP_F1),
                              opts.get("duration", ch.FRF_CHIRP_DURATION),
                              opts.get("amplitude", ch.FRF_CHIRP_AMPLITUDE),
                              overlay.loop_rate)
        result = ch.measure_frf(device, overlay, chirp, runs=args.runs,
                                seed=args.seed,
                                noise_sd=opts.get("noise_sd", ch.FRF_NOISE_SD))
        ch.write_frf_csv(result, out_dir / "frf.csv")
        summary = ch.frf_summary(result)
        _write_summary(out_dir, "frf", summary)
    elif args.experiment == "stability":
        result = ch.stability_sweep(device, overlay,
                                    k_start=opts.get("k_start", 1.0),
                                    k_step=opts.get("k_step", 0.5),
                                    k_max=opts.get("k_max", 20.0),
                                    perturbation=opts.get("perturbation", 0.05))
        ch.write_sweep_csv(result, out_dir / "stability.csv")
        summary = ch.sweep_summary(result)
        _write_summary(out_dir, "stability", summary)
    else:
        positions = opts.get("positions", list(ch.DEFAULT_FRICTION_POSITIONS))
        result = ch.friction_test(device, positions=positions,
                                  ramp_rate=opts.get("ramp_rate",
                                                     ch.DEFAULT_FRICTION_RAMP_RATE))
        ch.write_friction_csv(result, out_dir / "friction.csv")
        summary = ch.friction_summary(result)
        _write_summary(out_dir, "friction", summary)

    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _session_config(args) -> SessionConfig:
    if args.config:
        cfg = SessionConfig.from_json_dict(_load_json(args.config))
        if args.seed is not None:
            cfg.seed = args.seed
            cfg.plan.seed = args.seed
        return cfg
    return default_session_config(participant_id=args.participant,
                                  seed=args.seed if args.seed is not None else 0)


def cmd_simulate(args) -> int:
    if args.operator != "synthetic":
        print(f"unknown operator {args.operator!r}; only 'synthetic' runs headless",
              file=sys.stderr)
        return 2
    config = _session_config(args)
    log_path = simulate_session(config, args.out)
    print(f"session log: {log_path}")
    return 0


def cmd_serve(args) -> int:
    from .server import serve

    config = _session_config(args)
    serve(config, args.out, port=args.port, resume=args.resume)
    return 0


def cmd_replay(args) -> int:
    result = replay_log(args.log)
    if result.ok:
        print(f"replay OK: {result.recomputed} records reproduced exactly")
        return 0
    print(f"replay found {len(result.mismatches)} mismatching records:")
    for m in result.mismatches[:10]:
        print(f"  record #{m['index']}")
        print(f"    logged:     {m['logged']}")
        print(f"    recomputed: {m['recomputed']}")
    return 1


def cmd_analyze(args) -> int:
    out = Path(args.out) if args.out else Path(args.sessions) / REPORT_NAME
    report = analyze_sessions(args.sessions, out)
    from .stats import report_to_text
    print(report_to_text(report), end="")
    print(f"report written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="haptikit",
                                description="coupled-trigger haptic device "
                                            "twin and study tooling")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("characterize", help="run a bench experiment")
    c.add_argument("experiment", choices=("stability", "friction", "frf"))
    c.add_argument("--config", help="JSON file with device/overlay/experiment knobs")
    c.add_argument("--runs", type=int, default=10, help="chirp repetitions (frf)")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", default="characterization", help="output directory")
    c.set_defaults(func=cmd_characterize)

    s = sub.add_parser("simulate", help="run a headless synthetic session")
    s.add_argument("--config", help="session config JSON")
    s.add_argument("--participant", type=int, default=0)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--operator", default="synthetic")
    s.add_argument("--out", default="session", help="output directory")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("serve", help="serve one live session over WebSocket")
    v.add_argument("--port", type=int, default=8765)
    v.add_argument("--config", help="session config JSON")
    v.add_argument("--participant", type=int, default=0)
    v.add_argument("--seed", type=int, default=None)
    v.add_argument("--out", default="session", help="output directory")
    v.add_argument("--resume", action="store_true",
                   help="continue an interrupted session log")
    v.set_defaults(func=cmd_serve)

    r = sub.add_parser("replay", help="recompute a session log and diff it")
    r.add_argument("log")
    r.set_defaults(func=cmd_replay)

    a = sub.add_parser("analyze", help="build the stats report from session logs")
    a.add_argument("--sessions", required=True, help="directory of session logs")
    a.add_argument("--out", help="report.json path")
    a.set_defaults(func=cmd_analyze)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
