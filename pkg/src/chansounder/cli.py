"""Command-line entry point for batch use.

Subcommands: gen-pn, sound-sliding, sound-freq, campaign, validate.
Every output lands inside the chosen output directory (flag --out-dir,
else $CHANSOUNDER_OUT_DIR, else the working directory). With --json the
final stdout line is a machine-readable status object.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from chansounder import campaign, pn, pulse, sliding, sweep
from chansounder.exceptions import NoSignalError


def _out_dir(args) -> Path:
    root = args.out_dir or os.environ.get("CHANSOUNDER_OUT_DIR") or "."
    path = Path(root)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _emit(args, payload: dict):
    if args.json:
        print(json.dumps(payload))
    else:
        for item in payload.get("outputs", []):
            print(item)


def _cmd_gen_pn(args) -> dict:
    polynomial = int(args.polynomial, 0) if args.polynomial else None
    chips = pn.generate_glfsr(args.degree, polynomial, args.seed_state)
    target = _out_dir(args) / args.name
    pn.save_chips(chips, target)
    return {"outputs": [str(target)], "period_length": chips.period_length}


def _cmd_sound_sliding(args) -> dict:
    capture = pulse.read_iq(args.capture)
    polynomial = int(args.polynomial, 0) if args.polynomial else None
    chips = pn.generate_glfsr(args.degree, polynomial)
    taps = pulse.design_rrc(args.rolloff, args.span, args.sps)
    config = sliding.SounderConfig(
        chip_period=args.chip_period, pn_degree=args.degree,
        averaging_periods=args.periods,
        detection_threshold_db=args.threshold_db,
        tx_power_db=args.tx_power_db)
    profile = sliding.measure_sliding(capture, chips, taps, config,
                                      settle_periods=args.settle_periods)
    target = _out_dir(args) / args.name
    target.write_text(json.dumps(sliding.profile_to_json(profile), indent=2) + "\n")
    return {"outputs": [str(target)],
            "path_loss_db": profile.wideband_path_loss_db,
            "rms_delay_spread_s": profile.rms_delay_spread}


def _cmd_sound_freq(args) -> dict:
    plan = sweep.load_plan(args.plan)
    if len(args.captures) != plan.step_count:
        raise ValueError(
            f"need one capture per carrier step ({plan.step_count}), "
            f"got {len(args.captures)}"
        )
    tone = args.tone_offset if args.tone_offset is not None else float(plan.tone_offsets[0])
    losses = []
    for step, capture_path in enumerate(args.captures):
        capture = pulse.read_iq(capture_path)
        power = sweep.bin_power(capture, plan, tone)
        if power <= 0.0:
            raise NoSignalError(f"no power in the tone bin of step {step}")
        losses.append(args.tx_power_db - 10.0 * math.log10(power))
    loss_set = sweep.NarrowbandLossSet(per_carrier_loss_db=losses,
                                       transmitter_id=args.transmitter_id,
                                       tone_offset=tone)
    target = _out_dir(args) / args.name
    doc = sweep.losses_to_json(loss_set)
    target.write_text(json.dumps(doc, indent=2) + "\n")
    return {"outputs": [str(target)], "mean_path_loss_db": doc["mean_path_loss_db"]}


def _cmd_campaign(args) -> dict:
    scenario = campaign.load_scenario(args.scenario)
    records = campaign.run_campaign(scenario, seed_override=args.seed)
    out = _out_dir(args)
    records_path = out / "records.jsonl"
    campaign.export_records(records, records_path)
    outputs = [str(records_path)]
    for tx in scenario.transmitters:
        heatmap_path = out / f"heatmap_{tx.id}.csv"
        campaign.export_heatmap(records, tx.id, heatmap_path)
        outputs.append(str(heatmap_path))
    return {"outputs": outputs, "record_count": len(records)}


def _cmd_validate(args) -> dict:
    scenario = campaign.load_scenario(args.scenario)
    # frequency plans carry extra constraints checked at construction
    if scenario.mode == campaign.MODE_FREQUENCY:
        campaign._frequency_plans(scenario)
    return {"outputs": [], "valid": True,
            "mode": scenario.mode,
            "transmitters": len(scenario.transmitters),
            "locations": len(scenario.receiver_path)}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chansounder",
        description="Simulated sliding-correlator and stepped-frequency channel sounding")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true",
                        help="print a machine-readable status object")
    common.add_argument("--out-dir", default=None,
                        help="output directory (default $CHANSOUNDER_OUT_DIR or .)")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-pn", parents=[common],
                       help="emit one period of the PN chip sequence")
    g.add_argument("--degree", type=int, default=10)
    g.add_argument("--polynomial", default=None,
                   help="feedback polynomial as an integer (e.g. 0x409)")
    g.add_argument("--seed-state", type=int, default=1)
    g.add_argument("--name", default="chips.txt")
    g.set_defaults(handler=_cmd_gen_pn)

    s = sub.add_parser("sound-sliding", parents=[common], help="delay profile from one I/Q capture")
    s.add_argument("--capture", required=True)
    s.add_argument("--degree", type=int, default=10)
    s.add_argument("--polynomial", default=None)
    s.add_argument("--chip-period", type=float, default=60e-9)
    s.add_argument("--rolloff", type=float, default=0.35)
    s.add_argument("--span", type=int, default=12)
    s.add_argument("--sps", type=int, default=4)
    s.add_argument("--periods", type=int, default=10)
    s.add_argument("--settle-periods", type=int, default=1)
    s.add_argument("--threshold-db", type=float, default=30.0)
    s.add_argument("--tx-power-db", type=float, default=0.0)
    s.add_argument("--name", default="profile.json")
    s.set_defaults(handler=_cmd_sound_sliding)

    f = sub.add_parser("sound-freq", parents=[common], help="narrowband losses from sweep captures")
    f.add_argument("--plan", required=True, help="sweep plan JSON")
    f.add_argument("--tone-offset", type=float, default=None)
    f.add_argument("--tx-power-db", type=float, default=0.0)
    f.add_argument("--transmitter-id", default="tx")
    f.add_argument("--name", default="losses.json")
    f.add_argument("captures", nargs="+", help="one I/Q capture per carrier step")
    f.set_defaults(handler=_cmd_sound_freq)

    c = sub.add_parser("campaign", parents=[common], help="run a scenario end to end")
    c.add_argument("--scenario", required=True)
    c.add_argument("--seed", type=int, default=None, help="master seed override")
    c.set_defaults(handler=_cmd_campaign)

    v = sub.add_parser("validate", parents=[common], help="lint a scenario file")
    v.add_argument("--scenario", required=True)
    v.set_defaults(handler=_cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        payload = args.handler(args)
    except (ValueError, OSError, NoSignalError, KeyError) as exc:
        message = f"{type(exc).__name__}: {exc}"
        if args.json:
            print(json.dumps({"status": "error", "message": message}))
        print(message, file=sys.stderr)
        return 2
    payload["status"] = "ok"
    _emit(args, payload)
    return 0


if __name__ == "__main__":
    sys.exit(main())
