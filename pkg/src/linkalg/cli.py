"""Command-line client for the linkalg service.

Without ``--server`` the service runs in-process; the CLI talks to it over
the same HTTP/JSON interface either way.

Exit codes: 0 property holds / run complete, 1 property fails, 2 unknown
because of horizon truncation, 3 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path
from typing import Any, Sequence

import httpx
from pydantic import ValidationError

from .config import load
from .trace import dumps

EXIT_OK, EXIT_FAIL, EXIT_UNKNOWN, EXIT_USAGE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", default="hidden",
                        help="hidden, exposed, star, two-node, or a JSON configuration file")
    common.add_argument("--protocol", choices=["csma", "csma-rts"])
    common.add_argument("--horizon", type=int)
    common.add_argument("--budget", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--max-retransmit", type=int, dest="max_retransmit")
    common.add_argument("--format", choices=["text", "machine-readable", "json"], default="text")
    common.add_argument("--server", help="base URL of a running service (default: in-process)")

    parser = _Parser(prog="linkalg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("explore", parents=[common], help="build the pLTS and print statistics")

    check = sub.add_parser("check", parents=[common], help="deadlock freedom and an eventuality query")
    mode = check.add_mutually_exclusive_group()
    mode.add_argument("--outright", dest="mode", action="store_const", const="outright")
    mode.add_argument("--min-prob", dest="mode", action="store_const", const="min-prob")
    check.add_argument("--query", choices=["delivery", "weak-delivery", "after-cts"], default="delivery")
    check.add_argument("--src")
    check.add_argument("--data")
    check.add_argument("--dest")
    check.add_argument("--threshold", default="1")
    check.add_argument("--no-deadlock", dest="deadlock", action="store_false")
    check.add_argument("--counterexample", default="counterexample.jsonl",
                       help="where to write the counterexample trace on failure")

    sim = sub.add_parser("simulate", parents=[common], help="Monte-Carlo simulation")
    sim.add_argument("--trials", type=int, default=1000)
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--target", action="store_true",
                     help="stop each run at the first delivery of the scenario's packet")

    bis = sub.add_parser("bisim", parents=[common], help="compare two compositions of the network")
    bis.add_argument("--left", help="nesting of node positions, e.g. '((0,1),2)'")
    bis.add_argument("--right", help="default: right-nested")
    bis.add_argument("--right-order", help="comma-separated node order of the right-hand side")

    tr = sub.add_parser("trace", parents=[common], help="export a seeded run or replay a trace file")
    tr.add_argument("--out", default="trace.jsonl")
    tr.add_argument("--replay", metavar="FILE")
    return parser


def _scenario_fields(args) -> dict[str, Any]:
    out: dict[str, Any] = {}
    path = Path(args.scenario)
    if args.scenario.endswith(".json") or path.is_file():
        try:
            out["config"] = json.loads(load(path).model_dump_json())
        except FileNotFoundError as exc:
            raise UsageError(f"no such configuration file: {path}") from exc
        except (ValidationError, json.JSONDecodeError) as exc:
            raise UsageError(f"invalid configuration {path}: {exc}") from exc
        out["scenario"] = None
    else:
        out["scenario"] = args.scenario
    for key in ("protocol", "horizon", "budget", "seed", "max_retransmit"):
        value = getattr(args, key)
        if value is not None:
            out[key] = value
    return out


def _client(server: str | None):
    if server:
        return httpx.Client(base_url=server, timeout=None)
    with warnings.catch_warnings():
        # starlette nags about its httpx-based transport; it is the in-process path we want
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient
    from .service import app
    return TestClient(app)


def _post(client, path: str, body: dict) -> dict:
    resp = client.post(path, json=body)
    if resp.status_code >= 400:
        try:
            detail = resp.json().get("detail")
        except ValueError:
            detail = resp.text
        if isinstance(detail, dict):
            detail = f"{detail.get('kind')}: {detail.get('message')}"
        raise UsageError(str(detail))
    return resp.json()


def _emit(args, result: dict, text: str) -> None:
    if args.format == "text":
        print(text)
    else:
        print(json.dumps(result, indent=2, sort_keys=True))


def _text_explore(r: dict) -> str:
    return (f"{r['scenario']} ({r['protocol']}): {r['states']} states, {r['transitions']} transitions, "
            f"{r['truncated']} truncated at horizon {r['horizon']} (max depth {r['max_depth']}, "
            f"normalized={r['normalized']}, por={r['por']})")


def _text_check(r: dict, written: str | None) -> str:
    lines = [f"{r['scenario']} ({r['protocol']}), {r['states']} states, {r['truncated']} truncated"]
    if r["deadlock_free"] is not None:
        lines.append("deadlock freedom: " + ("ok" if r["deadlock_free"]
                                              else f"FAILS at {r['deadlock_offending']} states"))
    lines.append(f"{r['query']} [{r['mode']}]: {r['verdict']} over {r['pre_transitions']} pre-transitions")
    if r.get("value") is not None:
        exact = "exact" if r["exact"] else f"frontier-optimistic bound {r['upper']}"
        lines.append(f"minimal probability >= {r['value']} (~{r['value_float']:.6f}, {exact}); "
                     f"threshold {r['threshold']}")
    if written:
        lines.append(f"counterexample trace written to {written}")
    return "\n".join(lines)


def _text_simulate(r: dict) -> str:
    lines = [f"{r['scenario']} ({r['protocol']}): {r['trials']} trials, seed {r['seed']}, "
             f"horizon {r['horizon']}",
             f"all packets delivered: {r['delivery_rate']:.4f}; horizon exhausted: {r['exhausted']}; "
             f"deadlocked: {r['deadlocked']}; mean collision slots: {r['mean_collisions']:.3f}"]
    for p in r["packets"]:
        lat = "n/a" if p["mean_latency"] is None else f"{p['mean_latency']:.2f}"
        lines.append(f"  {p['node']}->{p['dest']} ({p['data']}): delivered {p['rate']:.4f}, "
                     f"failed {p['failed']}, unresolved {p['unresolved']}, mean latency {lat} slots, "
                     f"attempts {p['attempts']}")
    if r.get("target") is not None:
        lines.append(f"target {r['target']}: rate {r['target_rate']:.4f}")
    return "\n".join(lines)


def _text_bisim(r: dict) -> str:
    head = (f"{r['scenario']} ({r['protocol']}): left {r['left_states']} states, right "
            f"{r['right_states']} states, {r['blocks']} classes after {r['rounds']} rounds")
    if r["bisimilar"]:
        return head + "\nbisimilar"
    wit = " . ".join(r["witness"]) if r["witness"] else "(probabilities differ; no trace witness)"
    return head + f"\nNOT bisimilar; only the {r['witness_side']} side can do: {wit}"


def _write_jsonl(path: str, records: list[dict]) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(dumps(rec) + "\n")


def run(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    with _client(args.server) as client:
        if args.command == "trace" and args.replay:
            try:
                lines = Path(args.replay).read_text().splitlines()
                records = [json.loads(x) for x in lines if x.strip()]
            except (OSError, json.JSONDecodeError) as exc:
                raise UsageError(f"cannot read trace {args.replay}: {exc}") from exc
            r = _post(client, "/replay", {"records": records})
            _emit(args, r, f"replay of {r['steps']} steps: " + (
                "identical" if r["ok"] else f"differs at step {r['mismatch_at']} ({r['detail']})"))
            return r["exit_code"]

        body = _scenario_fields(args)
        if args.command == "explore":
            r = _post(client, "/explore", body)
            _emit(args, r, _text_explore(r))
            return EXIT_OK
        if args.command == "check":
            body.update(mode=args.mode or "outright", query=args.query, src=args.src, data=args.data,
                        dest=args.dest, threshold=args.threshold, deadlock=args.deadlock)
            r = _post(client, "/check", body)
            written = None
            if r.get("counterexample"):
                _write_jsonl(args.counterexample, r["counterexample"])
                written = args.counterexample
            _emit(args, r, _text_check(r, written))
            return r["exit_code"]
        if args.command == "simulate":
            body.update(trials=args.trials, workers=args.workers, target=args.target)
            r = _post(client, "/simulate", body)
            _emit(args, r, _text_simulate(r))
            return EXIT_OK
        if args.command == "bisim":
            order = args.right_order.split(",") if args.right_order else None
            body.update(left_shape=args.left, right_shape=args.right, right_order=order)
            r = _post(client, "/bisim", body)
            _emit(args, r, _text_bisim(r))
            return r["exit_code"]
        if args.command == "trace":
            r = _post(client, "/trace", body)
            _write_jsonl(args.out, r["records"])
            end = r["records"][-1]
            _emit(args, {k: v for k, v in r.items() if k != "records"} | {"out": args.out, "end": end},
                  f"{len(r['records']) - 2} steps written to {args.out} (ended: {end['reason']})")
            return EXIT_OK
    raise UsageError(f"unknown command {args.command!r}")  # pragma: no cover


def main(argv: Sequence[str] | None = None) -> int:
    try:
        return run(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
