"""Operator CLI: a thin client over the stitchfuzz service API.

Every subcommand talks to the HTTP surface. With ``--server`` (or
``STITCH_SERVER``) requests go to a running instance; otherwise an
in-process transport is used, so one-shot invocations need no daemon.

Config precedence: flags > STITCH_* environment variables > defaults.
Exit codes: 0 success, 1 user/input error, 2 internal or backend error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

EXIT_OK = 0
EXIT_USER = 1
EXIT_INTERNAL = 2

ENV_PREFIX = "STITCH_"


def _env(name: str, default=None):
    return os.environ.get(ENV_PREFIX + name, default)


def _env_int(name: str):
    raw = _env(name)
    return int(raw) if raw is not None else None


def _env_float(name: str):
    raw = _env(name)
    return float(raw) if raw is not None else None


class ServiceClient:
    """Uniform .get/.post over a remote server or the in-process app."""

    def __init__(self, server: str | None):
        if server:
            import httpx

            self._client = httpx.Client(base_url=server, timeout=60.0)
        else:
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DeprecationWarning)
                from fastapi.testclient import TestClient

            from .service import create_app

            self._client = TestClient(create_app())

    def get(self, path: str, **kw):
        return self._client.get(path, **kw)

    def post(self, path: str, payload: dict):
        return self._client.post(path, json=payload)


def _fail(resp) -> int:
    """Print an HTTP error payload and choose the exit code."""
    try:
        detail = resp.json().get("detail", resp.text)
    except Exception:
        detail = resp.text
    if isinstance(detail, dict):
        message = detail.get("error") or detail.get("message") or json.dumps(detail)
        extras = detail.get("violations") or []
        print(f"error: {message}", file=sys.stderr)
        for line in extras:
            print(f"  {line}", file=sys.stderr)
    else:
        print(f"error: {detail}", file=sys.stderr)
    return EXIT_INTERNAL if resp.status_code >= 500 else EXIT_USER


def _backend_payload(args) -> dict:
    payload = {"backend": args.backend}
    if args.harness:
        payload["harness_path"] = args.harness
    return payload


# --- subcommands ---


def cmd_validate(client: ServiceClient, args) -> int:
    resp = client.post("/spec/validate", {"spec_path": args.spec})
    if resp.status_code != 200:
        return _fail(resp)
    body = resp.json()
    if not body["ok"]:
        for err in body["errors"]:
            print(f"error: {err}", file=sys.stderr)
        return EXIT_USER
    print(f"spec ok: {body['blocks']} blocks, {body['types']} types")
    for name in body["block_names"]:
        print(f"  block {name}")
    for warning in body["warnings"]:
        print(f"warning: {warning}", file=sys.stderr)
    return EXIT_OK


def cmd_fuzz(client: ServiceClient, args) -> int:
    if args.budget_execs is None and args.budget_secs is None:
        print("error: a budget is required (--budget-execs or --budget-secs)",
              file=sys.stderr)
        return EXIT_USER
    payload = {
        "spec_path": args.spec,
        "corpus_dir": args.corpus,
        "seed": args.seed,
        "budget_execs": args.budget_execs,
        "budget_secs": args.budget_secs,
        "workers": args.workers,
        "baseline": args.baseline,
        **_backend_payload(args),
    }
    if args.p_hint is not None:
        payload["p_hint"] = args.p_hint
    if args.param_ratio is not None:
        payload["param_op_ratio"] = args.param_ratio
    if args.stop_after_crashes is not None:
        payload["stop_after_crashes"] = args.stop_after_crashes
    resp = client.post("/campaigns", payload)
    if resp.status_code != 200:
        return _fail(resp)
    campaign_id = resp.json()["campaign_id"]
    print(f"campaign {campaign_id} started", file=sys.stderr)

    last_line = 0.0
    while True:
        status = client.get(f"/campaigns/{campaign_id}").json()
        if status["state"] == "error":
            print(f"error: {status['error']}", file=sys.stderr)
            return EXIT_INTERNAL
        stats = status.get("stats") or {}
        now = time.monotonic()
        if status["state"] == "running" and now - last_line >= 2.0:
            print(
                f"  execs={stats.get('executions', 0)} "
                f"corpus={stats.get('corpus_size', 0)} "
                f"edges={stats.get('distinct_edges', 0)} "
                f"crashes={stats.get('unique_crashes', 0)}",
                file=sys.stderr,
            )
            last_line = now
        if status["state"] == "done":
            print(
                f"done: executions={stats.get('executions')} "
                f"corpus={stats.get('corpus_size')} "
                f"edges={stats.get('distinct_edges')} "
                f"unique_crashes={stats.get('unique_crashes')}"
            )
            for crash in status.get("crashes", []):
                print(
                    f"  crash {crash['block']}/{crash['crash_id']} "
                    f"found at exec {crash['discovery_execs']}"
                )
            if not args.baseline:
                print(f"corpus written to {args.corpus}")
            return EXIT_OK
        time.sleep(args.poll_interval)


def cmd_exec(client: ServiceClient, args) -> int:
    payload = {
        "spec_path": args.spec,
        "testcase_path": args.testcase,
        "exec_timeout_secs": args.timeout,
        **_backend_payload(args),
    }
    resp = client.post("/exec", payload)
    if resp.status_code != 200:
        return _fail(resp)
    outcome = resp.json()["outcome"]
    print(f"{outcome['summary']}, {outcome['coverage_edges']} edges")
    return EXIT_OK


def cmd_minimize(client: ServiceClient, args) -> int:
    payload = {
        "spec_path": args.spec,
        "testcase_path": args.testcase,
        "out_path": args.out,
        "budget_execs": args.budget,
        **_backend_payload(args),
    }
    resp = client.post("/minimize", payload)
    if resp.status_code != 200:
        return _fail(resp)
    body = resp.json()
    print(
        f"minimized {body['block']}/{body['crash_id']}: "
        f"{body['original_instances']} -> {body['minimized_instances']} instances"
        + (" (partial)" if body["minimization_partial"] else "")
    )
    if body.get("out_path"):
        print(f"written to {body['out_path']}")
    return EXIT_OK


def cmd_repro(client: ServiceClient, args) -> int:
    payload = {
        "spec_path": args.spec,
        "testcase_path": args.testcase,
        "out_path": args.out,
    }
    resp = client.post("/reproducers", payload)
    if resp.status_code != 200:
        return _fail(resp)
    print(f"reproducer written to {resp.json()['out_path']}")
    return EXIT_OK


def cmd_stats(client: ServiceClient, args) -> int:
    resp = client.get("/stats", params={"corpus_dir": args.corpus})
    if resp.status_code != 200:
        return _fail(resp)
    stats = resp.json()
    width = max(len(k) for k in stats)
    for key in sorted(stats):
        print(f"{key.ljust(width)}  {stats[key]}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stitchfuzz",
        description="coverage-guided fuzzing by stitching typed code blocks",
    )
    parser.add_argument(
        "--server",
        default=_env("SERVER"),
        help="service base URL; default is an in-process instance",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_spec(p):
        p.add_argument("--spec", default=_env("SPEC"), required=_env("SPEC") is None,
                       help="path to the spec JSON file")

    def add_backend(p):
        p.add_argument("--backend", choices=["virtual", "native"],
                       default=_env("BACKEND", "virtual"))
        p.add_argument("--harness", default=_env("HARNESS"),
                       help="compiled harness binary (native backend)")

    p = sub.add_parser("validate", help="parse a spec and report problems")
    add_spec(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("fuzz", help="run a fuzzing campaign")
    add_spec(p)
    add_backend(p)
    p.add_argument("--seed", type=int, default=_env_int("SEED") or 0)
    p.add_argument("--budget-execs", type=int, default=_env_int("BUDGET_EXECS"))
    p.add_argument("--budget-secs", type=float, default=_env_float("BUDGET_SECS"))
    p.add_argument("--corpus", default=_env("CORPUS", "corpus"),
                   help="corpus output directory")
    p.add_argument("--workers", type=int, default=_env_int("WORKERS") or 1)
    p.add_argument("--p-hint", dest="p_hint", type=float,
                   default=_env_float("P_HINT"))
    p.add_argument("--param-ratio", dest="param_ratio", type=float, default=None,
                   help="parameter-mutation share of the operator mix")
    p.add_argument("--stop-after-crashes", type=int, default=None)
    p.add_argument("--baseline", action="store_true",
                   help="test-only mode: uniform fixed-length sampling, no guidance")
    p.add_argument("--poll-interval", type=float, default=0.2,
                   help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_fuzz)

    p = sub.add_parser("exec", help="execute one testcase and print the outcome")
    add_spec(p)
    add_backend(p)
    p.add_argument("--testcase", required=True, help="wire-format testcase path")
    p.add_argument("--timeout", type=float, default=10.0)
    p.set_defaults(func=cmd_exec)

    p = sub.add_parser("minimize", help="minimize a crashing testcase")
    add_spec(p)
    add_backend(p)
    p.add_argument("--testcase", required=True)
    p.add_argument("--out", default=None, help="write the minimized testcase here")
    p.add_argument("--budget", type=int, default=20000,
                   help="execution budget for the reduction")
    p.set_defaults(func=cmd_minimize)

    p = sub.add_parser("repro", help="emit a standalone native reproducer")
    add_spec(p)
    p.add_argument("--testcase", required=True)
    p.add_argument("--out", required=True, help="output .cpp path")
    p.set_defaults(func=cmd_repro)

    p = sub.add_parser("stats", help="pretty-print a corpus dir's stats.json")
    p.add_argument("--corpus", default=_env("CORPUS", "corpus"))
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        client = ServiceClient(args.server)
    except Exception as e:
        print(f"error: cannot reach service: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    try:
        return args.func(client, args)
    except KeyboardInterrupt:
        return EXIT_INTERNAL
    except Exception as e:
        # transport-level failures (unreachable server etc.)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())
