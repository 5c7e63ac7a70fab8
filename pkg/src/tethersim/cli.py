"""Command-line front end; a thin client of the HTTP service.

By default requests are served in process (the FastAPI app is mounted on an
ASGI transport, so no server needs to run); ``--server URL`` switches to a
remote instance.  Subcommands:

* ``simulate``       run one closed-loop experiment, write trace + metrics
* ``sweep``          grid campaign, write a long-format metrics table
* ``flatness-check`` open-loop round-trip demonstration
* ``observer-demo``  observer convergence/disambiguation summary
* ``serve``          run the HTTP service with uvicorn

Exit codes: 0 success, 1 check failed, 2 configuration error,
3 simulation diverged, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys
from typing import Any

import httpx

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_IO = 4


def _post(path: str, payload: dict[str, Any], server: str | None) -> tuple[int, dict]:
    if server is not None:
        resp = httpx.post(server.rstrip("/") + path, json=payload, timeout=600.0)
        return resp.status_code, resp.json()

    from .service import create_app

    async def call() -> tuple[int, dict]:
        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(
            transport=transport, base_url="http://tethersim.internal", timeout=600.0
        ) as client:
            resp = await client.post(path, json=payload)
            return resp.status_code, resp.json()

    return asyncio.run(call())


def _config_payload(args: argparse.Namespace) -> dict[str, Any]:
    """Resolve --config (path or bundled name) and --set overrides."""
    payload: dict[str, Any] = {"config": {}, "overrides": {}}
    if args.config:
        if os.path.exists(args.config):
            from .config import parse_config_text
            from .sim import ConfigError

            try:
                with open(args.config, "r", encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                print(f"error: cannot read config: {exc}", file=sys.stderr)
                raise SystemExit(EXIT_IO)
            try:
                payload["config"] = parse_config_text(text)
            except ConfigError as exc:
                print(f"error: {exc}", file=sys.stderr)
                raise SystemExit(EXIT_CONFIG)
        else:
            payload["config_name"] = args.config
    for item in args.set or []:
        if "=" not in item:
            print(f"error: --set expects key=value, got {item!r}", file=sys.stderr)
            raise SystemExit(EXIT_CONFIG)
        key, _, value = item.partition("=")
        payload["overrides"][key.strip()] = value.strip()
    if args.seed is not None:
        payload["seed"] = args.seed
    return payload


def _write(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(text)
    except OSError as exc:
        print(f"error: cannot write {path}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_IO)


def _print_metrics(body: dict) -> None:
    print(f"seed: {body['seed']}")
    rows = list(body.get("phases", []))
    if body.get("overall"):
        rows.append(body["overall"])
    if not rows:
        return
    print(f"{'phase':<10}{'t_start':>9}{'t_end':>9}{'e_mean':>14}{'e_std':>14}")
    for ph in rows:
        print(
            f"{ph['name']:<10}{ph['t_start_s']:>9.3f}{ph['t_end_s']:>9.3f}"
            f"{ph['e_mean']:>14.6g}{ph['e_std']:>14.6g}"
        )


def _metrics_csv(body: dict) -> str:
    lines = ["phase,t_start_s,t_end_s,e_mean,e_std"]
    rows = list(body.get("phases", []))
    if body.get("overall"):
        rows.append(body["overall"])
    for ph in rows:
        lines.append(
            f"{ph['name']},{ph['t_start_s']:.9g},{ph['t_end_s']:.9g},"
            f"{ph['e_mean']:.9g},{ph['e_std']:.9g}"
        )
    return "\n".join(lines) + "\n"


def _handle_error(status: int, body: dict) -> int:
    detail = body.get("detail", body)
    print(f"error: {detail}", file=sys.stderr)
    return EXIT_CONFIG if status == 422 else EXIT_IO


def cmd_simulate(args: argparse.Namespace) -> int:
    payload = _config_payload(args)
    payload["include_trace"] = True
    status, body = _post("/simulate", payload, args.server)
    if status != 200:
        return _handle_error(status, body)
    _write(args.out, body["trace_csv"])
    metrics_path = args.metrics_out or (os.path.splitext(args.out)[0] + ".metrics.csv")
    _write(metrics_path, _metrics_csv(body))
    _print_metrics(body)
    if body["diverged"]:
        print(f"diverged at t = {body['abort_time_s']:.3f} s", file=sys.stderr)
        return EXIT_DIVERGED
    print(f"trace: {args.out}\nmetrics: {metrics_path}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    payload = _config_payload(args)
    grid: dict[str, list[float]] = {}
    for item in args.grid:
        if "=" not in item:
            print(f"error: --grid expects key=v1,v2,..., got {item!r}", file=sys.stderr)
            return EXIT_CONFIG
        key, _, values = item.partition("=")
        try:
            grid[key.strip()] = [float(v) for v in values.split(",")]
        except ValueError:
            print(f"error: bad grid values in {item!r}", file=sys.stderr)
            return EXIT_CONFIG
    payload["grid"] = grid
    status, body = _post("/sweep", payload, args.server)
    if status != 200:
        return _handle_error(status, body)
    _write(args.out, body["csv"])
    n_div = sum(1 for c in body["cells"] if c["diverged"])
    print(f"sweep: {len(body['cells'])} cells ({n_div} diverged) -> {args.out}")
    return EXIT_OK


def cmd_flatness_check(args: argparse.Namespace) -> int:
    status, body = _post(
        "/flatness-check", {"scenario": args.scenario, "dt_s": args.dt}, args.server
    )
    if status != 200:
        return _handle_error(status, body)
    print(
        f"{body['scenario']}: max |phi - ref| = {body['max_dev_y1']:.3e} "
        f"(tol {body['tol_y1']:g}), max |y2 - ref| = {body['max_dev_y2']:.3e} "
        f"(tol {body['tol_y2']:g})"
    )
    if not body["passed"]:
        print("flatness check FAILED", file=sys.stderr)
        return EXIT_CHECK_FAILED
    print("flatness check passed")
    return EXIT_OK


def cmd_observer_demo(args: argparse.Namespace) -> int:
    payload = _config_payload(args)
    if "config_name" not in payload and not payload["config"]:
        payload["config_name"] = "gamma_b_observer"
    status, body = _post("/observer-demo", payload, args.server)
    if status != 200:
        return _handle_error(status, body)
    print(json.dumps(body, indent=2))
    if body["diverged"]:
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tethersim",
        description="Tethered planar aerial vehicle: simulation, control, estimation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--config", help="config file path or bundled config name")
        sp.add_argument("--seed", type=int, help="override the RNG seed")
        sp.add_argument(
            "--set", action="append", metavar="KEY=VALUE", help="override a config key"
        )
        sp.add_argument("--server", help="remote service URL (default: in-process)")

    sp = sub.add_parser("simulate", help="run one closed-loop experiment")
    common(sp)
    sp.add_argument("--out", default="trace.csv", help="trace CSV path")
    sp.add_argument("--metrics-out", help="metrics CSV path (default: <out>.metrics.csv)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="run a parameter-grid campaign")
    common(sp)
    sp.add_argument(
        "--grid", action="append", required=True, metavar="KEY=V1,V2,...",
        help="grid values for one config key (repeatable)",
    )
    sp.add_argument("--out", default="sweep.csv", help="long-format results CSV path")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("flatness-check", help="open-loop flatness round trip")
    sp.add_argument("scenario", help="gamma_a_step | gamma_b_step | gamma_b_near_singular")
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--server", help="remote service URL (default: in-process)")
    sp.set_defaults(func=cmd_flatness_check)

    sp = sub.add_parser("observer-demo", help="observer convergence summary")
    common(sp)
    sp.set_defaults(func=cmd_observer_demo)

    sp = sub.add_parser("serve", help="run the HTTP service")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    sp.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    except httpx.HTTPError as exc:
        print(f"error: transport failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
