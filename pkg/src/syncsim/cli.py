"""Command-line client.

Subcommands run in-process by default; pass ``--server URL`` to send the same
request to a running syncsim service instead. Exit codes: 0 success, 2 bad
scenario document, 3 runtime failure.

    syncsim run scenario.json --seed 7 --out report.json --csv series/
    syncsim validate scenario.json
    syncsim table1
    syncsim speed-example
    syncsim serve --port 8000
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, SyncSimError
from .scenario import (
    builtin_speed_example,
    builtin_table1,
    canonical_bytes,
    load_config,
    run_scenario,
    write_csv_series,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="syncsim",
        description="Deterministic sensor time-synchronization simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario and emit its JSON report")
    run_p.add_argument("config", help="scenario document (JSON)")
    run_p.add_argument("--seed", type=int, default=None, help="override the document's seed")
    run_p.add_argument("--out", default=None, help="write the report here instead of stdout")
    run_p.add_argument("--csv", default=None, metavar="DIR", help="also dump per-series CSV files")
    run_p.add_argument("--server", default=None, metavar="URL", help="run on a remote service")

    val_p = sub.add_parser("validate", help="validate a scenario document")
    val_p.add_argument("config")
    val_p.add_argument("--server", default=None, metavar="URL")

    t1_p = sub.add_parser("table1", help="tolerable sync error vs velocity and IoU threshold")
    t1_p.add_argument("--json", action="store_true", dest="as_json")
    t1_p.add_argument("--server", default=None, metavar="URL")

    sp_p = sub.add_parser("speed-example", help="reference speed-estimation impact case")
    sp_p.add_argument("--json", action="store_true", dest="as_json")
    sp_p.add_argument("--server", default=None, metavar="URL")

    serve_p = sub.add_parser("serve", help="start the HTTP service")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8000)

    return parser


def _fail(message: str, code: int) -> int:
    print(f"syncsim: {message}", file=sys.stderr)
    return code


def _http(method: str, server: str, path: str, payload=None):
    import httpx

    url = server.rstrip("/") + path
    response = httpx.request(method, url, json=payload, timeout=300.0)
    if response.status_code == 400:
        detail = response.json().get("error", {})
        raise ConfigError(detail.get("path", "?"), detail.get("message", "invalid document"))
    response.raise_for_status()
    return response


def _load_document(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(path, f"cannot read file: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(path, f"not valid JSON: {exc}")


def _emit_report(report_bytes: bytes, out) -> None:
    if out:
        Path(out).write_bytes(report_bytes)
    else:
        sys.stdout.write(report_bytes.decode("utf-8"))


def _cmd_run(args) -> int:
    if args.server:
        if args.csv:
            return _fail("--csv needs a local run (the raw series stay on the server)", EXIT_CONFIG)
        payload = {"config": _load_document(args.config), "seed": args.seed}
        response = _http("POST", args.server, "/v1/run", payload)
        _emit_report(response.content, args.out)
        return EXIT_OK
    config = load_config(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    result = run_scenario(config)
    _emit_report(canonical_bytes(result.report), args.out)
    if args.csv:
        epoch_offset = config.grandmaster.source.epoch_offset_ns
        files = write_csv_series(args.csv, result.offset_series, result.samples, epoch_offset)
        print(f"wrote {len(files)} CSV files to {args.csv}", file=sys.stderr)
    return EXIT_OK


def _cmd_validate(args) -> int:
    if args.server:
        payload = {"config": _load_document(args.config)}
        response = _http("POST", args.server, "/v1/validate", payload)
        normalized = response.json()["normalized"]
    else:
        normalized = load_config(args.config).echo
    print(json.dumps(normalized, sort_keys=True, indent=2))
    return EXIT_OK


def _cmd_table1(args) -> int:
    if args.server:
        table = _http("GET", args.server, "/v1/table1").json()
    else:
        table = builtin_table1()
    if args.as_json:
        print(json.dumps(table, sort_keys=True, indent=2))
        return EXIT_OK
    velocities = table["velocities_mps"]
    print(f"Tolerable synchronization error (ms), object length {table['object_length_m']} m")
    print("  velocity (m/s)  " + "".join(f"{v:>8}" for v in velocities))
    for row in table["rows"]:
        cells = "".join(f"{ms:>8}" for ms in row["tolerance_ms"])
        print(f"  IoU >= {row['iou_threshold']:<8}" + cells)
    return EXIT_OK


def _cmd_speed_example(args) -> int:
    if args.server:
        example = _http("GET", args.server, "/v1/speed-example").json()
    else:
        example = builtin_speed_example()
    if args.as_json:
        print(json.dumps(example, sort_keys=True, indent=2))
        return EXIT_OK
    obs = example["observation"]
    print(f"observations: p1={tuple(obs['p1'])} at {obs['t1_ms']} ms, "
          f"p2={tuple(obs['p2'])} at {obs['t2_ms']} ms, sync error {obs['delta_t_ms']} ms")
    print(f"  true speed   {example['true_mps']:.2f} m/s")
    print(f"  biased speed {example['biased_mps']:.2f} m/s")
    print(f"  error        {example['error_mps']:.2f} m/s")
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("syncsim.service.app:app", host=args.host, port=args.port)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "validate": _cmd_validate,
        "table1": _cmd_table1,
        "speed-example": _cmd_speed_example,
        "serve": _cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        return _fail(str(exc), EXIT_CONFIG)
    except SyncSimError as exc:
        return _fail(str(exc), EXIT_RUNTIME)
    except Exception as exc:  # connection failures, I/O errors
        return _fail(f"{type(exc).__name__}: {exc}", EXIT_RUNTIME)


if __name__ == "__main__":
    sys.exit(main())
