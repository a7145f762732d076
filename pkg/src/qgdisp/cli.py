"""Command-line entry point.

Runs an experiment locally, or forwards it to a running service with
``--server URL``, then writes the returned files and a manifest into ``--out``.
"""

from __future__ import annotations

import argparse
import base64
import json
import sys
import urllib.error
import urllib.request
from pathlib import Path

from .config import config_reference, load_config
from .errors import ConfigurationError
from .experiments import EXIT_CONFIG, EXIT_NUMERICAL, timed_run

SUBCOMMANDS = {
    "energy": "energy",
    "kernel": "kernel",
    "strichartz": "strichartz",
    "converge": "converge",
    "stability": "stability",
    "lp-audit": "lp_audit",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qgdisp", description="Run QG dispersion experiments locally or through a qgdisp service.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", default="default", help="config file, or 'default' for built-in defaults")
        p.add_argument("--out", required=True, type=Path, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="determinism seed (overrides the config)")
        p.add_argument("--server", default=None, help="base URL of a running qgdisp service")
    ref = sub.add_parser("config-reference", help="print every config key with its default")
    ref.add_argument("--out", type=Path, default=None)
    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _remote(server: str, cfg) -> tuple[dict[str, bytes], str, int, str]:
    body = json.dumps({"config": cfg.model_dump(mode="python")}, default=str).encode()
    req = urllib.request.Request(
        server.rstrip("/") + f"/experiments/{cfg.experiment.value}", data=body, headers={"Content-Type": "application/json"}
    )
    try:
        with urllib.request.urlopen(req) as resp:
            doc = json.loads(resp.read())
    except urllib.error.HTTPError as exc:
        detail = exc.read().decode(errors="replace")
        code = EXIT_CONFIG if exc.code == 422 else EXIT_NUMERICAL
        return {}, "", code, f"server answered {exc.code}: {detail}"
    except urllib.error.URLError as exc:
        return {}, "", EXIT_NUMERICAL, f"cannot reach {server}: {exc.reason}"
    files = {name: base64.b64decode(data) for name, data in doc["files"].items()}
    return files, doc["manifest"], doc["exit_code"], doc["message"]


def write_outputs(out: Path, files: dict[str, bytes], manifest: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for name, data in files.items():
        (out / name).write_bytes(data)
    (out / "manifest.json").write_text(manifest)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "config-reference":
        text = config_reference()
        if args.out:
            args.out.write_text(text)
        else:
            sys.stdout.write(text)
        return 0
    if args.command == "serve":
        import uvicorn

        uvicorn.run("qgdisp.service:app", host=args.host, port=args.port)
        return 0
    try:
        cfg = load_config(args.config, experiment=SUBCOMMANDS[args.command], seed=args.seed)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.server:
        files, manifest, code, message = _remote(args.server, cfg)
    else:
        res, manifest = timed_run(cfg)
        files, code, message = res.files, res.exit_code, res.message
    if manifest:
        write_outputs(args.out, files, manifest)
    if message:
        print(message, file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
