"""rf-advdef: thin HTTP client for the experiment service.

Subcommands map one-to-one onto the service endpoints. Without --server the
request is dispatched through an in-process ASGI transport, so no server
needs to be running; with --server it goes over the network to a live
instance. `rf-advdef serve` starts the service with uvicorn.
"""

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx

STAGES = ("synth", "train", "attack", "eval", "kstest", "report", "all")


def load_config(path, out_dir=None, seed=None) -> dict:
    """Read the JSON config file and apply CLI overrides."""
    path = Path(path)
    if not path.exists():
        raise SystemExit(f"config file not found: {path}")
    with open(path) as f:
        cfg = json.load(f)
    if out_dir is not None:
        cfg["out_dir"] = out_dir
    if seed is not None:
        cfg.setdefault("dataset", {})["seed"] = seed
        cfg.setdefault("train", {})["seed"] = seed
    return cfg


async def _post_inprocess(stage: str, body: dict):
    from .service import app

    transport = httpx.ASGITransport(app=app)
    async with httpx.AsyncClient(transport=transport, base_url="http://rf-advdef",
                                 timeout=None) as client:
        resp = await client.post(f"/{stage}", json=body)
    return resp


def post_stage(stage: str, body: dict, server=None):
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            return client.post(f"/{stage}", json=body)
    return asyncio.run(_post_inprocess(stage, body))


def _format_error(resp) -> str:
    try:
        detail = resp.json().get("detail", resp.text)
    except ValueError:
        detail = resp.text
    if isinstance(detail, list):   # pydantic validation errors carry field paths
        lines = []
        for err in detail:
            loc = ".".join(str(x) for x in err.get("loc", []) if x != "body")
            lines.append(f"{loc}: {err.get('msg', '')}")
        return "config rejected:\n  " + "\n  ".join(lines)
    return str(detail)


def run_stage(args) -> int:
    body = load_config(args.config, out_dir=args.out, seed=args.seed)
    resp = post_stage(args.stage, body, server=args.server)
    if resp.status_code != 200:
        print(_format_error(resp), file=sys.stderr)
        return 1
    print(json.dumps(resp.json(), indent=2, sort_keys=True))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rf-advdef",
        description="Adversarial-RF workbench: synthesize frames, train "
                    "classifiers, craft FGSM attacks, evaluate the "
                    "autoencoder-pretraining defense, and run KS detection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for stage in STAGES:
        sp = sub.add_parser(stage, help=f"run the {stage} stage")
        sp.add_argument("--config", required=True, help="JSON experiment config")
        sp.add_argument("--out", default=None, help="override the output directory")
        sp.add_argument("--seed", type=int, default=None,
                        help="override dataset and training seeds")
        sp.add_argument("--server", default=None,
                        help="base URL of a running service (default: in-process)")
        sp.set_defaults(stage=stage)

    sv = sub.add_parser("serve", help="start the HTTP service")
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8000)

    args = parser.parse_args(argv)
    if args.command == "serve":
        import uvicorn

        from .service import app

        uvicorn.run(app, host=args.host, port=args.port)
        return 0
    return run_stage(args)


if __name__ == "__main__":
    sys.exit(main())
