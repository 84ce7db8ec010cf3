"""capbridge command line: load checkpoints and serve the wire protocol."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .models import BridgeConfig
from .server import Bridge


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="capbridge")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="serve the protocol over stdio or TCP")
    serve.add_argument("--lm", default=BridgeConfig.lm_model,
                       help="causal LM checkpoint id or local path")
    serve.add_argument("--audio-model", default=BridgeConfig.audio_text_model,
                       help="contrastive audio-text checkpoint id or local path")
    serve.add_argument("--device", default="cpu")
    serve.add_argument("--audio-root", type=Path, default=Path.cwd(),
                       help="base directory for relative audio references")
    serve.add_argument("--no-bos", action="store_true",
                       help="do not prepend the BOS token when computing distributions")
    serve.add_argument("--stdio", action="store_true", help="serve over stdio instead of TCP")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=0)
    serve.set_defaults(func=_cmd_serve)
    return parser


def _cmd_serve(args: argparse.Namespace) -> int:
    config = BridgeConfig(
        lm_model=args.lm,
        audio_text_model=args.audio_model,
        device=args.device,
        audio_root=args.audio_root,
        add_bos=not args.no_bos,
    )
    bridge = Bridge(config)
    if args.stdio:
        print("serving protocol v1 on stdio", file=sys.stderr)
        bridge.serve_stdio()
    else:
        def announce(address):
            print(f"listening on tcp://{address[0]}:{address[1]}", file=sys.stderr, flush=True)

        bridge.serve_tcp(host=args.host, port=args.port, ready_callback=announce)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
