"""Protocol server loop.

One connection is handled serially; multiple TCP connections each get their
own thread over the shared read-only model weights. Per-request failures are
reported as protocol error objects and the connection keeps serving.
"""

from __future__ import annotations

import json
import socket
import sys
import threading
from typing import BinaryIO

from .models import AudioTextEncoder, BridgeConfig, CausalLM
from .wire import PROTOCOL_VERSION, encode_floats, error_response, write_message


class Bridge:
    """Loaded models plus the request dispatcher."""

    def __init__(self, config: BridgeConfig):
        self.config = config
        self.lm = CausalLM(config.lm_model, device=config.device, add_bos=config.add_bos)
        self.encoder = AudioTextEncoder(
            config.audio_text_model, device=config.device, audio_root=config.audio_root
        )

    def handle(self, message: dict) -> dict:
        request_id = message["id"]
        kind = message.get("kind")
        try:
            if kind == "handshake":
                if message.get("protocol_version") != PROTOCOL_VERSION:
                    return error_response(
                        request_id, kind, "protocol_version",
                        f"server speaks protocol version {PROTOCOL_VERSION}",
                    )
                return {
                    "id": request_id, "kind": kind, "ok": True,
                    "protocol_version": PROTOCOL_VERSION,
                    "embedding_dim": self.encoder.embedding_dim,
                    "vocab_size": self.lm.vocab_size,
                }
            if kind == "tokenize":
                return {"id": request_id, "kind": kind, "ok": True,
                        "tokens": self.lm.tokenize(str(message["text"]))}
            if kind == "detokenize":
                return {"id": request_id, "kind": kind, "ok": True,
                        "text": self.lm.detokenize([int(t) for t in message["tokens"]])}
            if kind == "next_token_distribution":
                probs = self.lm.next_token_distribution([int(t) for t in message["tokens"]])
                return {"id": request_id, "kind": kind, "ok": True,
                        "probs": encode_floats(probs)}
            if kind == "encode_text_batch":
                vectors = self.encoder.encode_text_batch([str(t) for t in message["texts"]])
                return {"id": request_id, "kind": kind, "ok": True,
                        "vectors": [encode_floats(v) for v in vectors]}
            if kind == "encode_audio":
                vector = self.encoder.encode_audio(str(message["ref"]))
                return {"id": request_id, "kind": kind, "ok": True,
                        "vector": encode_floats(vector)}
            return error_response(request_id, kind, "protocol_error", f"unknown kind {kind!r}")
        except Exception as exc:
            return error_response(request_id, kind, "backend_error", str(exc))

    def serve_connection(self, reader: BinaryIO, writer: BinaryIO) -> None:
        last_id = 0
        for line in reader:
            if not line.strip():
                continue
            try:
                message = json.loads(line)
            except json.JSONDecodeError as exc:
                write_message(
                    writer,
                    error_response(None, None, "protocol_error", f"invalid JSON: {exc.msg}"),
                )
                continue
            request_id = message.get("id")
            if not isinstance(request_id, int) or request_id <= last_id:
                write_message(
                    writer,
                    error_response(request_id, message.get("kind"), "protocol_error",
                                   "request ids must be strictly increasing integers"),
                )
                continue
            last_id = request_id
            write_message(writer, self.handle(message))

    def serve_stdio(self) -> None:
        self.serve_connection(sys.stdin.buffer, sys.stdout.buffer)

    def serve_tcp(self, host: str = "127.0.0.1", port: int = 0,
                  ready_callback=None, max_connections: int | None = None) -> None:
        with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as server:
            server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            server.bind((host, port))
            server.listen()
            if ready_callback is not None:
                ready_callback(server.getsockname())
            accepted = 0
            while max_connections is None or accepted < max_connections:
                conn, _ = server.accept()
                accepted += 1

                def _serve(sock=conn) -> None:
                    with sock, sock.makefile("rb") as rd, sock.makefile("wb") as wr:
                        self.serve_connection(rd, wr)

                threading.Thread(target=_serve, daemon=True).start()
