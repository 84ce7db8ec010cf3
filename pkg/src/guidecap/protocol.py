"""Wire protocol client and server for external model backends.

Transport is newline-delimited JSON over a byte stream (TCP or a child
process's stdio). Float arrays travel as base64-encoded little-endian 32-bit
floats and are widened to 64-bit on arrival. One request is in flight per
connection at a time. See PROTOCOL.md for the normative message schemas.
"""

from __future__ import annotations

import base64
import json
import shlex
import socket
import subprocess
import threading
from typing import BinaryIO, Sequence

import numpy as np

from .errors import (
    ContractViolationError,
    ProtocolVersionError,
    ScorerError,
    TransportError,
)
from .scoring import EmbeddingVector

PROTOCOL_VERSION = 1
DISTRIBUTION_SUM_TOLERANCE = 1e-4


def encode_float_array(values: Sequence[float] | np.ndarray) -> str:
    return base64.b64encode(np.asarray(values, dtype="<f4").tobytes()).decode("ascii")


def decode_float_array(payload: str) -> np.ndarray:
    try:
        raw = base64.b64decode(payload, validate=True)
    except Exception as exc:
        raise ContractViolationError(f"invalid base64 float payload: {exc}") from exc
    if len(raw) % 4 != 0:
        raise ContractViolationError("float payload length is not a multiple of 4")
    return np.frombuffer(raw, dtype="<f4").astype(np.float64)


class _Connection:
    """Framing plus request-id bookkeeping over a reader/writer pair."""

    def __init__(self, reader: BinaryIO, writer: BinaryIO):
        self._reader = reader
        self._writer = writer
        self._next_id = 0
        self._lock = threading.Lock()

    def request(self, kind: str, **payload) -> dict:
        with self._lock:
            self._next_id += 1
            request_id = self._next_id
            message = {"id": request_id, "kind": kind, **payload}
            try:
                self._writer.write((json.dumps(message, ensure_ascii=True) + "\n").encode("utf-8"))
                self._writer.flush()
                line = self._reader.readline()
            except (OSError, ValueError) as exc:
                raise TransportError(f"transport failure during {kind!r}: {exc}") from exc
        if not line:
            raise TransportError(f"connection closed while awaiting response to request {request_id}")
        try:
            response = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ContractViolationError(
                f"request {request_id}: response is not valid JSON ({exc.msg})"
            ) from exc
        if response.get("id") != request_id or response.get("kind") != kind:
            raise ContractViolationError(
                f"request {request_id}: response id/kind mismatch "
                f"(got id={response.get('id')!r}, kind={response.get('kind')!r})"
            )
        if not response.get("ok"):
            error = response.get("error") or {}
            err_type = error.get("type", "backend_error")
            message_text = error.get("message", "unspecified backend failure")
            if err_type == "protocol_version":
                raise ProtocolVersionError(message_text)
            raise ScorerError(f"request {request_id}: backend error: {message_text}")
        return response


class RemoteLanguageModel:
    """LanguageModel proxy over a protocol connection."""

    def __init__(self, connection: _Connection, vocab_size: int):
        self._conn = connection
        self._vocab_size = vocab_size

    @property
    def vocab_size(self) -> int:
        return self._vocab_size

    def tokenize(self, text: str) -> list[int]:
        response = self._conn.request("tokenize", text=text)
        tokens = response.get("tokens")
        if not isinstance(tokens, list) or any(not isinstance(t, int) for t in tokens):
            raise ContractViolationError(f"request {response['id']}: 'tokens' must be an int list")
        return tokens

    def detokenize(self, tokens: Sequence[int]) -> str:
        response = self._conn.request("detokenize", tokens=[int(t) for t in tokens])
        text = response.get("text")
        if not isinstance(text, str):
            raise ContractViolationError(f"request {response['id']}: 'text' must be a string")
        return text

    def next_token_distribution(self, context: Sequence[int]) -> np.ndarray:
        response = self._conn.request(
            "next_token_distribution", tokens=[int(t) for t in context]
        )
        probs = decode_float_array(response.get("probs", ""))
        request_id = response["id"]
        if probs.size != self._vocab_size:
            raise ContractViolationError(
                f"request {request_id}: distribution length {probs.size} != vocab_size {self._vocab_size}"
            )
        if np.any(probs < 0.0):
            raise ContractViolationError(f"request {request_id}: distribution has negative entries")
        total = float(probs.sum())
        if abs(total - 1.0) > DISTRIBUTION_SUM_TOLERANCE:
            raise ContractViolationError(
                f"request {request_id}: distribution sums to {total!r}, not 1"
            )
        return probs


class RemoteAudioTextScorer:
    """AudioTextScorer proxy over a protocol connection."""

    def __init__(self, connection: _Connection, embedding_dim: int):
        self._conn = connection
        self._dim = embedding_dim

    @property
    def embedding_dim(self) -> int:
        return self._dim

    def _check_dim(self, values: np.ndarray, request_id: int) -> EmbeddingVector:
        if values.size != self._dim:
            raise ContractViolationError(
                f"request {request_id}: embedding dim {values.size} != declared {self._dim}"
            )
        return EmbeddingVector(values)

    def encode_text_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        response = self._conn.request("encode_text_batch", texts=list(texts))
        vectors = response.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise ContractViolationError(
                f"request {response['id']}: expected {len(texts)} vectors"
            )
        return [self._check_dim(decode_float_array(v), response["id"]) for v in vectors]

    def encode_audio(self, ref: str) -> EmbeddingVector:
        response = self._conn.request("encode_audio", ref=ref)
        return self._check_dim(decode_float_array(response.get("vector", "")), response["id"])


class RemoteBackend:
    """Connected backend: a language model handle plus a scorer handle."""

    def __init__(self, connection: _Connection, close_fn, lm: RemoteLanguageModel,
                 scorer: RemoteAudioTextScorer, info: dict):
        self._connection = connection
        self._close_fn = close_fn
        self.lm = lm
        self.scorer = scorer
        self.info = info

    def close(self) -> None:
        self._close_fn()

    def __enter__(self) -> "RemoteBackend":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _handshake(connection: _Connection) -> dict:
    response = connection.request("handshake", protocol_version=PROTOCOL_VERSION)
    version = response.get("protocol_version")
    if version != PROTOCOL_VERSION:
        raise ProtocolVersionError(
            f"backend speaks protocol version {version!r}, expected {PROTOCOL_VERSION}"
        )
    dim = response.get("embedding_dim")
    vocab_size = response.get("vocab_size")
    if not isinstance(dim, int) or dim < 1 or not isinstance(vocab_size, int) or vocab_size < 1:
        raise ContractViolationError("handshake must declare positive embedding_dim and vocab_size")
    return {"embedding_dim": dim, "vocab_size": vocab_size, "protocol_version": version}


def connect_stream(reader: BinaryIO, writer: BinaryIO, close_fn=lambda: None) -> RemoteBackend:
    """Handshake over an already-open byte stream and build remote handles."""
    connection = _Connection(reader, writer)
    info = _handshake(connection)
    return RemoteBackend(
        connection,
        close_fn,
        RemoteLanguageModel(connection, info["vocab_size"]),
        RemoteAudioTextScorer(connection, info["embedding_dim"]),
        info,
    )


def connect(endpoint: str | Sequence[str]) -> RemoteBackend:
    """Connect to a backend.

    ``endpoint`` is either "tcp://host:port" (or "host:port"), a "spawn:"
    prefixed command line, or an argv list; the latter two start a child
    process and speak the protocol over its stdio.
    """
    if isinstance(endpoint, str):
        if endpoint.startswith("spawn:"):
            argv = shlex.split(endpoint[len("spawn:"):])
        else:
            address = endpoint.removeprefix("tcp://")
            host, sep, port = address.rpartition(":")
            if not sep or not port.isdigit():
                raise TransportError(f"cannot parse endpoint {endpoint!r}")
            try:
                sock = socket.create_connection((host or "127.0.0.1", int(port)))
            except OSError as exc:
                raise TransportError(f"cannot connect to {endpoint!r}: {exc}") from exc
            reader = sock.makefile("rb")
            writer = sock.makefile("wb")

            def close_socket() -> None:
                reader.close()
                writer.close()
                sock.close()

            return connect_stream(reader, writer, close_socket)
    else:
        argv = [str(a) for a in endpoint]
    try:
        process = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
    except OSError as exc:
        raise TransportError(f"cannot spawn backend {argv!r}: {exc}") from exc
    assert process.stdin is not None and process.stdout is not None

    def close_process() -> None:
        try:
            process.stdin.close()
            process.stdout.close()
        finally:
            process.terminate()
            process.wait(timeout=10)

    return connect_stream(process.stdout, process.stdin, close_process)


def serve_connection(lm, scorer, reader: BinaryIO, writer: BinaryIO) -> None:
    """Serve one protocol connection until EOF, wrapping local handles.

    Per-request failures are reported as protocol error objects and the
    connection stays alive; only transport EOF ends the loop.
    """
    last_id = 0
    for line in reader:
        if not line.strip():
            continue
        response: dict
        try:
            message = json.loads(line)
            request_id = message.get("id")
            kind = message.get("kind")
            if not isinstance(request_id, int) or request_id <= last_id:
                response = _error_response(request_id, kind, "protocol_error",
                                           "request ids must be strictly increasing integers")
            else:
                last_id = request_id
                response = _dispatch(lm, scorer, message)
        except json.JSONDecodeError as exc:
            response = _error_response(None, None, "protocol_error", f"invalid JSON: {exc.msg}")
        writer.write((json.dumps(response, ensure_ascii=True) + "\n").encode("utf-8"))
        writer.flush()


def _error_response(request_id, kind, err_type: str, message: str) -> dict:
    return {
        "id": request_id,
        "kind": kind,
        "ok": False,
        "error": {"type": err_type, "message": message},
    }


def _dispatch(lm, scorer, message: dict) -> dict:
    request_id = message["id"]
    kind = message.get("kind")
    try:
        if kind == "handshake":
            if message.get("protocol_version") != PROTOCOL_VERSION:
                return _error_response(
                    request_id, kind, "protocol_version",
                    f"server speaks protocol version {PROTOCOL_VERSION}",
                )
            return {
                "id": request_id, "kind": kind, "ok": True,
                "protocol_version": PROTOCOL_VERSION,
                "embedding_dim": scorer.embedding_dim,
                "vocab_size": lm.vocab_size,
            }
        if kind == "tokenize":
            return {"id": request_id, "kind": kind, "ok": True,
                    "tokens": [int(t) for t in lm.tokenize(message["text"])]}
        if kind == "detokenize":
            return {"id": request_id, "kind": kind, "ok": True,
                    "text": lm.detokenize([int(t) for t in message["tokens"]])}
        if kind == "next_token_distribution":
            probs = lm.next_token_distribution([int(t) for t in message["tokens"]])
            return {"id": request_id, "kind": kind, "ok": True,
                    "probs": encode_float_array(probs)}
        if kind == "encode_text_batch":
            vectors = scorer.encode_text_batch(list(message["texts"]))
            return {"id": request_id, "kind": kind, "ok": True,
                    "vectors": [encode_float_array(v.values) for v in vectors]}
        if kind == "encode_audio":
            vector = scorer.encode_audio(message["ref"])
            return {"id": request_id, "kind": kind, "ok": True,
                    "vector": encode_float_array(vector.values)}
        return _error_response(request_id, kind, "protocol_error", f"unknown kind {kind!r}")
    except Exception as exc:  # backend failures become error objects, server lives on
        return _error_response(request_id, kind, "backend_error", str(exc))


def serve_stdio(lm, scorer) -> None:
    import sys

    serve_connection(lm, scorer, sys.stdin.buffer, sys.stdout.buffer)


def serve_tcp(lm, scorer, host: str = "127.0.0.1", port: int = 0,
              ready_callback=None, max_connections: int | None = None) -> None:
    """Accept connections and serve each on its own thread.

    ``ready_callback`` receives the bound (host, port) once listening; with
    ``max_connections`` set, the loop exits after that many connections have
    been accepted (used by tests).
    """
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
                with sock, sock.makefile("rb") as reader, sock.makefile("wb") as writer:
                    serve_connection(lm, scorer, reader, writer)

            threading.Thread(target=_serve, daemon=True).start()
