"""Message transports between nodes.

Both transports carry the same JSON text. Every node handles at most one
message at a time. ``take_down``/``restore`` and ``set_delay`` inject faults
for degraded-mode tests.
"""

from __future__ import annotations

import json
import socket
import socketserver
import threading
import time
from typing import Callable

from .errors import ProtocolError, TransportError

Handler = Callable[[dict], dict]


def encode(message: dict) -> str:
    return json.dumps(message, sort_keys=True, separators=(",", ":"))


class _Transport:
    def __init__(self) -> None:
        self._down: set[str] = set()
        self._delay: dict[str, float] = {}

    def take_down(self, endpoint: str) -> None:
        self._down.add(endpoint)

    def restore(self, endpoint: str) -> None:
        self._down.discard(endpoint)

    def set_delay(self, endpoint: str, seconds: float) -> None:
        self._delay[endpoint] = seconds

    def _check(self, endpoint: str) -> None:
        if endpoint in self._down:
            raise TransportError(f"{endpoint} unreachable")
        delay = self._delay.get(endpoint)
        if delay:
            time.sleep(delay)

    @staticmethod
    def _serialized(handler: Handler) -> Handler:
        lock = threading.Lock()

        def handle(message: dict) -> dict:
            with lock:
                return handler(message)

        return handle

    def close(self) -> None:
        pass


class InProcessTransport(_Transport):
    def __init__(self) -> None:
        super().__init__()
        self._handlers: dict[str, Handler] = {}

    def serve(self, endpoint: str, handler: Handler) -> None:
        self._handlers[endpoint] = self._serialized(handler)

    def request(self, endpoint: str, message: dict, timeout: float | None = None) -> dict:
        handler = self._handlers.get(endpoint)
        if handler is None:
            raise TransportError(f"no node serves {endpoint}")
        self._check(endpoint)
        return json.loads(encode(handler(json.loads(encode(message)))))


class SocketTransport(_Transport):
    """Loopback TCP, one newline-terminated JSON message each way."""

    def __init__(self, host: str = "127.0.0.1") -> None:
        super().__init__()
        self.host = host
        self._servers: dict[str, socketserver.ThreadingTCPServer] = {}
        self.ports: dict[str, int] = {}

    def serve(self, endpoint: str, handler: Handler) -> None:
        handle = self._serialized(handler)

        class _RequestHandler(socketserver.StreamRequestHandler):
            def handle(self) -> None:
                line = self.rfile.readline()
                if not line:
                    return
                reply = handle(json.loads(line))
                self.wfile.write(encode(reply).encode("utf-8") + b"\n")

        server = socketserver.ThreadingTCPServer((self.host, 0), _RequestHandler)
        server.daemon_threads = True
        threading.Thread(target=server.serve_forever, daemon=True).start()
        self._servers[endpoint] = server
        self.ports[endpoint] = server.server_address[1]

    def request(self, endpoint: str, message: dict, timeout: float | None = None) -> dict:
        port = self.ports.get(endpoint)
        if port is None:
            raise TransportError(f"no node serves {endpoint}")
        self._check(endpoint)
        try:
            with socket.create_connection((self.host, port), timeout=timeout or 30.0) as sock:
                sock.sendall(encode(message).encode("utf-8") + b"\n")
                with sock.makefile("rb") as f:
                    line = f.readline()
        except OSError as exc:
            raise TransportError(f"{endpoint}: {exc}") from exc
        if not line:
            raise TransportError(f"{endpoint} closed the connection")
        return json.loads(line)

    def close(self) -> None:
        for server in self._servers.values():
            server.shutdown()
            server.server_close()
        self._servers.clear()


def call(transport, endpoint: str, message: dict, timeout: float | None = None) -> dict:
    """Send ``message`` and raise :class:`ProtocolError` on an error reply."""
    reply = transport.request(endpoint, message, timeout)
    if not reply.get("ok"):
        raise ProtocolError(reply.get("error", "unknownError"), reply.get("detail", ""))
    return reply


def error_reply(exc: Exception) -> dict:
    if isinstance(exc, ProtocolError):
        return {"ok": False, "error": exc.code, "detail": str(exc)}
    return {"ok": False, "error": "badRequest", "detail": str(exc)}
