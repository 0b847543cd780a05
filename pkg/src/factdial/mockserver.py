"""Loopback HTTP server exposing a MockEngine over the gateway wire format."""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .mock import MockEngine, MockHttpFailure

logger = logging.getLogger(__name__)


class _Handler(BaseHTTPRequestHandler):
    engine: MockEngine  # set on the server class by serve()/MockServer

    def _send_json(self, status: int, body: dict):
        data = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_GET(self):
        self._send_json(200, {"status": "ok"})

    def do_POST(self):
        length = int(self.headers.get("Content-Length", "0"))
        raw = self.rfile.read(length)
        try:
            payload = json.loads(raw) if raw else {}
        except json.JSONDecodeError:
            self._send_json(400, {"error": "invalid JSON"})
            return
        try:
            body = self.server.engine.dispatch(self.path, payload)  # type: ignore[attr-defined]
        except MockHttpFailure as e:
            self._send_json(e.status, {"error": f"scripted failure {e.status}"})
            return
        self._send_json(200, body)

    def log_message(self, fmt, *args):
        logger.debug("mock-serve: " + fmt, *args)


class MockServer:
    """Owns a ThreadingHTTPServer bound to loopback; usable as a context manager."""

    def __init__(self, engine: MockEngine, port: int = 0):
        self.engine = engine
        self._httpd = ThreadingHTTPServer(("127.0.0.1", port), _Handler)
        self._httpd.engine = engine  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def base_url(self) -> str:
        return f"http://127.0.0.1:{self.port}/v1"

    def start(self) -> "MockServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> "MockServer":
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def serve_forever(engine: MockEngine, port: int):
    """Blocking entry point used by the mock-serve subcommand."""
    server = MockServer(engine, port=port)
    print(f"mock gateway listening on {server.base_url}", flush=True)
    try:
        server._httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server._httpd.server_close()
