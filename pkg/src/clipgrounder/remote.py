"""HTTP transport for remote policies and annotators.

Wire contract: ``POST /v1/generate`` with ``{"messages": [...], "temperature": t,
"request_id": id}`` answered by ``{"text": "<assistant message>"}``. Retries
reuse the same request id so servers can deduplicate.
"""

from __future__ import annotations

import json
import logging
import threading
import time
import urllib.error
import urllib.request
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable

from .rollout import PolicyRequest, PolicyTransportError

log = logging.getLogger(__name__)

GENERATE_PATH = "/v1/generate"


class HttpClient:
    def __init__(self, url: str, timeout_s: float = 30.0, retries: int = 2, backoff_s: float = 0.2):
        self.url = url.rstrip("/")
        if not self.url.endswith(GENERATE_PATH):
            self.url += GENERATE_PATH
        self.timeout_s = timeout_s
        self.retries = retries
        self.backoff_s = backoff_s

    def generate(self, messages: list[dict], temperature: float, request_id: str) -> str:
        body = json.dumps(
            {"messages": messages, "temperature": temperature, "request_id": request_id}
        ).encode()
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            req = urllib.request.Request(
                self.url, data=body, headers={"Content-Type": "application/json"}, method="POST"
            )
            try:
                with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                    payload = json.loads(resp.read().decode())
            except urllib.error.HTTPError as exc:
                last_error = exc
                if exc.code < 500:
                    break
            except (urllib.error.URLError, TimeoutError, ConnectionError, json.JSONDecodeError) as exc:
                last_error = exc
            else:
                if isinstance(payload, dict) and isinstance(payload.get("text"), str):
                    return payload["text"]
                last_error = ValueError("response lacks a text field")
                break
            log.debug("request %s attempt %d failed: %s", request_id, attempt + 1, last_error)
            if attempt < self.retries:
                time.sleep(self.backoff_s * (attempt + 1))
        raise PolicyTransportError(f"{self.url}: {last_error}")


class HttpPolicy:
    """A policy served elsewhere; only the public conversation is sent."""

    def __init__(self, url: str, temperature: float | None = None, **client_kwargs):
        self.client = HttpClient(url, **client_kwargs)
        self.temperature = temperature

    def generate(self, request: PolicyRequest, seed: int) -> str:
        temperature = request.temperature if self.temperature is None else self.temperature
        request_id = f"{request.video.id}:{seed}:{request.turn}"
        return self.client.generate(list(request.messages), temperature, request_id)


def serve(
    respond: Callable[[dict], str], host: str = "127.0.0.1", port: int = 0
) -> tuple[ThreadingHTTPServer, threading.Thread]:
    """Serve ``respond(request_json) -> text`` on a background thread.

    Returns the server (``server.server_address`` has the bound port) and the
    thread; call ``server.shutdown()`` to stop.
    """

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):  # noqa: N802
            if self.path != GENERATE_PATH:
                self.send_error(404)
                return
            length = int(self.headers.get("Content-Length", 0))
            try:
                text = respond(json.loads(self.rfile.read(length)))
            except Exception as exc:  # surfaced to the client as a 500
                self.send_error(500, str(exc))
                return
            data = json.dumps({"text": text}).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def log_message(self, fmt, *args):
            log.debug(fmt, *args)

    server = ThreadingHTTPServer((host, port), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, thread
