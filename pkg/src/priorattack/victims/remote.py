"""
HTTP label oracle: client with retries and a loopback stub server.

Wire protocol: ``POST /predict`` with JSON
``{"height", "width", "channels", "data": [floats in [0,1], row-major]}``;
a 200 response carries ``{"label": int}``. Anything else is a protocol error.
"""

import json
import logging
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import requests

from ..errors import ProtocolError, TransportError

log = logging.getLogger(__name__)


def encode_request(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[:, :, None]
    h, w, c = x.shape
    return {"height": h, "width": w, "channels": c, "data": x.ravel().tolist()}


def decode_label(status, body):
    if status != 200:
        raise ProtocolError(f"remote oracle returned HTTP {status}")
    try:
        doc = json.loads(body)
        label = doc["label"]
    except (ValueError, KeyError, TypeError):
        raise ProtocolError(f"malformed response body: {body[:80]!r}") from None
    if isinstance(label, bool) or not isinstance(label, int):
        raise ProtocolError(f"label must be an integer, got {label!r}")
    return label


def remote_predict(url, x, timeout=5.0, max_retries=2, backoff=0.0, session=None):
    """
    Query a remote oracle for the label of ``x``.

    Connection failures and timeouts are retried ``max_retries`` times before a
    TransportError; protocol violations are never retried.
    """
    payload = encode_request(x)
    post = (session or requests).post
    last = None
    for attempt in range(max_retries + 1):
        try:
            resp = post(url, json=payload, timeout=timeout)
        except (requests.ConnectionError, requests.Timeout) as exc:
            last = exc
            log.warning("remote oracle attempt %d/%d failed: %s", attempt + 1, max_retries + 1, exc)
            if backoff:
                time.sleep(backoff * 2**attempt)
            continue
        return decode_label(resp.status_code, resp.text)
    raise TransportError(f"remote oracle unreachable after {max_retries + 1} attempts: {last}")


class RemoteModel:
    kind = "remote"

    def __init__(self, url, class_count, timeout=5.0, max_retries=2, backoff=0.0):
        if not url.rstrip("/").endswith("/predict"):
            url = url.rstrip("/") + "/predict"
        self.url = url
        self.class_count = int(class_count)
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self._session = requests.Session()

    def predict(self, x):
        return remote_predict(
            self.url, x, self.timeout, self.max_retries, self.backoff, session=self._session
        )

    def to_dict(self):
        return {"kind": self.kind, "url": self.url, "class_count": self.class_count}


class _StubHandler(BaseHTTPRequestHandler):
    def log_message(self, fmt, *args):
        log.debug("stub: " + fmt, *args)

    def _send(self, status, body):
        data = body.encode()
        try:
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)
        except (BrokenPipeError, ConnectionResetError):
            # the client gave up (e.g. timed out) before the answer was ready
            log.debug("stub: client went away")

    def do_POST(self):
        cfg = self.server.stub_config
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length)
        if self.path.rstrip("/") != "/predict":
            self._send(404, json.dumps({"error": "not found"}))
            return
        if cfg["mode"] == "delay":
            time.sleep(cfg["delay"])
        if cfg["mode"] == "malformed":
            self._send(200, "this is not json")
            return
        if cfg["mode"] == "error":
            self._send(500, json.dumps({"error": "internal"}))
            return
        try:
            doc = json.loads(raw)
            h, w, c = int(doc["height"]), int(doc["width"]), int(doc["channels"])
            x = np.asarray(doc["data"], dtype=np.float64).reshape(h, w, c)
        except (ValueError, KeyError, TypeError):
            self._send(400, json.dumps({"error": "bad request"}))
            return
        model = cfg["model"]
        label = cfg["label"] if model is None else model.predict(x)
        self._send(200, json.dumps({"label": int(label)}))


def make_stub_server(host="127.0.0.1", port=0, label=0, model=None, mode="ok", delay=0.0):
    """
    Build (but do not start) a stub oracle server.

    ``mode`` is one of ``ok`` (answer with ``model``'s label, or the fixed
    ``label``), ``malformed`` (non-JSON body), ``error`` (HTTP 500) or
    ``delay`` (sleep ``delay`` seconds, then answer normally).
    """
    if mode not in ("ok", "malformed", "error", "delay"):
        raise ValueError(f"unknown stub mode {mode!r}")
    server = ThreadingHTTPServer((host, port), _StubHandler)
    server.daemon_threads = True
    server.stub_config = {"label": label, "model": model, "mode": mode, "delay": delay}
    return server


def start_stub_server(**kwargs):
    """Start a stub server on a background thread; returns ``(server, url)``."""
    server = make_stub_server(**kwargs)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    host, port = server.server_address[:2]
    return server, f"http://{host}:{port}/predict"
