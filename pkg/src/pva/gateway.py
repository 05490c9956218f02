"""Request gateway: receive, transform, classify, route, respond.

Wire format is one JSON object per line (UTF-8) in both directions.
Request keys: ``id``, ``text``, optional ``channel`` ("text" or
"voice-transcript").  Every input line yields exactly one response line.
"""

from __future__ import annotations

import json
import logging
import signal
import socketserver
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Optional

from .errors import BindFailure, MissingDefault, ParseFailure
from .linclass import rank
from .pipeline import Classifier

log = logging.getLogger(__name__)

CHANNELS = ("text", "voice-transcript")


@dataclass(frozen=True)
class Request:
    id: str
    text: str
    channel: str = "text"
    received_at: float = field(default_factory=time.time)


@dataclass
class Response:
    id: Optional[str]
    label: Optional[str] = None
    confidence: Optional[float] = None
    alternatives: list[tuple[str, float]] = field(default_factory=list)
    route: Optional[str] = None
    latency_ms: float = 0.0
    error: Optional[tuple[str, str]] = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "label": self.label,
            "confidence": self.confidence,
            "alternatives": [{"label": l, "confidence": c} for l, c in self.alternatives],
            "route": self.route,
            "latency_ms": self.latency_ms,
            "error": None if self.error is None else {"code": self.error[0], "message": self.error[1]},
        }

    def to_line(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False) + "\n"


@dataclass(frozen=True)
class RouteTable:
    routes: dict[str, str]
    default_route: str

    def __post_init__(self) -> None:
        if not self.default_route or not all(isinstance(r, str) and r for r in self.routes.values()):
            raise ParseFailure("route strings must be nonempty")

    def route(self, label: str) -> str:
        return self.routes.get(label, self.default_route)


def load_routes(path: str | Path) -> RouteTable:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseFailure(f"cannot read route table {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseFailure("route table must be a JSON object")
    if "default_route" not in data:
        raise MissingDefault(f"{path} has no default_route")
    routes = data.get("routes", {})
    if not isinstance(routes, dict) or not isinstance(data["default_route"], str):
        raise ParseFailure("expected {'default_route': str, 'routes': {label: route}}")
    return RouteTable(dict(routes), data["default_route"])


class BadRequest(ValueError):
    def __init__(self, message: str, request_id: Optional[str] = None):
        super().__init__(message)
        self.request_id = request_id


def parse_request(line: str) -> Request:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise BadRequest(f"not a JSON record: {exc.msg}") from None
    if not isinstance(record, dict):
        raise BadRequest("record must be a JSON object")
    req_id = record.get("id")
    if not isinstance(req_id, str) or not req_id:
        raise BadRequest("id must be a nonempty string")
    text = record.get("text")
    if not isinstance(text, str):
        raise BadRequest("text must be a string", req_id)
    channel = record.get("channel", "text")
    if channel not in CHANNELS:
        raise BadRequest(f"unknown channel {channel!r}", req_id)
    return Request(id=req_id, text=text, channel=channel)


def handle_request(
    req: Request, classifier: Classifier, routes: Optional[RouteTable], top_k: int = 3
) -> Response:
    """Never raises; failures come back as ``Response.error``."""
    t0 = time.perf_counter()
    resp = Response(id=req.id)
    try:
        tokens = classifier.tokens(req.text)
        if not tokens:
            resp.error = ("empty_text", "no tokens left after tokenization")
        else:
            probs = classifier.probabilities_from_tokens(tokens)
            ranked = [(classifier.label_names[i], p) for i, p in rank(probs, max(1, top_k))]
            resp.label, resp.confidence = ranked[0]
            resp.alternatives = ranked
            resp.route = routes.route(resp.label) if routes is not None else None
    except Exception as exc:  # the gateway reports, it does not crash
        log.exception("request %s failed", req.id)
        resp = Response(id=req.id, error=("internal", f"{type(exc).__name__}: {exc}"))
    resp.latency_ms = (time.perf_counter() - t0) * 1000.0
    return resp


def handle_line(line: str, classifier: Classifier, routes: RouteTable, top_k: int = 3) -> Response:
    try:
        req = parse_request(line)
    except BadRequest as exc:
        return Response(id=exc.request_id, error=("bad_request", str(exc)))
    return handle_request(req, classifier, routes, top_k)


class _Shutdown(Exception):
    pass


def serve_stream(
    reader: IO[str],
    writer: IO[str],
    classifier: Classifier,
    routes: RouteTable,
    top_k: int = 3,
    workers: int = 1,
) -> int:
    """Answer every line of ``reader`` on ``writer``; returns the response count.

    With ``workers > 1`` requests run on a thread pool and responses are
    written in completion order; writes are serialised by a lock.
    """
    lock = threading.Lock()
    count = 0

    def emit(resp: Response) -> None:
        nonlocal count
        with lock:
            writer.write(resp.to_line())
            writer.flush()
            count += 1

    if workers <= 1:
        for line in reader:
            emit(handle_line(line.rstrip("\r\n"), classifier, routes, top_k))
        return count

    with ThreadPoolExecutor(max_workers=workers) as pool:
        for line in reader:
            fut = pool.submit(handle_line, line.rstrip("\r\n"), classifier, routes, top_k)
            fut.add_done_callback(lambda f: emit(f.result()))
    return count


def _raise_shutdown(signum, frame):
    raise _Shutdown()


def serve_stdio(classifier: Classifier, routes: RouteTable, top_k: int = 3, workers: int = 1) -> int:
    """Serve on stdin/stdout until end-of-input or SIGTERM/SIGINT; returns an exit code."""
    previous = {s: signal.signal(s, _raise_shutdown) for s in (signal.SIGTERM, signal.SIGINT)}
    reader = open(sys.stdin.fileno(), "r", encoding="utf-8", errors="replace", newline="\n", closefd=False)
    writer = open(sys.stdout.fileno(), "w", encoding="utf-8", newline="\n", closefd=False)
    try:
        serve_stream(reader, writer, classifier, routes, top_k, workers)
    except _Shutdown:
        log.info("shutdown signal received")
    finally:
        writer.flush()
        for s, handler in previous.items():
            signal.signal(s, handler)
    return 0


class _ThreadingServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class _SocketWriter:
    def __init__(self, wfile):
        self._wfile = wfile

    def write(self, text: str) -> None:
        self._wfile.write(text.encode("utf-8"))

    def flush(self) -> None:
        self._wfile.flush()


def make_tcp_server(
    host: str,
    port: int,
    classifier: Classifier,
    routes: RouteTable,
    top_k: int = 3,
    workers: int = 1,
) -> socketserver.TCPServer:
    """Bind a TCP listener; each connection speaks the line protocol."""

    class Handler(socketserver.StreamRequestHandler):
        def handle(self) -> None:
            reader = self.rfile
            writer = _SocketWriter(self.wfile)
            lines = (raw.decode("utf-8", errors="replace") for raw in reader)
            try:
                serve_stream(lines, writer, classifier, routes, top_k, workers)
            except (ConnectionError, BrokenPipeError):
                log.info("client %s went away", self.client_address)

    try:
        return _ThreadingServer((host, port), Handler)
    except OSError as exc:
        raise BindFailure(f"cannot listen on {host}:{port}: {exc}") from exc


def serve_tcp(server: socketserver.TCPServer) -> int:
    """Run ``server`` until SIGTERM/SIGINT."""
    stop = threading.Event()

    def on_signal(signum, frame):
        stop.set()

    previous = {s: signal.signal(s, on_signal) for s in (signal.SIGTERM, signal.SIGINT)}
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        while not stop.wait(0.2):
            pass
    finally:
        server.shutdown()
        server.server_close()
        for s, handler in previous.items():
            signal.signal(s, handler)
    return 0
