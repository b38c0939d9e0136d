"""Serve a TunnelServer (or any ``handle(HttpRequest)`` object) over stdlib HTTP."""

import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..wire import HttpRequest

log = logging.getLogger(__name__)


def make_handler(target):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def _dispatch(self):
            length = int(self.headers.get("Content-Length") or 0)
            body = self.rfile.read(length) if length else b""
            req = HttpRequest(self.command, self.path, list(self.headers.items()), body)
            req.client_address = self.client_address
            resp = target.handle(req)
            self.send_response(resp.status)
            for name, value in resp.headers:
                if name.lower() not in ("content-length", "connection", "transfer-encoding"):
                    self.send_header(name, value)
            self.send_header("Content-Length", str(len(resp.body)))
            self.end_headers()
            self.wfile.write(resp.body)

        do_GET = do_POST = do_PUT = do_DELETE = do_PATCH = do_HEAD = _dispatch

        def log_message(self, fmt, *args):
            log.debug("%s - %s", self.address_string(), fmt % args)

    return Handler


def make_http_server(target, host="127.0.0.1", port=0) -> ThreadingHTTPServer:
    httpd = ThreadingHTTPServer((host, port), make_handler(target))
    httpd.daemon_threads = True
    return httpd


def serve_in_thread(target, host="127.0.0.1", port=0):
    """Start serving in a daemon thread; returns ``(httpd, base_url)``."""
    httpd = make_http_server(target, host, port)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    h, p = httpd.server_address[:2]
    return httpd, f"http://{h}:{p}"
