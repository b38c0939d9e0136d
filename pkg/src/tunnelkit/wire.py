"""Outer HTTP request/response values and the transports that move them."""

import http.client
import json
import time
from dataclasses import dataclass, field
from urllib.parse import urlsplit

from .errors import TransportError


def _get(headers, name, default=None):
    lname = name.lower()
    for k, v in headers:
        if k.lower() == lname:
            return v
    return default


@dataclass
class HttpRequest:
    method: str
    target: str
    headers: list = field(default_factory=list)
    body: bytes = b""

    def header(self, name, default=None):
        return _get(self.headers, name, default)

    @property
    def path(self):
        return urlsplit(self.target).path


@dataclass
class HttpResponse:
    status: int
    headers: list = field(default_factory=list)
    body: bytes = b""

    def header(self, name, default=None):
        return _get(self.headers, name, default)

    def json(self):
        return json.loads(self.body)


def json_response(status, obj, extra_headers=()):
    body = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return HttpResponse(status, [("Content-Type", "application/json")] + list(extra_headers), body)


def unix_now() -> int:
    return int(time.time())


class LocalTransport:
    """Calls a handler object in-process; used by tests and the proxy."""

    def __init__(self, handler):
        self.handler = handler

    def roundtrip(self, req: HttpRequest) -> HttpResponse:
        return self.handler.handle(req)


class HttpTransport:
    """Plain HTTP/1.1 transport over http.client, one connection per request."""

    def __init__(self, base_url: str, timeout: float = 10.0):
        parts = urlsplit(base_url)
        if parts.scheme not in ("http", "https"):
            raise ValueError(f"unsupported URL scheme {parts.scheme!r}")
        self.scheme = parts.scheme
        self.netloc = parts.netloc
        self.prefix = parts.path.rstrip("/")
        self.timeout = timeout

    def roundtrip(self, req: HttpRequest) -> HttpResponse:
        cls = http.client.HTTPSConnection if self.scheme == "https" else http.client.HTTPConnection
        conn = cls(self.netloc, timeout=self.timeout)
        try:
            # putheader keeps repeated headers (e.g. several Cookie lines)
            conn.putrequest(req.method, self.prefix + req.target, skip_accept_encoding=True)
            for name, value in req.headers:
                if name.lower() != "content-length":
                    conn.putheader(name, value)
            conn.putheader("Content-Length", str(len(req.body)))
            conn.endheaders(req.body or None)
            resp = conn.getresponse()
            return HttpResponse(resp.status, list(resp.getheaders()), resp.read())
        except (OSError, http.client.HTTPException) as exc:
            raise TransportError(f"{req.method} {req.target}: {exc}") from exc
        finally:
            conn.close()
