"""Inner request model and the demo API served behind the tunnel."""

import hashlib
import json
from dataclasses import dataclass, field
from urllib.parse import parse_qsl, urlsplit

from ..errors import BadRequest
from ..packet.cookies import CookieJar, parse_cookie_headers
from ..packet.message import InnerMessage
from ..packet.multipart import is_form, parse_multipart


@dataclass
class InnerRequest:
    method: str
    path: str
    version: str
    query_params: list = field(default_factory=list)
    form_fields: list = field(default_factory=list)
    files: list = field(default_factory=list)
    cookies: CookieJar = field(default_factory=CookieJar)
    headers: list = field(default_factory=list)
    body: bytes = b""

    def header(self, name, default=None):
        lname = name.lower()
        for k, v in self.headers:
            if k.lower() == lname:
                return v
        return default

    def json(self):
        return json.loads(self.body or b"null")


def build_inner_request(start_line: str, headers, body: bytes) -> InnerRequest:
    """Rebuild everything a router needs from a (decrypted) request."""
    parts = start_line.split(" ")
    if len(parts) != 3:
        raise BadRequest(f"bad request line {start_line!r}")
    method, target, version = parts
    url = urlsplit(target)
    req = InnerRequest(
        method=method,
        path=url.path or "/",
        version=version,
        query_params=parse_qsl(url.query, keep_blank_values=True),
        cookies=parse_cookie_headers(v for k, v in headers if k.lower() == "cookie"),
        headers=list(headers),
        body=body,
    )
    ctype = req.header("Content-Type")
    if is_form(ctype):
        form = parse_multipart(body, ctype)
        req.form_fields = form.fields()
        req.files = form.files()
    return req


def _json(status, obj, headers=()):
    body = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return InnerMessage.response(status, [("Content-Type", "application/json")] + list(headers), body)


class DemoApp:
    """Three routes: echo, cookie reflection, and request inspection."""

    def dispatch(self, req: InnerRequest) -> InnerMessage:
        if req.path == "/echo":
            ctype = req.header("Content-Type", "application/octet-stream")
            return InnerMessage.response(200, [("Content-Type", ctype)], req.body)
        if req.path == "/cookies":
            set_cookies = [("Set-Cookie", v + "; Path=/") for k, v in req.query_params if k == "set"]
            return _json(200, {"cookies": req.cookies.pairs()}, set_cookies)
        if req.path == "/inspect":
            return _json(200, self.describe(req))
        return _json(404, {"error": "not found", "path": req.path})

    @staticmethod
    def describe(req: InnerRequest):
        try:
            parsed = json.loads(req.body) if "json" in (req.header("Content-Type") or "") else None
        except ValueError:
            parsed = None
        return {
            "method": req.method,
            "path": req.path,
            "query": req.query_params,
            "form": req.form_fields,
            "files": [
                {
                    "name": f.name,
                    "filename": f.filename,
                    "content_type": f.content_type,
                    "size": len(f.body),
                    "sha256": hashlib.sha256(f.body).hexdigest(),
                }
                for f in req.files
            ],
            "cookies": req.cookies.pairs(),
            "json": parsed,
        }
