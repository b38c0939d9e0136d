"""Form body parsing: multipart/form-data (RFC 2388) and urlencoded forms."""

from dataclasses import dataclass, field
from typing import Optional
from urllib.parse import parse_qsl, quote, unquote

from ..errors import MissingBoundary, UnterminatedPart

MULTIPART = "multipart/form-data"
URLENCODED = "application/x-www-form-urlencoded"


@dataclass
class Part:
    name: str
    body: bytes
    filename: Optional[str] = None
    content_type: Optional[str] = None

    @property
    def is_file(self):
        return self.filename is not None


@dataclass
class MultipartForm:
    parts: list = field(default_factory=list)
    boundary: str = ""

    def fields(self):
        return [(p.name, p.body.decode("utf-8", "replace")) for p in self.parts if not p.is_file]

    def files(self):
        return [p for p in self.parts if p.is_file]

    @property
    def content_type(self):
        return f'{MULTIPART}; boundary="{self.boundary}"'

    def serialize(self) -> bytes:
        if not self.boundary:
            raise MissingBoundary()
        delim = b"--" + self.boundary.encode("ascii")
        out = bytearray()
        for p in self.parts:
            out += delim + b"\r\n"
            disp = f'form-data; name="{_quote(p.name)}"'
            if p.filename is not None:
                disp += f'; filename="{_quote(p.filename)}"'
            out += f"Content-Disposition: {disp}\r\n".encode("utf-8")
            if p.content_type:
                out += f"Content-Type: {p.content_type}\r\n".encode("utf-8")
            out += b"\r\n" + p.body + b"\r\n"
        out += delim + b"--\r\n"
        return bytes(out)


def _quote(s):
    return s.replace("\\", "\\\\").replace('"', '\\"')


def parse_header_params(value: str):
    """Split ``main; k=v; k2="q;v"`` into ``("main", {"k": "v", "k2": "q;v"})``."""
    items, buf, quoted, escaped = [], [], False, False
    for ch in value:
        if escaped:
            buf.append(ch)
            escaped = False
        elif quoted and ch == "\\":
            escaped = True
        elif ch == '"':
            quoted = not quoted
            buf.append(ch)
        elif ch == ";" and not quoted:
            items.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    items.append("".join(buf))
    main = items[0].strip().lower()
    params = {}
    for item in items[1:]:
        key, sep, val = item.partition("=")
        key = key.strip().lower()
        if not sep or not key:
            continue
        val = val.strip()
        if len(val) >= 2 and val[0] == val[-1] == '"':
            val = val[1:-1]
        if key.endswith("*"):
            # RFC 5987 ext-value: charset'lang'pct-encoded
            charset, _, rest = val.partition("'")
            _, _, encoded = rest.partition("'")
            try:
                val = unquote(encoded, encoding=charset or "utf-8", errors="replace")
            except LookupError:
                val = unquote(encoded, errors="replace")
            key = key[:-1]
        elif key in params:
            continue
        params[key] = val
    return main, params


def _parse_part(raw: bytes) -> Part:
    if raw.startswith(b"\r\n"):
        head, body = b"", raw[2:]
    else:
        idx = raw.find(b"\r\n\r\n")
        if idx < 0:
            raise UnterminatedPart("part headers are not terminated")
        head, body = raw[:idx], raw[idx + 4:]
    name, filename, ctype = "", None, None
    for line in head.decode("utf-8", "replace").split("\r\n"):
        key, sep, val = line.partition(":")
        if not sep:
            continue
        key = key.strip().lower()
        if key == "content-disposition":
            _, params = parse_header_params(val)
            name = params.get("name", "")
            filename = params.get("filename")
        elif key == "content-type":
            ctype = val.strip()
    return Part(name, body, filename, ctype)


def parse_multipart_body(body: bytes, boundary: str) -> MultipartForm:
    if not boundary:
        raise MissingBoundary()
    delim = b"--" + boundary.encode("utf-8")
    if body.startswith(delim):
        pos = len(delim)
    else:
        idx = body.find(b"\r\n" + delim)
        if idx < 0:
            raise UnterminatedPart("no opening boundary")
        pos = idx + 2 + len(delim)
    form = MultipartForm(boundary=boundary)
    next_delim = b"\r\n" + delim
    while True:
        if body.startswith(b"--", pos):
            return form
        # transport padding after the delimiter
        while pos < len(body) and body[pos] in b" \t":
            pos += 1
        if not body.startswith(b"\r\n", pos):
            raise UnterminatedPart("boundary not followed by CRLF")
        pos += 2
        end = body.find(next_delim, pos)
        if end < 0:
            raise UnterminatedPart()
        form.parts.append(_parse_part(body[pos:end]))
        pos = end + len(next_delim)


def parse_urlencoded(body: bytes) -> MultipartForm:
    text = body.decode("utf-8", "replace")
    pairs = parse_qsl(text, keep_blank_values=True)
    return MultipartForm(parts=[Part(k, v.encode("utf-8")) for k, v in pairs])


def encode_urlencoded(pairs) -> bytes:
    return "&".join(f"{quote(k, safe='')}={quote(v, safe='')}" for k, v in pairs).encode("ascii")


def parse_multipart(body: bytes, content_type: str) -> MultipartForm:
    """Parse a form body according to its Content-Type."""
    main, params = parse_header_params(content_type or "")
    if main == URLENCODED:
        return parse_urlencoded(body)
    if main == MULTIPART:
        return parse_multipart_body(body, params.get("boundary", ""))
    raise ValueError(f"not a form content type: {main!r}")


def is_form(content_type) -> bool:
    main, _ = parse_header_params(content_type or "")
    return main in (MULTIPART, URLENCODED)
