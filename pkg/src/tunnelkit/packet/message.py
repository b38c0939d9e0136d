"""HTTP/1.1-style message codec for the plaintext carried inside a packet."""

from dataclasses import dataclass, field

from ..errors import IllegalHeaderCharacter, MalformedFraming, MalformedHeader

CRLF = b"\r\n"
SEPARATOR = b"\r\n\r\n"

_FORBIDDEN_IN_NAME = set("\r\n:\x00 \t")

REASONS = {
    200: "OK", 201: "Created", 204: "No Content", 400: "Bad Request",
    401: "Unauthorized", 403: "Forbidden", 404: "Not Found",
    405: "Method Not Allowed", 409: "Conflict", 500: "Internal Server Error",
    502: "Bad Gateway",
}


@dataclass
class InnerMessage:
    start_line: str
    headers: list = field(default_factory=list)
    body: bytes = b""

    def get(self, name, default=None):
        lname = name.lower()
        for k, v in self.headers:
            if k.lower() == lname:
                return v
        return default

    def get_all(self, name):
        lname = name.lower()
        return [v for k, v in self.headers if k.lower() == lname]

    def without(self, *names):
        drop = {n.lower() for n in names}
        return [(k, v) for k, v in self.headers if k.lower() not in drop]

    # request helpers

    @property
    def is_response(self):
        return self.start_line.startswith("HTTP/")

    @property
    def method(self):
        return self.start_line.split(" ", 1)[0]

    @property
    def target(self):
        parts = self.start_line.split(" ")
        return parts[1] if len(parts) > 1 else ""

    # response helpers

    @property
    def status(self):
        parts = self.start_line.split(" ", 2)
        try:
            return int(parts[1])
        except (IndexError, ValueError):
            raise MalformedFraming(f"not a status line: {self.start_line!r}") from None

    @classmethod
    def request(cls, method, target, headers=(), body=b"", version="HTTP/1.1"):
        return cls(f"{method} {target} {version}", list(headers), body)

    @classmethod
    def response(cls, status, headers=(), body=b"", version="HTTP/1.1"):
        reason = REASONS.get(status, "Unknown")
        return cls(f"{version} {status} {reason}", list(headers), body)


def _check_header(name, value):
    if not name or any(ch in _FORBIDDEN_IN_NAME for ch in name):
        raise IllegalHeaderCharacter(f"bad header name {name!r}")
    if "\r" in value or "\n" in value or "\x00" in value:
        raise IllegalHeaderCharacter(f"bad value for header {name!r}")


def encode_inner(msg: InnerMessage) -> bytes:
    if not msg.start_line or "\r" in msg.start_line or "\n" in msg.start_line:
        raise IllegalHeaderCharacter("bad start line")
    lines = [msg.start_line]
    for name, value in msg.headers:
        _check_header(name, value)
        lines.append(f"{name}: {value}")
    head = "\r\n".join(lines).encode("utf-8")
    return head + SEPARATOR + msg.body


def decode_inner(raw: bytes) -> InnerMessage:
    idx = raw.find(SEPARATOR)
    if idx < 0:
        raise MalformedFraming()
    body = raw[idx + len(SEPARATOR):]
    try:
        head = raw[:idx].decode("utf-8")
    except UnicodeDecodeError:
        raise MalformedHeader("header section is not UTF-8") from None
    lines = head.split("\r\n")
    start_line = lines[0]
    if not start_line:
        raise MalformedFraming("empty start line")
    headers = []
    for line in lines[1:]:
        name, sep, value = line.partition(":")
        if not sep or not name or name != name.strip():
            raise MalformedHeader(f"bad header line {line!r}")
        headers.append((name, value.strip(" \t")))
    return InnerMessage(start_line, headers, body)
