"""Tunnel packet framing: ``iv || AES-128-GCM(headers CRLF CRLF payload) || tag``.

Only the session UID travels outside the sealed section, as a transport header.
Inside, the timestamp, the anti-replay nonce and any cookies are reserved
header lines placed ahead of the inner message's own headers.
"""

import base64
import binascii
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

from ..crypto import aead
from ..errors import (
    AuthenticationFailure,
    FutureTimestamp,
    MalformedHeader,
    ReplayDetected,
    StalePacket,
    UnknownSession,
)
from .cookies import parse_cookie_headers, serialize_cookie_header
from .message import InnerMessage, decode_inner, encode_inner

UID_SIZE = 16
NONCE_SIZE = 16
WINDOW_SECONDS = 120
FUTURE_SKEW_SECONDS = 5

UID_HEADER = "X-Tunnel-UID"
TIMESTAMP_HEADER = "X-Tunnel-Timestamp"
NONCE_HEADER = "X-Tunnel-Nonce"
COOKIE_HEADER = "Cookie"
PACKET_CONTENT_TYPE = "application/octet-stream"

RESERVED = {TIMESTAMP_HEADER.lower(), NONCE_HEADER.lower(), UID_HEADER.lower()}


@dataclass(frozen=True)
class TunnelPacket:
    uid: bytes
    iv: bytes
    ciphertext: bytes
    tag: bytes

    def to_body(self) -> bytes:
        return self.iv + self.ciphertext + self.tag

    @classmethod
    def from_body(cls, uid: bytes, body: bytes) -> "TunnelPacket":
        if len(body) < aead.IV_SIZE + aead.TAG_SIZE:
            raise AuthenticationFailure()
        return cls(uid, body[:aead.IV_SIZE], body[aead.IV_SIZE:-aead.TAG_SIZE], body[-aead.TAG_SIZE:])

    def outer_headers(self):
        return [(UID_HEADER, uid_to_header(self.uid)), ("Content-Type", PACKET_CONTENT_TYPE)]


def uid_to_header(uid: bytes) -> str:
    return uid.hex()


def uid_from_header(value: Optional[str]) -> bytes:
    try:
        uid = bytes.fromhex(value or "")
    except ValueError:
        raise UnknownSession("malformed session UID") from None
    if len(uid) != UID_SIZE:
        raise UnknownSession("malformed session UID")
    return uid


@dataclass
class SealedEnvelope:
    timestamp: int
    nonce: bytes
    inner: InnerMessage
    cookies: list = field(default_factory=list)

    def sealed_headers(self):
        """Headers as they appear inside the packet, cookies included."""
        extra = [(COOKIE_HEADER, serialize_cookie_header(self.cookies))] if self.cookies else []
        return extra + list(self.inner.headers)


def encode_envelope(env: SealedEnvelope) -> bytes:
    for name, _ in env.inner.headers:
        lname = name.lower()
        if lname in RESERVED or lname == "cookie":
            raise ValueError(f"{name} is reserved inside the sealed section")
    if len(env.nonce) != NONCE_SIZE:
        raise ValueError("nonce must be 16 bytes")
    headers = [
        (TIMESTAMP_HEADER, str(int(env.timestamp))),
        (NONCE_HEADER, base64.b64encode(env.nonce).decode("ascii")),
    ] + env.sealed_headers()
    return encode_inner(InnerMessage(env.inner.start_line, headers, env.inner.body))


def decode_envelope(plaintext: bytes) -> SealedEnvelope:
    msg = decode_inner(plaintext)
    stamps, nonces = msg.get_all(TIMESTAMP_HEADER), msg.get_all(NONCE_HEADER)
    if len(stamps) != 1 or len(nonces) != 1:
        raise MalformedHeader("sealed section needs exactly one timestamp and one nonce")
    ts = stamps[0]
    if not ts.isdigit() or not ts.isascii():
        raise MalformedHeader("timestamp is not a decimal integer")
    try:
        nonce = base64.b64decode(nonces[0], validate=True)
    except (binascii.Error, ValueError):
        raise MalformedHeader("nonce is not base64") from None
    if len(nonce) != NONCE_SIZE:
        raise MalformedHeader("nonce must be 16 bytes")
    cookies = parse_cookie_headers(msg.get_all(COOKIE_HEADER)).pairs()
    inner = InnerMessage(msg.start_line, msg.without(TIMESTAMP_HEADER, NONCE_HEADER, COOKIE_HEADER), msg.body)
    return SealedEnvelope(int(ts), nonce, inner, cookies)


def seal_envelope(key: bytes, uid: bytes, env: SealedEnvelope,
                  entropy: Callable[[int], bytes] = os.urandom) -> TunnelPacket:
    iv = entropy(aead.IV_SIZE)
    ciphertext, tag = aead.seal(key, iv, encode_envelope(env))
    return TunnelPacket(uid, iv, ciphertext, tag)


def check_window(timestamp: int, now: int, window: int = WINDOW_SECONDS,
                 skew: int = FUTURE_SKEW_SECONDS) -> None:
    if timestamp > now + skew:
        raise FutureTimestamp()
    if now - timestamp > window:
        raise StalePacket()


def open_envelope(
    key: bytes,
    pkt: TunnelPacket,
    now: int,
    nonce_seen: Optional[Callable[[bytes], bool]] = None,
    *,
    window: int = WINDOW_SECONDS,
    skew: int = FUTURE_SKEW_SECONDS,
) -> SealedEnvelope:
    """Authenticate, then check freshness, then check the nonce.

    Any error other than AuthenticationFailure means the packet did decrypt.
    The nonce is not recorded here; the caller does that after success.
    """
    plaintext = aead.unseal(key, pkt.iv, pkt.ciphertext, pkt.tag)
    env = decode_envelope(plaintext)
    check_window(env.timestamp, now, window, skew)
    if nonce_seen is not None and nonce_seen(env.nonce):
        raise ReplayDetected()
    return env
