from .cookies import Cookie, CookieJar, parse_cookie_header, parse_set_cookie, serialize_cookie_header
from .envelope import (
    NONCE_SIZE,
    UID_HEADER,
    UID_SIZE,
    SealedEnvelope,
    TunnelPacket,
    decode_envelope,
    encode_envelope,
    open_envelope,
    seal_envelope,
    uid_from_header,
    uid_to_header,
)
from .headers import merge_headers
from .message import InnerMessage, decode_inner, encode_inner
from .multipart import MultipartForm, Part, parse_multipart

__all__ = [
    "Cookie", "CookieJar", "parse_cookie_header", "parse_set_cookie", "serialize_cookie_header",
    "NONCE_SIZE", "UID_HEADER", "UID_SIZE", "SealedEnvelope", "TunnelPacket",
    "decode_envelope", "encode_envelope", "open_envelope", "seal_envelope",
    "uid_from_header", "uid_to_header", "merge_headers",
    "InnerMessage", "decode_inner", "encode_inner",
    "MultipartForm", "Part", "parse_multipart",
]
