"""Server-side session registry and the per-session replay cache."""

import io
import os
import struct
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

from .crypto.hashing import derive_srp_session_key
from .errors import GraceExpired, ReplayDetected, UnknownSession
from .packet.envelope import FUTURE_SKEW_SECONDS, UID_SIZE, WINDOW_SECONDS

DEFAULT_TTL = 900
DEFAULT_GRACE = 30
NONCE_RETENTION = WINDOW_SECONDS + FUTURE_SKEW_SECONDS

LIVE, EXPIRED = "live", "expired"


@dataclass
class Session:
    uid: bytes
    key: Optional[bytes]
    created_at: int
    expires_at: int
    _encrypted: bool = field(default=True, repr=False)
    access_token: Optional[str] = None
    refresh_token: Optional[str] = None
    previous_key: Optional[bytes] = field(default=None, repr=False)
    previous_key_until: int = 0
    srp_state: object = field(default=None, repr=False, compare=False)

    @property
    def encrypted(self) -> bool:
        return self._encrypted

    def status(self, now: int) -> str:
        return LIVE if now <= self.expires_at else EXPIRED

    def refresh_keys(self, now: int):
        """Keys that may open a refresh request at ``now``, newest first."""
        keys = [self.key]
        if self.previous_key is not None and now <= self.previous_key_until:
            keys.append(self.previous_key)
        return keys

    def __repr__(self):
        return (f"Session(uid={self.uid.hex()}, encrypted={self._encrypted}, "
                f"expires_at={self.expires_at})")


class NonceCache:
    """Seen (uid, nonce) pairs, evicted after the window plus skew."""

    def __init__(self, retention: int = NONCE_RETENTION):
        self.retention = retention
        self._seen: dict = {}
        self._lock = threading.Lock()
        self._last_sweep = None

    def _evict(self, now):
        horizon = now - self.retention
        for uid in list(self._seen):
            nonces = self._seen[uid]
            for n in [n for n, ts in nonces.items() if ts < horizon]:
                del nonces[n]
            if not nonces:
                del self._seen[uid]

    def seen(self, uid: bytes, nonce: bytes) -> bool:
        with self._lock:
            return nonce in self._seen.get(uid, ())

    def check_and_record(self, uid: bytes, nonce: bytes, now: int) -> None:
        with self._lock:
            if self._last_sweep is None or now - self._last_sweep >= 1:
                self._evict(now)
                self._last_sweep = now
            nonces = self._seen.setdefault(uid, {})
            if nonce in nonces:
                raise ReplayDetected()
            nonces[nonce] = now

    def forget(self, uid: bytes) -> None:
        with self._lock:
            self._seen.pop(uid, None)

    def __len__(self):
        with self._lock:
            return sum(len(v) for v in self._seen.values())


class SessionStore:
    """In-memory store; every operation is atomic under one lock."""

    def __init__(self, ttl: int = DEFAULT_TTL, grace: int = DEFAULT_GRACE,
                 entropy: Callable[[int], bytes] = os.urandom):
        self.ttl = ttl
        self.grace = grace
        self._entropy = entropy
        self._sessions: dict = {}
        self._lock = threading.RLock()
        self.nonces = NonceCache()

    def _new_uid(self):
        while True:
            uid = self._entropy(UID_SIZE)
            if uid not in self._sessions:
                return uid

    def create_session(self, key: bytes, now: int, ttl: Optional[int] = None) -> bytes:
        with self._lock:
            uid = self._new_uid()
            self._sessions[uid] = Session(uid, key, now, now + (self.ttl if ttl is None else ttl))
            return uid

    def create_plain_session(self, now: int, ttl: Optional[int] = None) -> bytes:
        """An unencrypted session, as used by clients that never ran the tunnel."""
        with self._lock:
            uid = self._new_uid()
            self._sessions[uid] = Session(uid, None, now, now + (self.ttl if ttl is None else ttl),
                                          _encrypted=False)
            return uid

    def get(self, uid: bytes) -> Session:
        with self._lock:
            try:
                return self._sessions[uid]
            except KeyError:
                raise UnknownSession() from None

    def lookup(self, uid: bytes, now: int):
        """Return ``(session, status)``; status is LIVE or EXPIRED."""
        session = self.get(uid)
        return session, session.status(now)

    def bind_tokens(self, uid: bytes, access_token: str, refresh_token: str) -> None:
        with self._lock:
            for other in self._sessions.values():
                if other.uid != uid and access_token in (other.access_token, other.refresh_token):
                    raise ValueError("token already bound to another session")
            s = self.get(uid)
            s.access_token, s.refresh_token = access_token, refresh_token

    def refresh_session(self, uid: bytes, new_key: bytes, now: int, ttl: Optional[int] = None) -> None:
        with self._lock:
            s = self.get(uid)
            if now > s.expires_at + self.grace:
                raise GraceExpired()
            s.previous_key = s.key
            s.previous_key_until = now + self.grace
            s.key = new_key
            s.expires_at = max(s.expires_at, now + (self.ttl if ttl is None else ttl))

    def rekey_from_srp(self, uid: bytes, k: bytes) -> None:
        with self._lock:
            s = self.get(uid)
            s.key = derive_srp_session_key(k)
            s.previous_key = None
            s.previous_key_until = 0

    def check_and_record_nonce(self, uid: bytes, nonce: bytes, now: int) -> None:
        self.nonces.check_and_record(uid, nonce, now)

    def remove(self, uid: bytes) -> None:
        with self._lock:
            self._sessions.pop(uid, None)
        self.nonces.forget(uid)

    def purge(self, now: int) -> int:
        """Drop sessions past expiry and grace."""
        with self._lock:
            dead = [u for u, s in self._sessions.items() if now > s.expires_at + self.grace]
            for u in dead:
                del self._sessions[u]
        for u in dead:
            self.nonces.forget(u)
        return len(dead)

    def __len__(self):
        with self._lock:
            return len(self._sessions)

    def __contains__(self, uid):
        with self._lock:
            return uid in self._sessions

    # -- snapshot persistence ---------------------------------------------

    def snapshot(self) -> bytes:
        with self._lock:
            out = io.BytesIO()
            for s in self._sessions.values():
                out.write(encode_record(s))
            return out.getvalue()

    def restore(self, data: bytes) -> int:
        sessions = list(decode_records(data))
        with self._lock:
            for s in sessions:
                self._sessions[s.uid] = s
        return len(sessions)


# record: u32 length, then uid[16] created:i64 expires:i64 flags:u8
#         [key[16]] [prev_key[16] prev_until:i64] [u16 len + access] [u16 len + refresh]
_F_ENCRYPTED, _F_KEY, _F_PREV, _F_ACCESS, _F_REFRESH = 1, 2, 4, 8, 16


def encode_record(s: Session) -> bytes:
    flags = 0
    tail = b""
    if s.encrypted:
        flags |= _F_ENCRYPTED
    if s.key is not None:
        flags |= _F_KEY
        tail += s.key
    if s.previous_key is not None:
        flags |= _F_PREV
        tail += s.previous_key + struct.pack(">q", s.previous_key_until)
    for bit, tok in ((_F_ACCESS, s.access_token), (_F_REFRESH, s.refresh_token)):
        if tok is not None:
            flags |= bit
            raw = tok.encode("utf-8")
            tail += struct.pack(">H", len(raw)) + raw
    payload = s.uid + struct.pack(">qqB", s.created_at, s.expires_at, flags) + tail
    return struct.pack(">I", len(payload)) + payload


def decode_records(data: bytes):
    pos = 0
    while pos < len(data):
        if pos + 4 > len(data):
            raise ValueError("truncated record length")
        (n,) = struct.unpack_from(">I", data, pos)
        rec = data[pos + 4: pos + 4 + n]
        if len(rec) != n:
            raise ValueError("truncated record")
        pos += 4 + n
        uid = rec[:16]
        created, expires, flags = struct.unpack_from(">qqB", rec, 16)
        off = 16 + 17
        key = prev = None
        prev_until = 0
        if flags & _F_KEY:
            key, off = rec[off:off + 16], off + 16
        if flags & _F_PREV:
            prev = rec[off:off + 16]
            (prev_until,) = struct.unpack_from(">q", rec, off + 16)
            off += 24
        tokens = []
        for bit in (_F_ACCESS, _F_REFRESH):
            if flags & bit:
                (ln,) = struct.unpack_from(">H", rec, off)
                tokens.append(rec[off + 2: off + 2 + ln].decode("utf-8"))
                off += 2 + ln
            else:
                tokens.append(None)
        yield Session(uid, key, created, expires, bool(flags & _F_ENCRYPTED),
                      tokens[0], tokens[1], prev, prev_until)
