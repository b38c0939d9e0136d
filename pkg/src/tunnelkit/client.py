"""Client SDK: handshake, transparent sealing, refresh queuing, SRP login.

A :class:`TunnelClient` is safe to share between threads. Ordinary sends run
concurrently. Key changes (refresh and login) are exclusive: while one is in
progress new sends wait in ``pending`` and are replayed in arrival order once
the new key is installed.
"""

import base64
import binascii
import json
import logging
import os
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

from .crypto import aead
from .crypto.ecdh import ecdh_shared_secret, generate_ephemeral_keypair
from .crypto.hashing import derive_srp_session_key, derive_tunnel_key
from .crypto.signing import MODULUS_CONTEXT, verify_message, verify_server_param
from .crypto.srp import (
    SrpParams,
    SrpState,
    from_bytes,
    srp_client_respond,
    srp_client_verify_server,
)
from .errors import (
    AuthenticationFailure,
    ClockSkewSuspected,
    FutureTimestamp,
    GraceExpired,
    KeyExpired,
    ProofMismatch,
    ProofRejected,
    RefreshFailed,
    ServerError,
    SessionClosed,
    StalePacket,
    TransportError,
    TunnelError,
    UnknownSession,
)
from .packet.cookies import parse_cookie_header
from .packet.envelope import (
    NONCE_SIZE,
    UID_HEADER,
    SealedEnvelope,
    TunnelPacket,
    decode_envelope,
    open_envelope,
    seal_envelope,
    uid_to_header,
)
from .packet.message import InnerMessage
from .server.config import param_from_json
from .server.tunnel import ERROR_HEADER
from .wire import HttpRequest, HttpResponse, unix_now

log = logging.getLogger(__name__)

HANDSHAKING, ACTIVE, REFRESHING, CLOSED = "handshaking", "active", "refreshing", "closed"

STALE_STREAK_LIMIT = 2


def _b64(s) -> bytes:
    try:
        return base64.b64decode(s, validate=True)
    except (TypeError, binascii.Error, ValueError):
        raise TransportError("server sent malformed base64") from None


def _json(body: bytes):
    try:
        return json.loads(body)
    except ValueError:
        raise TransportError("server sent malformed JSON") from None


def raise_for_cleartext(resp: HttpResponse):
    """Turn a cleartext JSON error response into the matching exception."""
    code = resp.header(ERROR_HEADER)
    if code is None:
        raise TransportError(f"unexpected HTTP {resp.status}")
    try:
        doc = _json(resp.body)
        message = doc.get("message")
    except (TransportError, AttributeError):
        message = None
    code = int(code)
    for cls in (KeyExpired, GraceExpired, UnknownSession, AuthenticationFailure):
        if code == cls.code:
            raise cls(message)
    raise ServerError(code, message, encrypted=False, response=resp)


@dataclass
class _Pending:
    inner: InnerMessage
    done: threading.Event = field(default_factory=threading.Event)
    result: Optional[InnerMessage] = None
    error: Optional[BaseException] = None


@dataclass
class LoginChallenge:
    identity: str
    params: SrpParams
    server_ephemeral: int
    raw: dict


class TunnelClient:
    def __init__(self, transport, pinned_fingerprint: bytes,
                 clock: Callable[[], int] = unix_now,
                 entropy: Callable[[int], bytes] = os.urandom):
        self.transport = transport
        self.pinned_fingerprint = pinned_fingerprint
        self.clock = clock
        self.entropy = entropy
        self.uid: Optional[bytes] = None
        self.key: Optional[bytes] = None
        self.signing_key: Optional[bytes] = None
        self.state = HANDSHAKING
        self.pending: list = []
        self._q: Optional[bytes] = None
        self._cond = threading.Condition()
        self._in_flight = 0
        self._seen_response_nonces: set = set()
        self._sent_nonces: set = set()
        self._stale_streak = 0

    # -- handshake --------------------------------------------------------

    def handshake(self) -> "TunnelClient":
        resp = self.transport.roundtrip(HttpRequest("GET", "/tunnel/key"))
        if resp.status != 200:
            raise_for_cleartext(resp)
        doc = _json(resp.body)
        try:
            param = param_from_json(doc)
        except (KeyError, TypeError, ValueError):
            raise TransportError("malformed /tunnel/key response") from None
        # raises before anything is sent if the signer is not the pinned one
        q = verify_server_param(param, self.pinned_fingerprint)
        keypair = generate_ephemeral_keypair(self.entropy(32))
        z = ecdh_shared_secret(keypair, q)
        body = json.dumps({"v": base64.b64encode(keypair.public_point).decode()}).encode()
        resp = self.transport.roundtrip(
            HttpRequest("POST", "/tunnel/key", [("Content-Type", "application/json")], body))
        if resp.status != 200:
            raise_for_cleartext(resp)
        uid = _b64(_json(resp.body).get("uid"))
        with self._cond:
            self._q = q
            self.signing_key = param.signing_public_key
            self.uid = uid
            self.key = derive_tunnel_key(z, param.signer_fingerprint)
            self.state = ACTIVE
        log.info("tunnel established uid=%s", uid.hex())
        return self

    @classmethod
    def resume(cls, transport, pinned_fingerprint, uid, key, signing_key=None, q=None, **kw):
        client = cls(transport, pinned_fingerprint, **kw)
        client.uid, client.key, client.signing_key, client._q = uid, key, signing_key, q
        client.state = ACTIVE
        return client

    # -- sealing ----------------------------------------------------------

    def _fresh_nonce(self):
        while True:
            n = self.entropy(NONCE_SIZE)
            if n not in self._sent_nonces:
                self._sent_nonces.add(n)
                return n

    def _seal(self, inner: InnerMessage, key: bytes) -> HttpRequest:
        cookies = []
        for value in inner.get_all("Cookie"):
            cookies.extend(parse_cookie_header(value).pairs())
        plain = InnerMessage(inner.start_line, inner.without("Cookie"), inner.body)
        with self._cond:
            nonce = self._fresh_nonce()
        env = SealedEnvelope(self.clock(), nonce, plain, cookies)
        pkt = seal_envelope(key, self.uid, env, self.entropy)
        return HttpRequest("POST", "/tunnel/data", pkt.outer_headers(), pkt.to_body())

    def _open(self, resp: HttpResponse, keys) -> InnerMessage:
        if resp.header("Content-Type", "").split(";")[0].strip() != "application/octet-stream":
            raise_for_cleartext(resp)
        pkt = TunnelPacket.from_body(self.uid, resp.body)
        last = None
        for key in keys:
            try:
                with self._cond:
                    env = open_envelope(key, pkt, self.clock(),
                                        self._seen_response_nonces.__contains__)
                    self._seen_response_nonces.add(env.nonce)
                return env.inner
            except AuthenticationFailure as exc:
                last = exc
            except (StalePacket, FutureTimestamp) as exc:
                self._window_failure(key, pkt, exc)
        raise last or AuthenticationFailure()

    def _window_failure(self, key, pkt, exc):
        # An authentic reply outside our window that itself complains about
        # our timestamps means the local clock is off, not that it was replayed.
        env = decode_envelope(aead.unseal(key, pkt.iv, pkt.ciphertext, pkt.tag))
        code = env.inner.get(ERROR_HEADER)
        with self._cond:
            fresh = env.nonce not in self._seen_response_nonces
            self._seen_response_nonces.add(env.nonce)
        if fresh and code in (str(StalePacket.code), str(FutureTimestamp.code)):
            raise ClockSkewSuspected(
                int(code), "server and client clocks disagree; check the local clock",
                encrypted=True, response=env.inner) from exc
        raise exc

    def _check_inner_error(self, inner: InnerMessage) -> InnerMessage:
        code = inner.get(ERROR_HEADER)
        if code is None:
            self._stale_streak = 0
            return inner
        try:
            message = json.loads(inner.body).get("message")
        except (ValueError, AttributeError):
            message = None
        code = int(code)
        if code == StalePacket.code:
            self._stale_streak += 1
            if self._stale_streak >= STALE_STREAK_LIMIT:
                raise ClockSkewSuspected(
                    code, "server keeps rejecting packets as stale; check the local clock",
                    encrypted=True, response=inner)
        else:
            self._stale_streak = 0
        raise ServerError(code, message, encrypted=True, response=inner)

    def _roundtrip(self, inner: InnerMessage, key: bytes) -> InnerMessage:
        req = self._seal(inner, key)
        resp = self.transport.roundtrip(req)
        return self._check_inner_error(self._open(resp, [key]))

    # -- public send ------------------------------------------------------

    def send(self, inner: InnerMessage) -> InnerMessage:
        """Seal ``inner``, send it, and return the opened response.

        A KeyExpired answer triggers one refresh (shared by all concurrent
        callers) after which this request is replayed transparently.
        """
        with self._cond:
            self._check_usable()
            if self.state == REFRESHING:
                item = self._enqueue(inner)
            else:
                item = None
                self._in_flight += 1
                key = self.key
        if item is not None:
            return self._wait(item)
        try:
            return self._roundtrip(inner, key)
        except KeyExpired:
            pass
        finally:
            with self._cond:
                self._in_flight -= 1
                self._cond.notify_all()

        with self._cond:
            self._check_usable()
            refresher = self.state == ACTIVE and self.key == key
            if refresher:
                self.state = REFRESHING
            elif self.state == REFRESHING:
                item = self._enqueue(inner)
        if refresher:
            return self._refresh_and_flush(inner)
        if item is None:
            # another caller already finished the refresh
            return self.send(inner)
        return self._wait(item)

    def _check_usable(self):
        if self.state == CLOSED:
            raise SessionClosed()
        if self.state == HANDSHAKING:
            raise SessionClosed("handshake has not completed")

    def _enqueue(self, inner) -> _Pending:
        item = _Pending(inner)
        self.pending.append(item)
        self._cond.notify_all()
        return item

    def _wait(self, item: _Pending) -> InnerMessage:
        item.done.wait()
        if item.error is not None:
            raise item.error
        return item.result

    def _exclusive(self):
        """Wait until no ordinary send is in flight (caller holds state REFRESHING)."""
        with self._cond:
            self._cond.wait_for(lambda: self._in_flight == 0)

    def _flush(self):
        """Replay queued requests in order, then go back to ACTIVE."""
        while True:
            with self._cond:
                if not self.pending:
                    if self.state != CLOSED:
                        self.state = ACTIVE
                    self._cond.notify_all()
                    return
                item = self.pending.pop(0)
                key = self.key
                closed = self.state == CLOSED
            if closed:
                item.error = SessionClosed()
            else:
                try:
                    item.result = self._roundtrip(item.inner, key)
                except BaseException as exc:  # delivered to the waiting caller
                    item.error = exc
            item.done.set()

    def _refresh_and_flush(self, inner: Optional[InnerMessage]):
        self._exclusive()
        try:
            self._refresh()
        except TunnelError as exc:
            with self._cond:
                self.state = CLOSED
            self._flush()
            raise RefreshFailed(str(exc)) from exc
        try:
            result = self._roundtrip(inner, self.key) if inner is not None else None
        finally:
            self._flush()
        return result

    def _refresh(self):
        keypair = generate_ephemeral_keypair(self.entropy(32))
        z = ecdh_shared_secret(keypair, self._q)
        new_key = derive_tunnel_key(z, self.pinned_fingerprint)
        body = json.dumps({"v": base64.b64encode(keypair.public_point).decode()}).encode()
        inner = InnerMessage.request("PUT", "/tunnel/key", [("Content-Type", "application/json")], body)
        req = self._seal(inner, self.key)
        resp = self.transport.roundtrip(HttpRequest("PUT", "/tunnel/key", req.headers, req.body))
        reply = self._check_inner_error(self._open(resp, [new_key, self.key]))
        if reply.status != 200:
            raise RefreshFailed(f"refresh answered {reply.status}")
        with self._cond:
            self.key = new_key
        log.info("tunnel key refreshed uid=%s", self.uid.hex())

    def refresh(self):
        """Force a key refresh now."""
        with self._cond:
            if self.state != ACTIVE:
                raise SessionClosed(f"cannot refresh in state {self.state}")
            self.state = REFRESHING
        self._refresh_and_flush(None)

    # -- login ------------------------------------------------------------

    def request_json(self, method, path, obj) -> dict:
        body = json.dumps(obj).encode()
        inner = InnerMessage.request(method, path, [("Content-Type", "application/json")], body)
        return _json(self.send(inner).body)

    def begin_login(self, identity: str) -> LoginChallenge:
        doc = self.request_json("POST", "/auth/info", {"username": identity})
        modulus = _b64(doc.get("modulus"))
        if self.signing_key is not None and "modulus_signature" in doc:
            verify_message(self.signing_key, MODULUS_CONTEXT, modulus, _b64(doc["modulus_signature"]))
        params = SrpParams(from_bytes(modulus), int(doc["generator"]), _b64(doc["salt"]))
        return LoginChallenge(identity, params, from_bytes(_b64(doc["server_ephemeral"])), doc)

    def finish_login(self, state: SrpState) -> dict:
        """Send C and P_C, check P_S, then switch to the SRP-derived key.

        Runs exclusively: other sends queue until the key swap is done, so no
        request is sealed under the superseded key.
        """
        with self._cond:
            self._cond.wait_for(lambda: self.state in (ACTIVE, CLOSED))
            if self.state == CLOSED:
                raise SessionClosed()
            self.state = REFRESHING
        self._exclusive()
        try:
            body = json.dumps({
                "client_ephemeral": base64.b64encode(state.params.pad(state.own_public)).decode(),
                "client_proof": base64.b64encode(state.proof_pc).decode(),
            }).encode()
            inner = InnerMessage.request("POST", "/auth", [("Content-Type", "application/json")], body)
            try:
                reply = self._login_roundtrip(inner)
            except ServerError as exc:
                if exc.remote_code == ProofMismatch.code:
                    raise ProofRejected() from exc
                raise
            doc = _json(reply.body)
            k = srp_client_verify_server(state, _b64(doc.get("server_proof")))
            with self._cond:
                self.key = derive_srp_session_key(k)
            log.info("login complete, tunnel rekeyed uid=%s", self.uid.hex())
            return doc
        finally:
            self._flush()

    def _login_roundtrip(self, inner):
        try:
            return self._roundtrip(inner, self.key)
        except KeyExpired:
            self._refresh()
            return self._roundtrip(inner, self.key)

    def login(self, identity: str, password: str) -> dict:
        challenge = self.begin_login(identity)
        state, _, _ = srp_client_respond(
            challenge.params, identity, password, challenge.server_ephemeral, self.entropy)
        return self.finish_login(state)

    # -- convenience ------------------------------------------------------

    def request(self, method, target, headers=(), body=b"") -> InnerMessage:
        return self.send(InnerMessage.request(method, target, headers, body))

    def close(self):
        with self._cond:
            self.state = CLOSED
            self.key = None
            self._cond.notify_all()

    def outer_uid_header(self):
        return (UID_HEADER, uid_to_header(self.uid))
