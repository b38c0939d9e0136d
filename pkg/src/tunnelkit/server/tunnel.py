"""Tunnel endpoint: key routes, the /tunnel/data middleware, and SRP login.

Error rule: a request whose packet was opened gets its error sealed under the
key that opened it; anything that fails before that point gets a cleartext
JSON error.
"""

import base64
import binascii
import hmac
import json
import logging
import os
from typing import Callable, Optional

from ..crypto.ecdh import EphemeralKeypair, ecdh_shared_secret, generate_ephemeral_keypair
from ..crypto.hashing import derive_tunnel_key
from ..crypto.srp import (
    from_bytes,
    modpow,
    srp_server_challenge,
    srp_server_verify,
    to_bytes,
)
from ..errors import (
    AuthenticationFailure,
    BadRequest,
    DowngradeRejected,
    EncryptionRequired,
    GraceExpired,
    KeyExpired,
    NoLoginInProgress,
    SessionNotEncrypted,
    StalePacket,
    TunnelError,
)
from ..packet.envelope import (
    NONCE_SIZE,
    UID_HEADER,
    WINDOW_SECONDS,
    SealedEnvelope,
    TunnelPacket,
    open_envelope,
    seal_envelope,
    uid_from_header,
)
from ..packet.headers import merge_headers
from ..packet.message import InnerMessage, encode_inner
from ..session import EXPIRED, SessionStore
from ..wire import HttpRequest, HttpResponse, json_response, unix_now
from .app import DemoApp, build_inner_request
from .config import ServerConfig, param_to_json

log = logging.getLogger(__name__)

ERROR_HEADER = "X-Tunnel-Error"
# transport-only headers never merged into the inner request
_TRANSPORT_HEADERS = {"content-type", "content-length", "transfer-encoding", "connection",
                      UID_HEADER.lower()}

AUTH_INFO_PATH = "/auth/info"
AUTH_PATH = "/auth"


def b64e(b: bytes) -> str:
    return base64.b64encode(b).decode("ascii")


def _b64_field(doc, name) -> bytes:
    try:
        return base64.b64decode(doc[name], validate=True)
    except (KeyError, TypeError, binascii.Error, ValueError):
        raise BadRequest(f"missing or invalid field {name!r}") from None


def _json_body(body: bytes):
    try:
        doc = json.loads(body or b"{}")
    except ValueError:
        raise BadRequest("body is not JSON") from None
    if not isinstance(doc, dict):
        raise BadRequest("body must be a JSON object")
    return doc


def cleartext_error(err: TunnelError) -> HttpResponse:
    return json_response(err.status, err.to_json(), [(ERROR_HEADER, str(err.code))])


def inner_error(err: TunnelError) -> InnerMessage:
    body = json.dumps(err.to_json(), sort_keys=True, separators=(",", ":")).encode("utf-8")
    return InnerMessage.response(
        err.status, [("Content-Type", "application/json"), (ERROR_HEADER, str(err.code))], body)


def inner_json(status: int, obj) -> InnerMessage:
    body = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return InnerMessage.response(status, [("Content-Type", "application/json")], body)


class TunnelServer:
    def __init__(self, config: ServerConfig, app=None, clock: Callable[[], int] = unix_now,
                 entropy: Callable[[int], bytes] = os.urandom,
                 store: Optional[SessionStore] = None):
        self.config = config
        self.app = app or DemoApp()
        self.clock = clock
        self.entropy = entropy
        self.store = store or SessionStore(config.session_ttl, config.grace, entropy)
        self.started_at = clock()
        self._keypair = EphemeralKeypair(
            config.server_ephemeral_secret,
            generate_ephemeral_keypair(config.server_ephemeral_secret).public_point,
        )
        self._key_doc = json.dumps(
            param_to_json(config.signed_param, config.modulus_signature, config.srp_group),
            sort_keys=True, separators=(",", ":"),
        ).encode("utf-8")
        self.fingerprint = config.signed_param.signer_fingerprint

    # -- entry point ------------------------------------------------------

    def handle(self, req: HttpRequest) -> HttpResponse:
        path = req.path
        try:
            if path == "/tunnel/key":
                if req.method == "GET":
                    return self.handle_get_tunnel_key()
                if req.method == "POST":
                    return self.handle_post_tunnel_key(req)
                if req.method == "PUT":
                    return self.handle_put_tunnel_key(req)
                raise BadRequest(f"{req.method} not allowed on /tunnel/key")
            if path == "/tunnel/data":
                if req.method != "POST":
                    raise BadRequest("/tunnel/data only accepts POST")
                return self.handle_tunnel_data(req)
            return self.handle_plaintext(req)
        except TunnelError as err:
            log.info("cleartext error %s on %s %s", err.code, req.method, path)
            return cleartext_error(err)

    # -- key routes -------------------------------------------------------

    def handle_get_tunnel_key(self) -> HttpResponse:
        return HttpResponse(200, [("Content-Type", "application/json")], self._key_doc)

    def _derive(self, client_v: bytes) -> bytes:
        z = ecdh_shared_secret(self._keypair, client_v)
        return derive_tunnel_key(z, self.fingerprint)

    def handle_post_tunnel_key(self, req: HttpRequest) -> HttpResponse:
        client_v = _b64_field(_json_body(req.body), "v")
        key = self._derive(client_v)
        now = self.clock()
        uid = self.store.create_session(key, now)
        session = self.store.get(uid)
        log.info("tunnel session issued uid=%s", uid.hex())
        return json_response(200, {"uid": b64e(uid), "expires_at": session.expires_at})

    def handle_put_tunnel_key(self, req: HttpRequest) -> HttpResponse:
        uid = uid_from_header(req.header(UID_HEADER))
        now = self.clock()
        session = self.store.get(uid)
        if not session.encrypted:
            raise SessionNotEncrypted()
        if now > session.expires_at + self.store.grace:
            raise GraceExpired()
        pkt = TunnelPacket.from_body(uid, req.body)
        try:
            env, key = self._open_any(session.refresh_keys(now), pkt, now, uid)
        except _Opened as opened:
            return self._sealed(opened.key, uid, inner_error(opened.error), now)
        try:
            self._check_fresh(env, uid, now)
            inner = env.inner
            if inner.method != "PUT" or inner.target.split("?")[0] != "/tunnel/key":
                raise BadRequest("sealed refresh must be PUT /tunnel/key")
            new_key = self._derive(_b64_field(_json_body(inner.body), "v"))
            self.store.refresh_session(uid, new_key, now)
        except TunnelError as err:
            return self._sealed(key, uid, inner_error(err), now)
        log.info("tunnel session refreshed uid=%s", uid.hex())
        body = inner_json(200, {"uid": b64e(uid), "expires_at": session.expires_at})
        return self._sealed(new_key, uid, body, now)

    # -- data route -------------------------------------------------------

    def _open_any(self, keys, pkt, now, uid):
        """Try each key; nonce/window errors still count as 'opened'."""
        for key in keys:
            try:
                return open_envelope(key, pkt, now, None, window=WINDOW_SECONDS, skew=self.config.skew), key
            except AuthenticationFailure:
                continue
            except TunnelError as err:
                raise _Opened(key, err) from None
        raise AuthenticationFailure()

    def _check_fresh(self, env: SealedEnvelope, uid: bytes, now: int):
        if env.timestamp < self.started_at - self.config.skew:
            # nonces do not survive a restart, so nothing older than it is trusted
            raise StalePacket("packet predates server start")
        self.store.check_and_record_nonce(uid, env.nonce, now)

    def _sealed(self, key, uid, inner: InnerMessage, now) -> HttpResponse:
        env = SealedEnvelope(now, self.entropy(NONCE_SIZE), inner)
        pkt = seal_envelope(key, uid, env, self.entropy)
        return HttpResponse(200, pkt.outer_headers(), pkt.to_body())

    def handle_tunnel_data(self, req: HttpRequest) -> HttpResponse:
        uid = uid_from_header(req.header(UID_HEADER))
        now = self.clock()
        session, status = self.store.lookup(uid, now)
        if not session.encrypted:
            raise SessionNotEncrypted()
        if status == EXPIRED:
            raise KeyExpired()
        key = session.key
        pkt = TunnelPacket.from_body(uid, req.body)
        try:
            env, key = self._open_any([key], pkt, now, uid)
        except _Opened as opened:
            return self._sealed(opened.key, uid, inner_error(opened.error), now)
        post_action = None
        try:
            self._check_fresh(env, uid, now)
            outer = [(k, v) for k, v in req.headers if k.lower() not in _TRANSPORT_HEADERS]
            headers = merge_headers(outer, env.sealed_headers())
            inner_req = build_inner_request(env.inner.start_line, headers, env.inner.body)
            response, post_action = self._route(session, inner_req, now)
            encode_inner(response)  # app headers must survive framing
        except TunnelError as err:
            response, post_action = inner_error(err), None
        out = self._sealed(key, uid, response, now)
        if post_action is not None:
            post_action()
        return out

    def _route(self, session, inner_req, now):
        if inner_req.path == AUTH_INFO_PATH and inner_req.method == "POST":
            return self.handle_auth_info(session, inner_req), None
        if inner_req.path == AUTH_PATH and inner_req.method == "POST":
            return self.handle_auth(session, inner_req)
        return self.app.dispatch(inner_req), None

    # -- SRP login --------------------------------------------------------

    def _user_record(self, identity: str):
        rec = self.config.user_verifiers.get(identity)
        if rec is not None:
            return rec
        # unknown users get a stable decoy so /auth/info does not enumerate accounts
        secret = self.config.enumeration_secret
        salt = hmac.new(secret, b"salt\x00" + identity.encode("utf-8"), "sha256").digest()[:16]
        x = from_bytes(hmac.new(secret, b"x\x00" + identity.encode("utf-8"), "sha256").digest())
        group = self.config.srp_group
        return salt, modpow(group.generator_g, x, group.modulus_m)

    def handle_auth_info(self, session, inner_req) -> InnerMessage:
        doc = _json_body(inner_req.body)
        identity = doc.get("username")
        if not isinstance(identity, str) or not identity:
            raise BadRequest("username required")
        salt, verifier = self._user_record(identity)
        params = self.config.srp_group.with_salt(salt)
        state, s = srp_server_challenge(params, verifier, self.entropy)
        state.identity = identity
        session.srp_state = state  # a second /auth/info replaces the first
        resp = {
            "salt": b64e(salt),
            "modulus": b64e(to_bytes(params.modulus_m)),
            "generator": params.generator_g,
            "server_ephemeral": b64e(params.pad(s)),
        }
        if self.config.modulus_signature is not None:
            resp["modulus_signature"] = b64e(self.config.modulus_signature)
        if not session.encrypted:
            resp["uid"] = session.uid.hex()
        return inner_json(200, resp)

    def handle_auth(self, session, inner_req):
        """Return ``(response, post_action)``; post_action rekeys the tunnel."""
        doc = _json_body(inner_req.body)
        state, session.srp_state = session.srp_state, None
        if state is None:
            raise NoLoginInProgress()
        c = from_bytes(_b64_field(doc, "client_ephemeral"))
        pc = _b64_field(doc, "client_proof")
        k, ps = srp_server_verify(state, c, pc)
        access, refresh = self.entropy(16).hex(), self.entropy(16).hex()
        self.store.bind_tokens(session.uid, access, refresh)
        log.info("login ok uid=%s user=%s", session.uid.hex(), state.identity)
        body = inner_json(200, {
            "server_proof": b64e(ps),
            "access_token": access,
            "refresh_token": refresh,
        })
        if not session.encrypted:
            return body, None
        uid = session.uid
        return body, lambda: self.store.rekey_from_srp(uid, k)

    # -- cleartext routes -------------------------------------------------

    def handle_plaintext(self, req: HttpRequest) -> HttpResponse:
        now = self.clock()
        session = None
        if req.header(UID_HEADER) is not None:
            session = self.store.get(uid_from_header(req.header(UID_HEADER)))
            if session.encrypted:
                raise DowngradeRejected()
        if self.config.enforce_encryption:
            raise EncryptionRequired()
        headers = [(k, v) for k, v in req.headers if k.lower() not in ("content-length", "connection")]
        start_line = f"{req.method} {req.target} HTTP/1.1"
        inner_req = build_inner_request(start_line, headers, req.body)
        if inner_req.path == AUTH_INFO_PATH and inner_req.method == "POST":
            if session is None:
                session = self.store.get(self.store.create_plain_session(now))
            resp = self.handle_auth_info(session, inner_req)
        elif inner_req.path == AUTH_PATH and inner_req.method == "POST":
            if session is None:
                raise NoLoginInProgress()
            resp, _ = self.handle_auth(session, inner_req)
        else:
            resp = self.app.dispatch(inner_req)
        encode_inner(resp)  # refuse header injection on the cleartext path too
        return HttpResponse(resp.status, list(resp.headers), resp.body)


class _Opened(Exception):
    """Internal: the packet decrypted but failed a later check."""

    def __init__(self, key, error):
        super().__init__(error)
        self.key = key
        self.error = error
