"""Compatibility proxy for plaintext clients, with an optional SRP MITM.

The proxy holds one upstream tunnel session (through :class:`TunnelClient`)
and serves plaintext HTTP downstream. Given the user's password it can also
sit inside the login: it plays SRP server toward the downstream client and SRP
client toward the real server, so it keeps the post-login key and can still
read the traffic. Without the password, login traffic passes through and the
server's rekey leaves the proxy unable to decrypt anything after it.
"""

import base64
import json
import logging
import os
import threading
from dataclasses import dataclass
from typing import Callable, Optional

from .client import TunnelClient
from .crypto.srp import (
    SrpState,
    compute_verifier,
    from_bytes,
    srp_client_respond,
    srp_server_challenge,
    srp_server_verify,
)
from .errors import (
    ClientProofInvalid,
    InvalidClientEphemeral,
    NoLoginInProgress,
    PasswordRequired,
    ProofMismatch,
    ProofRejected,
    ServerError,
    ServerProofInvalid,
    TunnelError,
    UpstreamHandshakeFailed,
    UpstreamProofInvalid,
)
from .packet.message import InnerMessage
from .server.tunnel import AUTH_INFO_PATH, AUTH_PATH, inner_error, inner_json
from .wire import HttpRequest, HttpResponse, json_response, unix_now

log = logging.getLogger("tunnelkit.proxy")

_HOP_HEADERS = {"connection", "content-length", "transfer-encoding", "keep-alive",
                "proxy-connection", "host"}


@dataclass
class ProxyConfig:
    listen_address: tuple = ("127.0.0.1", 8081)
    upstream_address: str = "http://127.0.0.1:8080"
    pinned_fingerprint: bytes = b""
    user_password: Optional[str] = None
    log_plaintext: bool = False


@dataclass
class _MitmLogin:
    identity: str
    challenge: object
    emulated: SrpState
    client_secret_k: Optional[bytes] = None
    server_secret_k: Optional[bytes] = None


def _b64(b: bytes) -> str:
    return base64.b64encode(b).decode("ascii")


class TunnelProxy:
    def __init__(self, upstream_transport, pinned_fingerprint: bytes,
                 user_password: Optional[str] = None, log_plaintext: bool = False,
                 clock: Callable[[], int] = unix_now,
                 entropy: Callable[[int], bytes] = os.urandom):
        self.client = TunnelClient(upstream_transport, pinned_fingerprint, clock, entropy)
        self.user_password = user_password
        self.log_plaintext = log_plaintext
        self.clock = clock
        self.entropy = entropy
        self.logins: dict = {}
        self.completed: list = []
        self._lock = threading.Lock()

    def start(self) -> "TunnelProxy":
        try:
            self.client.handshake()
        except TunnelError as exc:
            raise UpstreamHandshakeFailed(f"{type(exc).__name__}: {exc}") from exc
        self._log("==", f"session established key={self.client.key.hex()}"
                  if self.log_plaintext else "session established")
        return self

    # -- logging ----------------------------------------------------------

    def _log(self, direction, line, body=None):
        uid = self.client.uid.hex() if self.client.uid else "-"
        msg = f"{self.clock()} {direction} {uid} {line}"
        if self.log_plaintext and body:
            msg += f" body={body[:512]!r}"
        log.info(msg)

    # -- downstream entry -------------------------------------------------

    def handle(self, req: HttpRequest) -> HttpResponse:
        headers = [(k, v) for k, v in req.headers if k.lower() not in _HOP_HEADERS]
        inner = InnerMessage.request(req.method, req.target, headers, req.body)
        conn = getattr(req, "client_address", ("local",))[0]
        self._log("->", inner.start_line, inner.body)
        try:
            path = req.path
            if self.user_password is not None and req.method == "POST" and path == AUTH_INFO_PATH:
                reply = self.mitm_auth_info(inner, conn)
            elif self.user_password is not None and req.method == "POST" and path == AUTH_PATH:
                reply = self.mitm_auth(inner, conn)
            else:
                reply = self.forward(inner)
        except ServerError as err:
            reply = err.response
            if isinstance(reply, HttpResponse):
                self._log("<-", f"{reply.status} (cleartext error {err.remote_code})")
                return reply
        except TunnelError as err:
            self._log("<-", f"{err.status} proxy error {type(err).__name__}")
            return json_response(err.status, err.to_json(), [("X-Tunnel-Error", str(err.code))])
        self._log("<-", reply.start_line, reply.body)
        return HttpResponse(reply.status, list(reply.headers), reply.body)

    def forward(self, inner: InnerMessage) -> InnerMessage:
        return self.client.send(inner)

    # -- SRP man in the middle ------------------------------------------

    def mitm_auth_info(self, inner: InnerMessage, conn="local") -> InnerMessage:
        if self.user_password is None:
            raise PasswordRequired()
        identity = json.loads(inner.body or b"{}").get("username", "")
        challenge = self.client.begin_login(identity)
        emulated_params = challenge.params
        verifier = compute_verifier(emulated_params, identity, self.user_password)
        state, s_prime = srp_server_challenge(emulated_params, verifier, self.entropy)
        state.identity = identity
        with self._lock:
            self.logins[conn] = _MitmLogin(identity, challenge, state)
        doc = dict(challenge.raw)
        # same salt, modulus and modulus signature; only the challenge changes
        doc["server_ephemeral"] = _b64(emulated_params.pad(s_prime))
        self._log("**", f"login intercepted for {identity!r}, challenge replaced")
        return inner_json(200, doc)

    def mitm_auth(self, inner: InnerMessage, conn="local") -> InnerMessage:
        if self.user_password is None:
            raise PasswordRequired()
        with self._lock:
            login = self.logins.pop(conn, None)
        if login is None:
            return inner_error(NoLoginInProgress())
        try:
            doc = json.loads(inner.body)
            client_c = from_bytes(base64.b64decode(doc["client_ephemeral"], validate=True))
            client_pc = base64.b64decode(doc["client_proof"], validate=True)
        except (ValueError, KeyError, TypeError):
            return inner_error(ClientProofInvalid("malformed client proof"))

        # downstream leg first: a wrong client password never reaches the server
        try:
            k_client, ps_prime = srp_server_verify(login.emulated, client_c, client_pc)
        except (ProofMismatch, InvalidClientEphemeral):
            self._log("**", "downstream proof rejected")
            return inner_error(ClientProofInvalid())
        login.client_secret_k = k_client

        params = login.challenge.params
        upstream_state, _, _ = srp_client_respond(
            params, login.identity, self.user_password, login.challenge.server_ephemeral, self.entropy)
        try:
            reply = self.client.finish_login(upstream_state)
        except (ProofRejected, ServerProofInvalid) as exc:
            self._log("**", f"upstream proof rejected ({type(exc).__name__})")
            return inner_error(UpstreamProofInvalid())
        login.server_secret_k = upstream_state.secret_k
        with self._lock:
            self.completed.append(login)
        self._log("**", f"login relayed, upstream key={self.client.key.hex()}"
                  if self.log_plaintext else "login relayed, upstream rekeyed")
        out = dict(reply)
        out["server_proof"] = _b64(ps_prime)
        return inner_json(200, out)


def run_proxy(cfg: ProxyConfig, upstream_transport=None, serve=True):
    """Handshake upstream and serve plaintext HTTP on ``cfg.listen_address``."""
    from .server.http import make_http_server
    from .wire import HttpTransport

    transport = upstream_transport or HttpTransport(cfg.upstream_address)
    proxy = TunnelProxy(transport, cfg.pinned_fingerprint, cfg.user_password, cfg.log_plaintext)
    proxy.start()
    httpd = make_http_server(proxy, *cfg.listen_address)
    if serve:
        try:
            httpd.serve_forever()
        finally:
            httpd.server_close()
    return proxy, httpd
