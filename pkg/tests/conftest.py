import os
import random
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from tunnelkit.client import TunnelClient  # noqa: E402
from tunnelkit.crypto.ecdh import generate_ephemeral_keypair  # noqa: E402
from tunnelkit.crypto.signing import (  # noqa: E402
    MODULUS_CONTEXT,
    generate_signing_keypair,
    sign_message,
    sign_server_param,
)
from tunnelkit.crypto.srp import SrpParams, to_bytes  # noqa: E402
from tunnelkit.server import ServerConfig, TunnelServer  # noqa: E402
from tunnelkit.wire import LocalTransport  # noqa: E402

T0 = 1_700_000_000


class FakeClock:
    def __init__(self, t=T0):
        self.t = t

    def __call__(self):
        return self.t

    def advance(self, seconds):
        self.t += seconds


class SeededEntropy:
    """Deterministic byte source for reproducible runs."""

    def __init__(self, seed=0):
        self.rng = random.Random(seed)

    def __call__(self, n):
        return self.rng.randbytes(n)


def make_config(signer=None, **kw):
    signer = signer or generate_signing_keypair(os.urandom(32))
    eph = generate_ephemeral_keypair(os.urandom(32))
    cfg = ServerConfig(
        sign_server_param(signer.private_key, eph.public_point),
        eph.private_scalar,
        modulus_signature=sign_message(signer.private_key, MODULUS_CONTEXT,
                                       to_bytes(SrpParams().modulus_m)),
        **kw,
    )
    cfg.add_user("alice", "correct horse", salt=bytes(range(16)))
    cfg.add_user("bob", "battery staple")
    return cfg, signer


class Recorder:
    """Transport wrapper that keeps every request and response."""

    def __init__(self, inner):
        self.inner = inner
        self.log = []

    def roundtrip(self, req):
        resp = self.inner.roundtrip(req)
        self.log.append((req, resp))
        return resp

    def requests(self, method=None, path=None):
        return [r for r, _ in self.log
                if (method is None or r.method == method) and (path is None or r.path == path)]


class Tunnel:
    def __init__(self, **kw):
        self.clock = FakeClock()
        self.config, self.signer = make_config(**kw)
        self.server = TunnelServer(self.config, clock=self.clock)
        self.wire = Recorder(LocalTransport(self.server))
        self.pin = self.signer.fingerprint

    def client(self, handshake=True):
        c = TunnelClient(self.wire, self.pin, clock=self.clock)
        return c.handshake() if handshake else c


@pytest.fixture
def clock():
    return FakeClock()


@pytest.fixture
def tunnel():
    return Tunnel()


@pytest.fixture
def open_tunnel():
    return Tunnel(enforce_encryption=False)
