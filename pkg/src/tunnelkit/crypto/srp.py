"""SRP-6a over the 2048-bit group of RFC 5054.

Notation follows the tunnel's message names rather than the RFC's:
``S`` is the server's public ephemeral (the RFC's B), ``C`` the client's (A),
``K`` the hashed shared secret. Every integer that enters a hash is left-padded
to the byte length of N.

Proofs::

    P_C = H(pad(C) || pad(S) || K)
    P_S = H(pad(C) || P_C || K)
"""

import hmac
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

from ..errors import (
    InvalidClientEphemeral,
    InvalidServerEphemeral,
    ProofMismatch,
    ServerProofInvalid,
)
from .hashing import hash_bytes

try:  # GMP is ~10x faster on 2048-bit exponentiation; results are identical
    from gmpy2 import powmod as _gmp_powmod

    def modpow(base: int, exp: int, mod: int) -> int:
        return int(_gmp_powmod(base, exp, mod))
except ImportError:  # pragma: no cover
    modpow = pow

RFC5054_N_2048 = int(
    "AC6BDB41324A9A9BF166DE5E1389582FAF72B6651987EE07FC3192943DB56050"
    "A37329CBB4A099ED8193E0757767A13DD52312AB4B03310DCD7F48A9DA04FD50"
    "E8083969EDB767B0CF6095179A163AB3661A05FBD5FAAAE82918A9962F0B93B8"
    "55F97993EC975EEAA80D740ADBF4FF747359D041D5C33EA71D281E446B14773B"
    "CA97B43A23FB801676BD207A436C6481F1D2B9078717461A5B9D32E688F87748"
    "544523B524B0D57D5EA77A2775D2ECFA032CFBDBF52FB3786160279004E57AE6"
    "AF874E7303CE53299CCC041C7BC308D82A5698F3A8D0C38271AE35F8E9DBFBB6"
    "94B5C803D89F7AE435DE236D525F54759B65E372FCD68EF20FA7111F9E4AFF73",
    16,
)
RFC5054_G_2048 = 2

EPHEMERAL_BYTES = 32
MIN_SALT_BYTES = 16

Entropy = Callable[[int], bytes]


def to_bytes(n: int) -> bytes:
    """Minimal big-endian encoding (at least one byte)."""
    return n.to_bytes(max(1, (n.bit_length() + 7) // 8), "big")


def from_bytes(b: bytes) -> int:
    return int.from_bytes(b, "big")


@dataclass(frozen=True)
class SrpParams:
    modulus_m: int = RFC5054_N_2048
    generator_g: int = RFC5054_G_2048
    salt: bytes = b""

    @property
    def width(self) -> int:
        return (self.modulus_m.bit_length() + 7) // 8

    def pad(self, n: int) -> bytes:
        return n.to_bytes(self.width, "big")

    def with_salt(self, salt: bytes) -> "SrpParams":
        return SrpParams(self.modulus_m, self.generator_g, salt)


@dataclass
class SrpState:
    role: str
    params: SrpParams
    ephemeral_secret: int
    own_public: int
    peer_public: Optional[int] = None
    verifier_v: Optional[int] = None
    secret_k: Optional[bytes] = None
    proof_pc: Optional[bytes] = None
    proof_ps: Optional[bytes] = None
    identity: Optional[str] = field(default=None, compare=False)

    def __repr__(self):
        # ephemeral secrets and K stay out of logs
        return f"SrpState(role={self.role!r}, own_public=0x{self.own_public:x}...)"


def multiplier(params: SrpParams) -> int:
    return from_bytes(hash_bytes(params.pad(params.modulus_m), params.pad(params.generator_g)))


def compute_x(salt: bytes, identity: str, password: str) -> int:
    inner = hash_bytes(identity.encode("utf-8") + b":" + password.encode("utf-8"))
    return from_bytes(hash_bytes(salt, inner))


def compute_verifier(params: SrpParams, identity: str, password: str) -> int:
    if len(params.salt) < MIN_SALT_BYTES:
        raise ValueError(f"salt must be at least {MIN_SALT_BYTES} bytes")
    x = compute_x(params.salt, identity, password)
    return modpow(params.generator_g, x, params.modulus_m)


def scrambler(params: SrpParams, c: int, s: int) -> int:
    return from_bytes(hash_bytes(params.pad(c), params.pad(s)))


def client_proof(params: SrpParams, c: int, s: int, k: bytes) -> bytes:
    return hash_bytes(params.pad(c), params.pad(s), k)


def server_proof(params: SrpParams, c: int, pc: bytes, k: bytes) -> bytes:
    return hash_bytes(params.pad(c), pc, k)


def _draw_exponent(entropy: Entropy) -> int:
    while True:
        e = from_bytes(entropy(EPHEMERAL_BYTES))
        if e:
            return e


def srp_server_challenge(params: SrpParams, verifier_v: int, entropy: Entropy = os.urandom):
    """Return ``(state, S)`` with ``S = k*v + g^b mod N``, never 0 mod N."""
    n, g = params.modulus_m, params.generator_g
    k = multiplier(params)
    while True:
        b = _draw_exponent(entropy)
        s = (k * verifier_v + modpow(g, b, n)) % n
        if s != 0:
            break
    state = SrpState("server", params, b, s, verifier_v=verifier_v)
    return state, s


def srp_client_respond(
    params: SrpParams,
    identity: str,
    password: str,
    server_s: int,
    entropy: Entropy = os.urandom,
):
    """Return ``(state, C, P_C)``; the password is used and dropped."""
    n, g = params.modulus_m, params.generator_g
    if server_s % n == 0:
        raise InvalidServerEphemeral()
    k = multiplier(params)
    x = compute_x(params.salt, identity, password)
    while True:
        a = _draw_exponent(entropy)
        c = modpow(g, a, n)
        u = scrambler(params, c, server_s)
        if u != 0:
            break
    base = (server_s - k * modpow(g, x, n)) % n
    premaster = modpow(base, a + u * x, n)
    secret_k = hash_bytes(params.pad(premaster))
    pc = client_proof(params, c, server_s, secret_k)
    state = SrpState(
        "client", params, a, c,
        peer_public=server_s,
        secret_k=secret_k,
        proof_pc=pc,
        proof_ps=server_proof(params, c, pc, secret_k),
        identity=identity,
    )
    return state, c, pc


def srp_server_verify(state: SrpState, client_c: int, client_proof_pc: bytes):
    """Check the client's proof; return ``(K, P_S)`` only on success."""
    params = state.params
    n = params.modulus_m
    if client_c % n == 0:
        raise InvalidClientEphemeral()
    u = scrambler(params, client_c, state.own_public)
    if u == 0:
        raise InvalidClientEphemeral("scrambling parameter is zero")
    premaster = modpow(client_c * modpow(state.verifier_v, u, n) % n, state.ephemeral_secret, n)
    secret_k = hash_bytes(params.pad(premaster))
    expected = client_proof(params, client_c, state.own_public, secret_k)
    if not hmac.compare_digest(expected, client_proof_pc):
        raise ProofMismatch()
    state.peer_public = client_c
    state.secret_k = secret_k
    state.proof_pc = expected
    state.proof_ps = server_proof(params, client_c, expected, secret_k)
    return secret_k, state.proof_ps


def srp_client_verify_server(state: SrpState, server_proof_ps: bytes) -> bytes:
    """Check the server's proof and return K."""
    if state.proof_ps is None or not hmac.compare_digest(state.proof_ps, server_proof_ps):
        raise ServerProofInvalid()
    return state.secret_k
