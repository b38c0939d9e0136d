"""The single 256-bit hash used everywhere, and the session-key derivations."""

import hashlib

HASH_NAME = "sha256"
DIGEST_SIZE = 32
SESSION_KEY_SIZE = 16

SRP_KEY_CONTEXT = b"tunnelkit/srp-session-key/v1"


def hash_bytes(*parts: bytes) -> bytes:
    h = hashlib.new(HASH_NAME)
    for part in parts:
        h.update(part)
    return h.digest()


def fingerprint(public_key: bytes) -> bytes:
    return hash_bytes(public_key)


def derive_tunnel_key(z: bytes, signer_fingerprint: bytes) -> bytes:
    """Session key after the landing ECDHE: ``Hash(z || fingerprint)[:16]``."""
    if len(z) != 32 or len(signer_fingerprint) != DIGEST_SIZE:
        raise ValueError("shared secret and fingerprint must be 32 bytes")
    return hash_bytes(z, signer_fingerprint)[:SESSION_KEY_SIZE]


def derive_srp_session_key(k: bytes) -> bytes:
    """Session key after login: ``Hash(K || context)[:16]``."""
    if len(k) != DIGEST_SIZE:
        raise ValueError("SRP secret must be 32 bytes")
    return hash_bytes(k, SRP_KEY_CONTEXT)[:SESSION_KEY_SIZE]
