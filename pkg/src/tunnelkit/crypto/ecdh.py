"""X25519 ephemeral keys and shared secrets."""

from dataclasses import dataclass

from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)

from ..errors import InvalidPoint, LowOrderPoint

POINT_SIZE = 32


def clamp(scalar: bytes) -> bytes:
    if len(scalar) != 32:
        raise ValueError("X25519 scalar must be 32 bytes")
    b = bytearray(scalar)
    b[0] &= 0xF8
    b[31] &= 0x7F
    b[31] |= 0x40
    return bytes(b)


@dataclass(frozen=True)
class EphemeralKeypair:
    private_scalar: bytes
    public_point: bytes

    def __repr__(self):
        return f"EphemeralKeypair(public_point={self.public_point.hex()})"


def generate_ephemeral_keypair(entropy: bytes) -> EphemeralKeypair:
    scalar = clamp(entropy)
    public = X25519PrivateKey.from_private_bytes(scalar).public_key().public_bytes_raw()
    return EphemeralKeypair(scalar, public)


def ecdh_shared_secret(own: EphemeralKeypair, peer_point: bytes) -> bytes:
    if len(peer_point) != POINT_SIZE:
        raise InvalidPoint(f"peer point must be {POINT_SIZE} bytes, got {len(peer_point)}")
    priv = X25519PrivateKey.from_private_bytes(own.private_scalar)
    try:
        z = priv.exchange(X25519PublicKey.from_public_bytes(peer_point))
    except ValueError:
        # the backend refuses an all-zero output
        raise LowOrderPoint() from None
    if z == bytes(32):
        raise LowOrderPoint()
    return z
