"""Detached signatures over the server's long-lived public parameters.

The default backend is Ed25519. Messages are domain separated so a signature
over the ECDHE point can never be replayed as a signature over the SRP
modulus, or the other way round.
"""

import hmac
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from ..errors import FingerprintMismatch, SignatureInvalid
from .hashing import fingerprint

Q_CONTEXT = b"tunnelkit/ecdhe-q/v1\x00"
MODULUS_CONTEXT = b"tunnelkit/srp-modulus/v1\x00"


@dataclass(frozen=True)
class SigningKeypair:
    private_key: bytes
    public_key: bytes

    @property
    def fingerprint(self) -> bytes:
        return fingerprint(self.public_key)


@dataclass(frozen=True)
class SignedServerParam:
    q_point: bytes
    signature: bytes
    signer_fingerprint: bytes
    signing_public_key: bytes


def generate_signing_keypair(entropy: bytes) -> SigningKeypair:
    priv = Ed25519PrivateKey.from_private_bytes(entropy)
    return SigningKeypair(entropy, priv.public_key().public_bytes_raw())


def sign_message(private_key: bytes, context: bytes, message: bytes) -> bytes:
    return Ed25519PrivateKey.from_private_bytes(private_key).sign(context + message)


def verify_message(public_key: bytes, context: bytes, message: bytes, signature: bytes) -> None:
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, context + message)
    except (InvalidSignature, ValueError):
        raise SignatureInvalid() from None


def sign_server_param(signing_private_key: bytes, q_point: bytes) -> SignedServerParam:
    if len(q_point) != 32:
        raise ValueError("Q must be a 32-byte curve25519 point")
    public = Ed25519PrivateKey.from_private_bytes(signing_private_key).public_key().public_bytes_raw()
    return SignedServerParam(
        q_point=q_point,
        signature=sign_message(signing_private_key, Q_CONTEXT, q_point),
        signer_fingerprint=fingerprint(public),
        signing_public_key=public,
    )


def verify_server_param(param: SignedServerParam, pinned_fingerprint: bytes) -> bytes:
    """Return the verified Q point.

    The signing key is checked against the pin before the signature, so a
    rogue key is reported as such even when its signature is well formed.
    """
    if not hmac.compare_digest(fingerprint(param.signing_public_key), pinned_fingerprint):
        raise FingerprintMismatch()
    if len(param.q_point) != 32:
        raise SignatureInvalid("Q has the wrong length")
    verify_message(param.signing_public_key, Q_CONTEXT, param.q_point, param.signature)
    return param.q_point
