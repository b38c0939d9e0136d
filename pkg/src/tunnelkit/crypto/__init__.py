from .aead import IV_SIZE, KEY_SIZE, TAG_SIZE, seal, unseal
from .ecdh import EphemeralKeypair, clamp, ecdh_shared_secret, generate_ephemeral_keypair
from .hashing import derive_srp_session_key, derive_tunnel_key, fingerprint, hash_bytes
from .signing import (
    SignedServerParam,
    SigningKeypair,
    generate_signing_keypair,
    sign_message,
    sign_server_param,
    verify_message,
    verify_server_param,
)
from .srp import (
    SrpParams,
    SrpState,
    compute_verifier,
    srp_client_respond,
    srp_client_verify_server,
    srp_server_challenge,
    srp_server_verify,
)

__all__ = [
    "IV_SIZE", "KEY_SIZE", "TAG_SIZE", "seal", "unseal",
    "EphemeralKeypair", "clamp", "ecdh_shared_secret", "generate_ephemeral_keypair",
    "derive_srp_session_key", "derive_tunnel_key", "fingerprint", "hash_bytes",
    "SignedServerParam", "SigningKeypair", "generate_signing_keypair", "sign_message",
    "sign_server_param", "verify_message", "verify_server_param",
    "SrpParams", "SrpState", "compute_verifier", "srp_client_respond",
    "srp_client_verify_server", "srp_server_challenge", "srp_server_verify",
]
