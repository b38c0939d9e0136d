"""Server configuration and the offline key ceremony's on-disk bundle.

A bundle directory holds one JSON file per secret plus a public parameter file
and a starter ``config.json`` that references them by relative path. The
signing private key is written for the operator to move offline; the server
never reads it.
"""

import base64
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..crypto.ecdh import generate_ephemeral_keypair
from ..crypto.hashing import fingerprint
from ..crypto.signing import (
    MODULUS_CONTEXT,
    SignedServerParam,
    generate_signing_keypair,
    sign_message,
    sign_server_param,
)
from ..crypto.srp import SrpParams, compute_verifier, to_bytes
from ..errors import ConfigError, PathExists
from ..packet.envelope import FUTURE_SKEW_SECONDS
from ..session import DEFAULT_GRACE, DEFAULT_TTL

SIGNING_KEY_FILE = "signing_key.json"
EPHEMERAL_FILE = "server_ephemeral.json"
SECRET_FILE = "server_secret.json"
PARAM_FILE = "server_param.json"
CONFIG_FILE = "config.json"


def b64e(b: bytes) -> str:
    return base64.b64encode(b).decode("ascii")


def b64d(s: str) -> bytes:
    return base64.b64decode(s, validate=True)


@dataclass
class ServerConfig:
    signed_param: SignedServerParam
    server_ephemeral_secret: bytes
    modulus_signature: Optional[bytes] = None
    srp_group: SrpParams = field(default_factory=SrpParams)
    user_verifiers: dict = field(default_factory=dict)
    session_ttl: int = DEFAULT_TTL
    grace: int = DEFAULT_GRACE
    skew: int = FUTURE_SKEW_SECONDS
    enforce_encryption: bool = True
    enumeration_secret: bytes = field(default_factory=lambda: os.urandom(32))

    def __post_init__(self):
        pub = generate_ephemeral_keypair(self.server_ephemeral_secret).public_point
        if pub != self.signed_param.q_point:
            raise ConfigError("server ephemeral secret does not match the signed Q")

    def add_user(self, identity: str, password: str, salt: Optional[bytes] = None):
        salt = salt if salt is not None else os.urandom(16)
        params = self.srp_group.with_salt(salt)
        self.user_verifiers[identity] = (salt, compute_verifier(params, identity, password))


def _write_secret(path: Path, obj):
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_EXCL, 0o600)
    with os.fdopen(fd, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def keygen(out_dir, entropy=os.urandom, group: SrpParams = SrpParams()):
    """Write a fresh bundle into ``out_dir``; refuses to touch existing files."""
    out = Path(out_dir)
    if out.exists() and (not out.is_dir() or any(out.iterdir())):
        raise PathExists(f"{out} already exists; rotation must be deliberate")
    out.mkdir(parents=True, exist_ok=True)

    signer = generate_signing_keypair(entropy(32))
    eph = generate_ephemeral_keypair(entropy(32))
    param = sign_server_param(signer.private_key, eph.public_point)
    modulus_sig = sign_message(signer.private_key, MODULUS_CONTEXT, to_bytes(group.modulus_m))

    _write_secret(out / SIGNING_KEY_FILE, {
        "kind": "signing-private-key",
        "private_key": b64e(signer.private_key),
        "public_key": b64e(signer.public_key),
        "fingerprint": signer.fingerprint.hex(),
    })
    _write_secret(out / EPHEMERAL_FILE, {
        "kind": "server-ecdhe-secret",
        "secret": b64e(eph.private_scalar),
        "q": b64e(eph.public_point),
    })
    _write_secret(out / SECRET_FILE, {"kind": "enumeration-secret", "secret": b64e(entropy(32))})
    (out / PARAM_FILE).write_text(json.dumps(param_to_json(param, modulus_sig, group), indent=2) + "\n")
    (out / CONFIG_FILE).write_text(json.dumps({
        "server_param": PARAM_FILE,
        "server_ephemeral": EPHEMERAL_FILE,
        "enumeration_secret": SECRET_FILE,
        "session_ttl": DEFAULT_TTL,
        "grace": DEFAULT_GRACE,
        "skew": FUTURE_SKEW_SECONDS,
        "enforce_encryption": True,
        "users": {},
    }, indent=2) + "\n")
    return param


def param_to_json(param: SignedServerParam, modulus_signature=None, group: SrpParams = SrpParams()):
    doc = {
        "q": b64e(param.q_point),
        "signature": b64e(param.signature),
        "signing_key": b64e(param.signing_public_key),
        "fingerprint": param.signer_fingerprint.hex(),
        "modulus": b64e(to_bytes(group.modulus_m)),
        "generator": group.generator_g,
    }
    if modulus_signature is not None:
        doc["modulus_signature"] = b64e(modulus_signature)
    return doc


def param_from_json(doc) -> SignedServerParam:
    signing_key = b64d(doc["signing_key"])
    return SignedServerParam(
        q_point=b64d(doc["q"]),
        signature=b64d(doc["signature"]),
        signer_fingerprint=fingerprint(signing_key),
        signing_public_key=signing_key,
    )


def _read_json(path: Path):
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"missing file {path}") from None
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def load_server_config(config_path, **overrides) -> ServerConfig:
    config_path = Path(config_path)
    doc = _read_json(config_path)
    base = config_path.parent
    try:
        pdoc = _read_json(base / doc["server_param"])
        edoc = _read_json(base / doc["server_ephemeral"])
        sdoc = _read_json(base / doc["enumeration_secret"]) if doc.get("enumeration_secret") else None
        group = SrpParams(int.from_bytes(b64d(pdoc["modulus"]), "big"), int(pdoc["generator"]))
        users = {
            name: (b64d(u["salt"]), int.from_bytes(b64d(u["verifier"]), "big"))
            for name, u in doc.get("users", {}).items()
        }
        kwargs = dict(
            signed_param=param_from_json(pdoc),
            server_ephemeral_secret=b64d(edoc["secret"]),
            modulus_signature=b64d(pdoc["modulus_signature"]) if "modulus_signature" in pdoc else None,
            srp_group=group,
            user_verifiers=users,
            session_ttl=int(doc.get("session_ttl", DEFAULT_TTL)),
            grace=int(doc.get("grace", DEFAULT_GRACE)),
            skew=int(doc.get("skew", FUTURE_SKEW_SECONDS)),
            enforce_encryption=bool(doc.get("enforce_encryption", True)),
        )
        if sdoc is not None:
            kwargs["enumeration_secret"] = b64d(sdoc["secret"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{config_path}: bad field {exc}") from None
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return ServerConfig(**kwargs)


def user_entry(identity: str, password: str, group: SrpParams = SrpParams(), salt=None):
    """A ``users`` entry for config.json: salt and verifier, never the password."""
    salt = salt if salt is not None else os.urandom(16)
    v = compute_verifier(group.with_salt(salt), identity, password)
    return {"salt": b64e(salt), "verifier": b64e(to_bytes(v))}
