"""AES-128-GCM with a 16-byte IV and a 12-byte tag.

A 16-byte IV takes GCM's GHASH-derived counter path rather than the
12-byte fast path; the tag is the leading 96 bits of the full GCM tag.
"""

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from ..errors import AuthenticationFailure

KEY_SIZE = 16
IV_SIZE = 16
TAG_SIZE = 12


def seal(key: bytes, iv: bytes, plaintext: bytes) -> tuple[bytes, bytes]:
    if len(key) != KEY_SIZE or len(iv) != IV_SIZE:
        raise ValueError("AES-128-GCM needs a 16-byte key and a 16-byte IV")
    enc = Cipher(algorithms.AES(key), modes.GCM(iv)).encryptor()
    ciphertext = enc.update(plaintext) + enc.finalize()
    return ciphertext, enc.tag[:TAG_SIZE]


def unseal(key: bytes, iv: bytes, ciphertext: bytes, tag: bytes) -> bytes:
    if len(key) != KEY_SIZE:
        raise ValueError("AES-128-GCM needs a 16-byte key")
    if len(iv) != IV_SIZE or len(tag) != TAG_SIZE:
        raise AuthenticationFailure()
    dec = Cipher(
        algorithms.AES(key), modes.GCM(iv, tag, min_tag_length=TAG_SIZE)
    ).decryptor()
    try:
        return dec.update(ciphertext) + dec.finalize()
    except InvalidTag:
        raise AuthenticationFailure() from None
