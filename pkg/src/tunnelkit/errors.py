"""Exception hierarchy.

Every error that can cross the wire carries a stable numeric ``code`` and the
outer HTTP ``status`` used when it is sent unencrypted. The CLI maps each class
to its own process ``exit_code``.
"""


class TunnelError(Exception):
    code = 1000
    status = 400
    exit_code = 1
    default_message = "tunnel error"

    def __init__(self, message=None):
        super().__init__(message or self.default_message)
        self.message = message or self.default_message

    def to_json(self):
        return {"code": self.code, "message": self.message}


# -- crypto ---------------------------------------------------------------

class InvalidPoint(TunnelError):
    code, status, exit_code = 1101, 400, 20
    default_message = "malformed curve point"


class LowOrderPoint(InvalidPoint):
    code, status, exit_code = 1102, 400, 21
    default_message = "peer point has low order"


class AuthenticationFailure(TunnelError):
    code, status, exit_code = 1103, 401, 22
    default_message = "packet failed authentication"


class SignatureInvalid(TunnelError):
    code, status, exit_code = 1104, 400, 10
    default_message = "server parameter signature is invalid"


class FingerprintMismatch(TunnelError):
    code, status, exit_code = 1105, 400, 11
    default_message = "signing key does not match the pinned fingerprint"


class InvalidServerEphemeral(TunnelError):
    code, status, exit_code = 1106, 400, 23
    default_message = "server SRP ephemeral is zero modulo N"


class InvalidClientEphemeral(TunnelError):
    code, status, exit_code = 1107, 400, 24
    default_message = "client SRP ephemeral is zero modulo N"


class ProofMismatch(TunnelError):
    code, status, exit_code = 1108, 401, 25
    default_message = "SRP proof mismatch"


# -- packet ---------------------------------------------------------------

class MalformedFraming(TunnelError):
    code, status, exit_code = 1201, 400, 30
    default_message = "message lacks header/body separator"


class MalformedHeader(TunnelError):
    code, status, exit_code = 1202, 400, 31
    default_message = "malformed header line"


class IllegalHeaderCharacter(TunnelError):
    code, status, exit_code = 1203, 400, 32
    default_message = "illegal character in header"


class MissingBoundary(TunnelError):
    code, status, exit_code = 1204, 400, 33
    default_message = "multipart content type lacks a boundary"


class UnterminatedPart(TunnelError):
    code, status, exit_code = 1205, 400, 34
    default_message = "multipart body is not terminated"


class StalePacket(TunnelError):
    code, status, exit_code = 1206, 400, 35
    default_message = "packet timestamp outside the validity window"


class FutureTimestamp(TunnelError):
    code, status, exit_code = 1207, 400, 36
    default_message = "packet timestamp is in the future"


class ReplayDetected(TunnelError):
    code, status, exit_code = 1208, 409, 37
    default_message = "nonce already used"


# -- session --------------------------------------------------------------

class UnknownSession(TunnelError):
    code, status, exit_code = 1301, 404, 40
    default_message = "unknown session"


class KeyExpired(TunnelError):
    code, status, exit_code = 1302, 401, 41
    default_message = "session key expired, refresh required"


class GraceExpired(TunnelError):
    code, status, exit_code = 1303, 401, 42
    default_message = "refresh grace period elapsed, new handshake required"


# -- server ---------------------------------------------------------------

class DowngradeRejected(TunnelError):
    code, status, exit_code = 1401, 403, 50
    default_message = "session is encrypted, plaintext requests are refused"


class EncryptionRequired(TunnelError):
    code, status, exit_code = 1402, 403, 51
    default_message = "plaintext requests are disabled"


class SessionNotEncrypted(TunnelError):
    code, status, exit_code = 1403, 403, 52
    default_message = "session is unencrypted and cannot use the tunnel"


class NoLoginInProgress(TunnelError):
    code, status, exit_code = 1404, 409, 53
    default_message = "no SRP challenge pending for this session"


class BadRequest(TunnelError):
    code, status, exit_code = 1405, 400, 54
    default_message = "bad request"


# -- client / proxy / cli -------------------------------------------------

class TransportError(TunnelError):
    code, status, exit_code = 1501, 502, 60
    default_message = "transport failure"


class ServerError(TunnelError):
    """An error response returned by the server (sealed or cleartext)."""

    code, status, exit_code = 1502, 502, 61
    default_message = "server returned an error"

    def __init__(self, remote_code, message=None, encrypted=False, response=None):
        super().__init__(message)
        self.remote_code = remote_code
        self.encrypted = encrypted
        self.response = response

    def __str__(self):
        kind = "encrypted" if self.encrypted else "cleartext"
        return f"{self.message} (code {self.remote_code}, {kind})"


class ClockSkewSuspected(ServerError):
    exit_code = 62


class RefreshFailed(TunnelError):
    code, status, exit_code = 1503, 401, 63
    default_message = "key refresh failed, session closed"


class SessionClosed(TunnelError):
    code, status, exit_code = 1504, 400, 64
    default_message = "session is closed"


class ProofRejected(TunnelError):
    code, status, exit_code = 1505, 401, 13
    default_message = "server rejected the login proof"


class ServerProofInvalid(TunnelError):
    code, status, exit_code = 1506, 401, 14
    default_message = "server SRP proof did not verify"


class PathExists(TunnelError):
    code, status, exit_code = 1601, 400, 70
    default_message = "output path already exists"


class ConfigError(TunnelError):
    code, status, exit_code = 1602, 400, 71
    default_message = "invalid configuration"


class UpstreamHandshakeFailed(TunnelError):
    code, status, exit_code = 1701, 502, 80
    default_message = "proxy could not establish the upstream tunnel"


class PasswordRequired(TunnelError):
    code, status, exit_code = 1702, 400, 81
    default_message = "MITM login needs the user's password"


class ClientProofInvalid(TunnelError):
    code, status, exit_code = 1703, 401, 82
    default_message = "downstream client proof did not verify"


class UpstreamProofInvalid(TunnelError):
    code, status, exit_code = 1704, 401, 83
    default_message = "upstream server rejected the proxy's proof"


def all_error_classes():
    seen, stack = [], [TunnelError]
    while stack:
        cls = stack.pop()
        seen.append(cls)
        stack.extend(cls.__subclasses__())
    return seen


def error_for_code(code):
    """Return the error class registered under a wire ``code`` (or None)."""
    for cls in all_error_classes():
        if cls.code == code and cls is not ClockSkewSuspected:
            return cls
    return None
