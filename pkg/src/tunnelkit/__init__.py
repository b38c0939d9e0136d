"""Application-layer encrypted tunnel over HTTP.

ECDHE (X25519) on landing and SRP-6a on login yield AES-128-GCM session keys;
every request and response travels as ``iv || ciphertext || tag`` with only the
session UID in clear.
"""

from .client import TunnelClient
from .server import DemoApp, ServerConfig, TunnelServer
from .wire import HttpRequest, HttpResponse, HttpTransport, LocalTransport

__version__ = "0.1.0"

__all__ = [
    "TunnelClient", "DemoApp", "ServerConfig", "TunnelServer",
    "HttpRequest", "HttpResponse", "HttpTransport", "LocalTransport",
]
