from .app import DemoApp, InnerRequest, build_inner_request
from .config import ServerConfig, keygen, load_server_config, user_entry
from .tunnel import TunnelServer

__all__ = [
    "DemoApp", "InnerRequest", "build_inner_request",
    "ServerConfig", "keygen", "load_server_config", "user_entry",
    "TunnelServer",
]
