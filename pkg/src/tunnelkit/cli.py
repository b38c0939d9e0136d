"""Command line entry points: keygen, verifier, serve, request, proxy.

Exit status is 0 on success, 2 for usage errors, and otherwise the
``exit_code`` of the error class that stopped the command (see README).
"""

import argparse
import base64
import json
import logging
import os
import sys
from pathlib import Path
from urllib.parse import urlsplit

from .errors import ConfigError, TunnelError

log = logging.getLogger("tunnelkit")


def _bool(text):
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _hostport(text):
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected HOST:PORT, got {text!r}")
    return host or "127.0.0.1", int(port)


def _pin(text):
    try:
        pin = bytes.fromhex(text)
    except ValueError:
        raise argparse.ArgumentTypeError("pin must be hex") from None
    if len(pin) != 32:
        raise argparse.ArgumentTypeError("pin must be a 32-byte fingerprint (64 hex chars)")
    return pin


def _userpass(text):
    user, sep, password = text.partition(":")
    if not sep or not user:
        raise argparse.ArgumentTypeError("expected USER:PASSWORD")
    return user, password


# -- commands ---------------------------------------------------------------

def cmd_keygen(args):
    from .server.config import keygen

    param = keygen(args.output)
    print(f"bundle written to {args.output}")
    print(f"fingerprint {param.signer_fingerprint.hex()}")
    print("move signing_key.json offline; the server does not need it")
    return 0


def cmd_verifier(args):
    from .server.config import user_entry

    salt = bytes.fromhex(args.salt) if args.salt else None
    print(json.dumps({args.user: user_entry(args.user, args.password, salt=salt)}, indent=2))
    return 0


def build_server(config_path, enforce_encryption=None, users=()):
    from .server import TunnelServer, load_server_config

    if not Path(config_path).exists():
        raise ConfigError(f"config {config_path} not found (run keygen first)")
    cfg = load_server_config(config_path, enforce_encryption=enforce_encryption)
    for user, password in users:
        cfg.add_user(user, password)
    return TunnelServer(cfg)


def cmd_serve(args):
    from .server.http import make_http_server

    server = build_server(args.config, args.enforce_encryption, args.user or ())
    httpd = make_http_server(server, args.host, args.port)
    host, port = httpd.server_address[:2]
    log.info(json.dumps({
        "event": "serving",
        "url": f"http://{host}:{port}",
        "fingerprint": server.fingerprint.hex(),
        "enforce_encryption": server.config.enforce_encryption,
    }))
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()
    return 0


def _save_session(path, base_url, client):
    doc = {
        "base_url": base_url,
        "uid": client.uid.hex(),
        "key": base64.b64encode(client.key).decode(),
        "fingerprint": client.pinned_fingerprint.hex(),
        "signing_key": base64.b64encode(client.signing_key or b"").decode(),
        "q": base64.b64encode(client._q or b"").decode(),
    }
    tmp = f"{path}.tmp"
    fd = os.open(tmp, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    with os.fdopen(fd, "w") as fh:
        json.dump(doc, fh)
    os.replace(tmp, path)


def _load_session(path, base_url, transport, pin):
    from .client import TunnelClient

    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        return None
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if doc.get("base_url") != base_url or doc.get("fingerprint") != pin.hex():
        return None
    return TunnelClient.resume(
        transport, pin, bytes.fromhex(doc["uid"]), base64.b64decode(doc["key"]),
        base64.b64decode(doc["signing_key"]) or None, base64.b64decode(doc["q"]) or None)


def cmd_request(args):
    from .client import TunnelClient
    from .errors import AuthenticationFailure, UnknownSession
    from .wire import HttpTransport

    url = urlsplit(args.url)
    base_url = f"{url.scheme}://{url.netloc}"
    target = (url.path or "/") + (f"?{url.query}" if url.query else "")
    transport = HttpTransport(base_url)
    client = None
    if args.session_file:
        client = _load_session(args.session_file, base_url, transport, args.pin)
    if client is None:
        client = TunnelClient(transport, args.pin).handshake()

    body = args.data.encode() if args.data is not None else b""
    if args.data_file:
        body = Path(args.data_file).read_bytes()
    headers = [tuple(h.split(":", 1)) for h in args.header or ()]
    headers = [(k.strip(), v.strip()) for k, v in headers]
    if body and not any(k.lower() == "content-type" for k, _ in headers):
        headers.append(("Content-Type", "application/octet-stream"))

    def run():
        if args.login:
            client.login(*args.login)
        return client.request(args.method, target, headers, body)

    try:
        resp = run()
    except (UnknownSession, AuthenticationFailure):
        if not args.session_file:
            raise
        # stale session file: start over once
        client = TunnelClient(transport, args.pin).handshake()
        resp = run()
    if args.session_file:
        _save_session(args.session_file, base_url, client)
    print(resp.start_line)
    if args.include:
        for k, v in resp.headers:
            print(f"{k}: {v}")
        print()
    sys.stdout.flush()
    sys.stdout.buffer.write(resp.body)
    if resp.body and not resp.body.endswith(b"\n"):
        sys.stdout.buffer.write(b"\n")
    sys.stdout.flush()
    return 0


def cmd_proxy(args):
    from .proxy import ProxyConfig, run_proxy

    cfg = ProxyConfig(args.listen, args.upstream, args.pin, args.password, args.log_plaintext)
    log.info("proxy listening on %s:%d -> %s", cfg.listen_address[0], cfg.listen_address[1],
             cfg.upstream_address)
    try:
        run_proxy(cfg)
    except KeyboardInterrupt:
        pass
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="tunnelkit", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    k = sub.add_parser("keygen", help="offline key ceremony: write a new key bundle")
    k.add_argument("output", help="bundle directory (must not exist or be empty)")
    k.set_defaults(func=cmd_keygen)

    v = sub.add_parser("verifier", help="print a config users entry (salt + SRP verifier)")
    v.add_argument("user")
    v.add_argument("password")
    v.add_argument("--salt", help="hex salt (default: random 16 bytes)")
    v.set_defaults(func=cmd_verifier)

    s = sub.add_parser("serve", help="run the tunnel server with the demo API")
    s.add_argument("--config", required=True, help="config.json written by keygen")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8080)
    s.add_argument("--enforce-encryption", type=_bool, default=None, metavar="BOOL")
    s.add_argument("--user", type=_userpass, action="append", metavar="USER:PASSWORD",
                   help="register a demo user at startup (repeatable)")
    s.set_defaults(func=cmd_serve)

    r = sub.add_parser("request", help="send one request through the tunnel")
    r.add_argument("url")
    r.add_argument("-X", "--method", default="GET")
    r.add_argument("-d", "--data")
    r.add_argument("--data-file")
    r.add_argument("-H", "--header", action="append", metavar="NAME: VALUE")
    r.add_argument("--pin", type=_pin, required=True, help="hex signer fingerprint")
    r.add_argument("--session-file")
    r.add_argument("--login", type=_userpass, metavar="USER:PASSWORD")
    r.add_argument("-i", "--include", action="store_true", help="print response headers")
    r.set_defaults(func=cmd_request)

    x = sub.add_parser("proxy", help="plaintext compatibility proxy (optional SRP MITM)")
    x.add_argument("--listen", type=_hostport, default=("127.0.0.1", 8081))
    x.add_argument("--upstream", default="http://127.0.0.1:8080")
    x.add_argument("--pin", type=_pin, required=True)
    x.add_argument("--password")
    x.add_argument("--log-plaintext", action="store_true")
    x.set_defaults(func=cmd_proxy)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except TunnelError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
