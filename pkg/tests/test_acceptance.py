"""Exit criteria. Each test prints one ``[ACC-n] PASS|FAIL`` line.

Run with ``pytest tests/test_acceptance.py -s`` to see the report.
"""

import base64
import json
import random
import threading
import time
from contextlib import contextmanager

import pytest

import oracles
from conftest import FakeClock, Recorder, Tunnel
from tunnelkit.client import TunnelClient
from tunnelkit.crypto import aead, srp
from tunnelkit.crypto.ecdh import ecdh_shared_secret, generate_ephemeral_keypair
from tunnelkit.crypto.hashing import derive_srp_session_key, derive_tunnel_key, hash_bytes
from tunnelkit.errors import AuthenticationFailure, GraceExpired, ProofMismatch
from tunnelkit.packet.envelope import SealedEnvelope, TunnelPacket, open_envelope, seal_envelope
from tunnelkit.packet.message import InnerMessage
from tunnelkit.proxy import TunnelProxy
from tunnelkit.server import TunnelServer
from tunnelkit.server.app import DemoApp, build_inner_request
from tunnelkit.server.http import serve_in_thread
from tunnelkit.server.tunnel import ERROR_HEADER
from tunnelkit.wire import HttpRequest, HttpTransport, LocalTransport

pytestmark = pytest.mark.acceptance

OCTET = "application/octet-stream"


@contextmanager
def criterion(n, title):
    start = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        print(f"\n[ACC-{n}] FAIL {title} ({type(exc).__name__}: {exc})")
        raise
    print(f"\n[ACC-{n}] PASS {title} ({time.perf_counter() - start:.2f}s)")


# -- 1 --------------------------------------------------------------------------

def test_acc1_key_agreement():
    with criterion(1, "1000 randomized ECDHE handshakes agree, < 10 s"):
        rng = random.Random(1)
        start = time.perf_counter()
        failures = 0
        for batch in range(10):
            t = Tunnel()  # fresh signer and server Q per batch
            entropy = lambda n: rng.randbytes(n)  # noqa: E731
            for _ in range(100):
                c = TunnelClient(t.wire, t.pin, clock=t.clock, entropy=entropy).handshake()
                if t.server.store.get(c.uid).key != c.key or len(c.key) != 16:
                    failures += 1
        elapsed = time.perf_counter() - start
        assert failures == 0
        assert elapsed < 10, f"{elapsed:.2f}s"


# -- 2 --------------------------------------------------------------------------

def test_acc2_oracle_equivalence():
    with criterion(2, "X25519, AES-128-GCM, SHA-256, SRP-6a match oracles on >= 20 vectors each"):
        rng = random.Random(2)
        n = 20
        for _ in range(n):
            a, b = rng.randbytes(32), rng.randbytes(32)
            ka, kb = generate_ephemeral_keypair(a), generate_ephemeral_keypair(b)
            assert ka.public_point == oracles.x25519(a, oracles.X25519_BASE)
            assert ecdh_shared_secret(ka, kb.public_point) == oracles.x25519(a, kb.public_point)
        for i in range(n):
            key, iv = rng.randbytes(16), rng.randbytes(16)
            pt = rng.randbytes(rng.choice([0, 1, 15, 16, 17, 64, 100 + i]))
            ct, tag = aead.seal(key, iv, pt)
            assert (ct, tag) == oracles.gcm_encrypt(key, iv, pt, tag_len=12)
            assert aead.unseal(key, iv, ct, tag) == pt
        for i in range(n):
            msg = rng.randbytes(i * 13)
            assert hash_bytes(msg) == oracles.sha256(msg)
            z, fp = rng.randbytes(32), rng.randbytes(32)
            assert derive_tunnel_key(z, fp) == oracles.sha256(z + fp)[:16]
        for i in range(n):
            salt = rng.randbytes(16)
            a, b = rng.randbytes(32), rng.randbytes(32)
            user, pw = f"user{i}", f"pw-{rng.random()}"
            ref = oracles.srp_oracle(srp.RFC5054_N_2048, 2, salt, user, pw,
                                     int.from_bytes(a, "big"), int.from_bytes(b, "big"))
            p = srp.SrpParams(salt=salt)
            v = srp.compute_verifier(p, user, pw)
            state, s = srp.srp_server_challenge(p, v, lambda _n, b=b: b)
            cstate, c, pc = srp.srp_client_respond(p, user, pw, s, lambda _n, a=a: a)
            k, ps = srp.srp_server_verify(state, c, pc)
            assert (v, s, c, pc, k, ps) == (ref["v"], ref["S"], ref["C"], ref["P_C"], ref["K"], ref["P_S"])
            assert srp.srp_client_verify_server(cstate, ps) == k


# -- 3 --------------------------------------------------------------------------

def _random_message(rng):
    size = rng.choice([0, 1, 65536, rng.randrange(65537), rng.randrange(2048), 2 ** rng.randrange(17)])
    headers = [(f"X-H{j}", rng.choice(["", "v", "a b", "ü"]) + str(rng.random()))
               for j in range(rng.randrange(5))]
    if rng.random() < 0.5:
        return InnerMessage.request(rng.choice(["GET", "POST", "PUT"]), f"/p/{rng.randrange(99)}?q=1",
                                    headers, rng.randbytes(size))
    return InnerMessage.response(rng.choice([200, 404, 500]), headers, rng.randbytes(size))


def test_acc3_packet_round_trip_and_mutation():
    with criterion(3, "10,000 messages (<= 64 KiB) round-trip; every single-bit mutation rejected"):
        rng = random.Random(3)
        key, uid, now = rng.randbytes(16), rng.randbytes(16), 1_700_000_000
        false_accepts = 0
        regions = {"iv": 0, "ct": 0, "tag": 0}
        for i in range(10_000):
            env = SealedEnvelope(now, rng.randbytes(16), _random_message(rng),
                                 [("c", str(i))] if i % 7 == 0 else [])
            pkt = seal_envelope(key, uid, env, rng.randbytes)
            assert open_envelope(key, TunnelPacket.from_body(uid, pkt.to_body()), now) == env
            body = bytearray(pkt.to_body())
            region = ("iv", "ct", "tag")[i % 3] if pkt.ciphertext else ("iv", "tag")[i % 2]
            lo, hi = {"iv": (0, 16), "ct": (16, len(body) - 12), "tag": (len(body) - 12, len(body))}[region]
            bit = rng.randrange(lo * 8, hi * 8)
            body[bit // 8] ^= 1 << (bit % 8)
            regions[region] += 1
            try:
                open_envelope(key, TunnelPacket.from_body(uid, bytes(body)), now)
                false_accepts += 1
            except AuthenticationFailure:
                pass
        assert false_accepts == 0
        assert min(regions.values()) > 3000


# -- 4 --------------------------------------------------------------------------

def _post(t, c, inner, ts=None, nonce=None, key=None):
    env = SealedEnvelope(t.clock() if ts is None else ts, nonce or c._fresh_nonce(), inner)
    pkt = seal_envelope(key or c.key, c.uid, env)
    req = HttpRequest("POST", "/tunnel/data", pkt.outer_headers(), pkt.to_body())
    return req, t.server.handle(req)


def _sealed_code(c, resp):
    if resp.header("Content-Type") != OCTET:
        return None
    inner = c._open(resp, [c.key])
    code = inner.get(ERROR_HEADER)
    return int(code) if code else 0


def test_acc4_replay_and_window():
    with criterion(4, "duplicate nonce rejected; now-120 ok, now-121 stale; future > skew rejected"):
        t = Tunnel()
        c = t.client()
        t.clock.advance(300)
        echo = InnerMessage.request("POST", "/echo", [], b"x")
        req, resp = _post(t, c, echo)
        assert _sealed_code(c, resp) == 0
        assert _sealed_code(c, t.server.handle(req)) == 1208
        nonce = b"\x42" * 16
        assert _sealed_code(c, _post(t, c, echo, nonce=nonce)[1]) == 0
        assert _sealed_code(c, _post(t, c, echo, nonce=nonce)[1]) == 1208
        now = t.clock()
        assert _sealed_code(c, _post(t, c, echo, ts=now - 120)[1]) == 0
        assert _sealed_code(c, _post(t, c, echo, ts=now - 121)[1]) == 1206
        assert _sealed_code(c, _post(t, c, echo, ts=now + 5)[1]) == 0
        assert _sealed_code(c, _post(t, c, echo, ts=now + 6)[1]) == 1207
        # the nonce is remembered for the whole window
        req, _ = _post(t, c, echo)
        t.clock.advance(120)
        assert _sealed_code(c, t.server.handle(req)) == 1208
        t.clock.advance(1)
        assert _sealed_code(c, t.server.handle(req)) == 1206


# -- 5 --------------------------------------------------------------------------

def test_acc5_srp():
    with criterion(5, "1000 correct SRP runs agree on K; 1000 wrong passwords -> ProofMismatch, no P_S"):
        rng = random.Random(5)
        entropy = rng.randbytes
        for i in range(1000):
            p = srp.SrpParams(salt=rng.randbytes(16))
            pw = rng.randbytes(12).hex()
            v = srp.compute_verifier(p, f"u{i}", pw)
            state, s = srp.srp_server_challenge(p, v, entropy)
            cstate, c, pc = srp.srp_client_respond(p, f"u{i}", pw, s, entropy)
            k, ps = srp.srp_server_verify(state, c, pc)
            assert srp.srp_client_verify_server(cstate, ps) == k == cstate.secret_k and len(k) == 32
        for i in range(1000):
            p = srp.SrpParams(salt=rng.randbytes(16))
            pw = rng.randbytes(12).hex()
            v = srp.compute_verifier(p, f"u{i}", pw)
            state, s = srp.srp_server_challenge(p, v, entropy)
            wrong = pw + rng.choice(["x", "", " "]) if i % 2 else rng.randbytes(12).hex()
            if wrong == pw:
                wrong += "!"
            _, c, pc = srp.srp_client_respond(p, f"u{i}", wrong, s, entropy)
            with pytest.raises(ProofMismatch):
                srp.srp_server_verify(state, c, pc)
            assert state.proof_ps is None and state.secret_k is None


# -- 6 --------------------------------------------------------------------------

def _decryptable(keys, body):
    if len(body) < 28:
        return False
    for key in keys:
        try:
            aead.unseal(key, body[:16], body[16:-12], body[-12:])
            return True
        except AuthenticationFailure:
            pass
    return False


def test_acc6_error_encryption_rule():
    with criterion(6, "every server error is encrypted iff the request decrypted"):
        t = Tunnel(enforce_encryption=True)
        c = t.client()
        t.clock.advance(200)
        codes = set()
        cases = []

        def check(name, req, keys):
            resp = t.server.handle(req)
            decryptable = _decryptable(keys, req.body)
            encrypted = resp.header("Content-Type") == OCTET
            assert encrypted == decryptable, name
            if encrypted:
                code = int(c._open(resp, keys).get(ERROR_HEADER))
            else:
                code = int(resp.header(ERROR_HEADER))
                assert json.loads(resp.body)["code"] == code
            codes.add(code)
            cases.append((name, code, encrypted))

        def data(inner, ts=None, nonce=None, key=None, extra=()):
            env = SealedEnvelope(t.clock() if ts is None else ts, nonce or c._fresh_nonce(), inner)
            pkt = seal_envelope(key or c.key, c.uid, env)
            return HttpRequest("POST", "/tunnel/data", pkt.outer_headers() + list(extra), pkt.to_body())

        def raw(plaintext, key=None):
            iv = c._fresh_nonce()
            ct, tag = aead.seal(key or c.key, iv, plaintext)
            return HttpRequest("POST", "/tunnel/data", [("X-Tunnel-UID", c.uid.hex())], iv + ct + tag)

        # ``keys`` is what the server can legitimately try for that request: none
        # when the uid does not resolve or the session is past its key lifetime
        good = data(InnerMessage.request("POST", "/echo", [], b"x"))
        uid_h = [("X-Tunnel-UID", c.uid.hex())]
        k = [c.key]
        check("no uid", HttpRequest("POST", "/tunnel/data", [], good.body), [])
        check("bad uid", HttpRequest("POST", "/tunnel/data", [("X-Tunnel-UID", "xyz")], good.body), [])
        check("unknown uid", HttpRequest("POST", "/tunnel/data", [("X-Tunnel-UID", "00" * 16)], b"x" * 40), [])
        check("short body", HttpRequest("POST", "/tunnel/data", uid_h, b"x" * 20), k)
        flipped = bytearray(good.body)
        flipped[-1] ^= 1
        check("bad tag", HttpRequest("POST", "/tunnel/data", uid_h, bytes(flipped)), k)
        check("wrong key", data(InnerMessage.request("GET", "/", []), key=b"\x00" * 16), k)
        check("get on data", HttpRequest("GET", "/tunnel/data", uid_h), k)
        check("stale", data(InnerMessage.request("GET", "/echo", []), ts=t.clock() - 121), k)
        check("future", data(InnerMessage.request("GET", "/echo", []), ts=t.clock() + 6), k)
        t.server.handle(good)
        check("replay", good, k)
        check("no separator", raw(b"GET / HTTP/1.1"), k)
        check("no nonce", raw(b"GET / HTTP/1.1\r\nX-Tunnel-Timestamp: 1\r\n\r\n"), k)
        check("bad request line", data(InnerMessage("BROKEN", [], b"")), k)
        check("missing boundary", data(InnerMessage.request("POST", "/inspect", [
            ("Content-Type", "multipart/form-data")], b"--a\r\n")), k)
        check("unterminated part", data(InnerMessage.request("POST", "/inspect", [
            ("Content-Type", "multipart/form-data; boundary=a")], b"--a\r\nX: y\r\n\r\nbody")), k)
        check("header injection", data(InnerMessage.request("GET", "/cookies?set=a%0D%0Ab", [])), k)
        check("auth without info", data(InnerMessage.request("POST", "/auth", [], b"{}")), k)
        check("auth info no user", data(InnerMessage.request("POST", "/auth/info", [], b"[]")), k)
        info = c._open(t.server.handle(data(InnerMessage.request(
            "POST", "/auth/info", [], b'{"username": "alice"}'))), k)
        assert info.status == 200
        zero = base64.b64encode(bytes(256)).decode()
        check("zero client ephemeral", data(InnerMessage.request("POST", "/auth", [], json.dumps(
            {"client_ephemeral": zero, "client_proof": base64.b64encode(bytes(32)).decode()}).encode())), k)
        c._open(t.server.handle(data(InnerMessage.request(
            "POST", "/auth/info", [], b'{"username": "alice"}'))), k)
        check("wrong proof", data(InnerMessage.request("POST", "/auth", [], json.dumps(
            {"client_ephemeral": base64.b64encode((2).to_bytes(256, "big")).decode(),
             "client_proof": base64.b64encode(bytes(32)).decode()}).encode())), k)

        # refresh route
        v = base64.b64encode(generate_ephemeral_keypair(bytes(range(32))).public_point).decode()
        put_inner = InnerMessage.request("PUT", "/tunnel/key", [], json.dumps({"v": v}).encode())

        def put(inner, key=None):
            r = data(inner, key=key)
            return HttpRequest("PUT", "/tunnel/key", r.headers, r.body)

        check("put wrong target", put(InnerMessage.request("POST", "/echo", [], b"")), k)
        check("put bad point", put(InnerMessage.request("PUT", "/tunnel/key", [], b'{"v": "AAAA"}')), k)
        check("put low order", put(InnerMessage.request("PUT", "/tunnel/key", [], json.dumps(
            {"v": base64.b64encode(bytes(32)).decode()}).encode())), k)
        check("put wrong key", put(put_inner, key=b"\x01" * 16), k)
        check("put unknown uid", HttpRequest("PUT", "/tunnel/key", [("X-Tunnel-UID", "11" * 16)], b"x" * 40), [])
        check("key route method", HttpRequest("PATCH", "/tunnel/key"), [])
        check("post key bad json", HttpRequest("POST", "/tunnel/key", [], b"nope"), [])
        check("post key low order", HttpRequest("POST", "/tunnel/key", [], json.dumps(
            {"v": base64.b64encode(bytes(32)).decode()}).encode()), [])
        check("post key short point", HttpRequest("POST", "/tunnel/key", [], b'{"v": "AAAA"}'), [])

        # plaintext routes
        check("encryption required", HttpRequest("GET", "/echo"), [])
        check("downgrade", HttpRequest("GET", "/echo", uid_h), [])

        # plain session on the data route (migration mode server, same walk)
        t2 = Tunnel(enforce_encryption=False)
        info = t2.server.handle(HttpRequest("POST", "/auth/info", [], b'{"username": "bob"}')).json()
        resp = t2.server.handle(HttpRequest("POST", "/tunnel/data", [("X-Tunnel-UID", info["uid"])], b"x" * 40))
        assert resp.header("Content-Type") != OCTET
        codes.add(int(resp.header(ERROR_HEADER)))
        resp = t2.server.handle(HttpRequest("POST", "/auth", [], b"{}"))
        codes.add(int(resp.header(ERROR_HEADER)))

        # expiry: key-expired is reported without decrypting
        t.clock.advance(901)
        check("expired", data(InnerMessage.request("GET", "/echo", [])), [])
        check("grace expired", put(put_inner), [])

        server_codes = {1101, 1102, 1103, 1107, 1108, 1201, 1202, 1203, 1204, 1205, 1206, 1207, 1208,
                        1301, 1302, 1303, 1401, 1402, 1403, 1404, 1405}
        missing = server_codes - codes
        assert not missing, f"walk did not reach {sorted(missing)}"
        assert len(cases) >= 30


# -- 7 --------------------------------------------------------------------------

def test_acc7_downgrade_state_machine():
    with criterion(7, "plaintext requests naming an encrypted uid rejected 100% over random sequences"):
        rng = random.Random(7)
        attempts = rejected = 0
        for seq in range(60):
            enforce = seq % 2 == 0
            t = Tunnel(enforce_encryption=enforce)
            clients, plain_uids = [], []
            for _ in range(25):
                op = rng.randrange(8)
                if op == 0 or not clients:
                    clients.append(t.client())
                elif op == 1:
                    t.clock.advance(rng.choice([1, 60, 400, 901]))
                elif op == 2:
                    c = rng.choice(clients)
                    try:
                        c.request("POST", "/echo", [], b"x")
                    except Exception:
                        pass
                elif op == 3 and not enforce:
                    resp = t.server.handle(HttpRequest("POST", "/auth/info", [], b'{"username": "alice"}'))
                    plain_uids.append(resp.json()["uid"])
                elif op == 4:
                    c = rng.choice(clients)
                    try:
                        c.login("alice", rng.choice(["correct horse", "wrong"]))
                    except Exception:
                        pass
                elif op == 5:
                    # restart with the session store carried over
                    snap = t.server.store.snapshot()
                    t.server = TunnelServer(t.config, clock=t.clock)
                    t.server.store.restore(snap)
                    t.wire.inner = LocalTransport(t.server)
                else:
                    c = rng.choice(clients)
                    method, path = rng.choice([("GET", "/echo"), ("POST", "/auth/info"), ("POST", "/auth"),
                                               ("GET", "/cookies"), ("POST", "/tunnel/key/x")])
                    hname = rng.choice(["X-Tunnel-UID", "x-tunnel-uid", "X-TUNNEL-UID"])
                    uid = c.uid.hex() if rng.random() < 0.7 else c.uid.hex().upper()
                    resp = t.server.handle(HttpRequest(method, path, [(hname, uid)], b'{"username": "alice"}'))
                    attempts += 1
                    if resp.status == 403 and resp.header(ERROR_HEADER) == "1401":
                        rejected += 1
                for uid in plain_uids:
                    assert not t.server.store.get(bytes.fromhex(uid)).encrypted
                for c in clients:
                    assert t.server.store.get(c.uid).encrypted
        assert attempts > 100
        assert rejected == attempts, f"{attempts - rejected} downgrade attempts accepted"


# -- 8 --------------------------------------------------------------------------

MULTIPART_BODY = (
    b"--Zq\r\nContent-Disposition: form-data; name=\"caption\"\r\n\r\nsunset \xc3\xa9\r\n"
    b"--Zq\r\nContent-Disposition: form-data; name=\"photo\"; filename=\"s.png\"\r\n"
    b"Content-Type: image/png\r\n\r\n\x89PNG\r\n\x1a\n\x00\x00\r\n--Zq--\r\n"
)

CORPUS = [
    ("GET", "/inspect?a=1&b=two&b=3&empty=", [], b""),
    ("GET", "/cookies", [("Cookie", "sid=abc; theme=dark")], b""),
    ("GET", "/cookies?set=fresh%3D1&set=b%3D2", [("Cookie", "x=1"), ("Cookie", "y=2")], b""),
    ("POST", "/inspect", [("Content-Type", "application/json")], b'{"n": [1, 2, {"k": "v"}]}'),
    ("POST", "/inspect", [("Content-Type", "application/x-www-form-urlencoded")], b"a=1&b=%20x&c=%26"),
    ("POST", "/inspect", [("Content-Type", "multipart/form-data; boundary=Zq")], MULTIPART_BODY),
    ("POST", "/echo", [("Content-Type", "application/octet-stream")], bytes(range(256)) * 40),
    ("PUT", "/echo", [("Content-Type", "text/plain; charset=utf-8")], "héllo\r\n\r\n".encode()),
    ("GET", "/missing?x=1", [], b""),
    ("DELETE", "/inspect", [("Cookie", "a=1"), ("Accept", "*/*")], b""),
]


def test_acc8_middleware_transparency():
    with criterion(8, "tunneled responses equal direct dispatch over the demo corpus"):
        t = Tunnel()
        c = t.client()
        app = DemoApp()
        for method, target, headers, body in CORPUS:
            direct = app.dispatch(build_inner_request(f"{method} {target} HTTP/1.1", headers, body))
            tunneled = c.request(method, target, headers, body)
            assert tunneled.status == direct.status, target
            assert tunneled.body == direct.body, target
            assert tunneled.headers == direct.headers, target


# -- 9 --------------------------------------------------------------------------

def _plain_login(down, user, password):
    info = down.roundtrip(HttpRequest("POST", "/auth/info", [("Content-Type", "application/json")],
                                      json.dumps({"username": user}).encode()))
    doc = info.json()
    params = srp.SrpParams(srp.from_bytes(base64.b64decode(doc["modulus"])), doc["generator"],
                           base64.b64decode(doc["salt"]))
    state, cc, pc = srp.srp_client_respond(params, user, password,
                                           srp.from_bytes(base64.b64decode(doc["server_ephemeral"])))
    body = json.dumps({"client_ephemeral": base64.b64encode(params.pad(cc)).decode(),
                       "client_proof": base64.b64encode(pc).decode()}).encode()
    return state, down.roundtrip(HttpRequest("POST", "/auth", [("Content-Type", "application/json")], body))


def test_acc9_proxy_end_to_end():
    with criterion(9, "proxy transparent; MITM reads post-login traffic; wrong password fails upstream, < 30 s"):
        start = time.perf_counter()
        clock = FakeClock()
        t = Tunnel()
        t.clock = clock
        t.server = TunnelServer(t.config, clock=clock)
        httpd, url = serve_in_thread(t.server)
        servers = [httpd]
        try:
            direct = TunnelClient(HttpTransport(url), t.pin, clock=clock).handshake()

            def through_proxy(password):
                upstream = Recorder(HttpTransport(url))
                proxy = TunnelProxy(upstream, t.pin, password, log_plaintext=True, clock=clock).start()
                h, purl = serve_in_thread(proxy)
                servers.append(h)
                return proxy, upstream, HttpTransport(purl)

            # (a) transparency
            proxy, upstream, down = through_proxy("correct horse")
            for method, target, headers, body in CORPUS:
                want = direct.request(method, target, headers, body)
                got = down.roundtrip(HttpRequest(method, target, headers, body))
                assert (got.status, got.body) == (want.status, want.body), target
                for name in {n.lower() for n, _ in want.headers}:
                    assert [v for n, v in got.headers if n.lower() == name] == want.get_all(name), name
            assert {q.path for q in upstream.requests()} <= {"/tunnel/key", "/tunnel/data"}

            # (b) MITM with the right password keeps reading traffic after login
            state, resp = _plain_login(down, "alice", "correct horse")
            assert resp.status == 200
            srp.srp_client_verify_server(state, base64.b64decode(resp.json()["server_proof"]))
            assert t.server.store.get(proxy.client.uid).key == proxy.client.key
            secret = b"post-login secret payload"
            after = down.roundtrip(HttpRequest("POST", "/echo", [("Content-Type", "text/plain")], secret))
            assert after.status == 200 and after.body == secret
            q, r = upstream.log[-1]
            pkt = TunnelPacket.from_body(proxy.client.uid, r.body)
            assert open_envelope(proxy.client.key, pkt, clock()).inner.body == secret
            assert secret not in q.body and secret not in r.body

            # (c) MITM with the wrong password cannot complete the upstream proof
            proxy2, upstream2, down2 = through_proxy("not the password")
            before = proxy2.client.key
            _, resp = _plain_login(down2, "alice", "not the password")
            assert resp.status == 401 and resp.header(ERROR_HEADER) == "1704"
            assert proxy2.client.key == before
            assert t.server.store.get(proxy2.client.uid).key == before
            # and with the real password typed downstream it fails on the first leg
            _, resp = _plain_login(down2, "alice", "correct horse")
            assert resp.header(ERROR_HEADER) == "1703"
        finally:
            for h in servers:
                h.shutdown()
                h.server_close()
        elapsed = time.perf_counter() - start
        assert elapsed < 30, f"{elapsed:.2f}s"


# -- 10 -------------------------------------------------------------------------

def test_acc10_rekey_ordering_and_grace():
    with criterion(10, "post-login: old key fails, SRP key works; grace +30 ok, +31 GraceExpired"):
        t = Tunnel()
        c = t.client()
        old = c.key
        challenge = c.begin_login("alice")
        state, _, _ = srp.srp_client_respond(challenge.params, "alice", "correct horse",
                                             challenge.server_ephemeral)
        # hold the client key back so we can probe with both keys by hand
        body = json.dumps({
            "client_ephemeral": base64.b64encode(state.params.pad(state.own_public)).decode(),
            "client_proof": base64.b64encode(state.proof_pc).decode(),
        }).encode()
        _, resp = _post(t, c, InnerMessage.request("POST", "/auth", [], body))
        reply = c._open(resp, [old])  # the /auth reply itself is under the pre-login key
        k = srp.srp_client_verify_server(state, base64.b64decode(json.loads(reply.body)["server_proof"]))
        new = derive_srp_session_key(k)
        echo = InnerMessage.request("POST", "/echo", [], b"after login")
        _, first = _post(t, c, echo, key=old)
        assert first.header("Content-Type") != OCTET and first.header(ERROR_HEADER) == "1103"
        _, second = _post(t, c, echo, key=new)
        assert c._open(second, [new]).body == b"after login"

        for offset, ok in ((930, True), (931, False)):
            tt = Tunnel()
            cc = tt.client()
            tt.clock.advance(offset)
            if ok:
                cc.refresh()
                assert cc.request("POST", "/echo", [], b"y").body == b"y"
            else:
                with pytest.raises(GraceExpired):
                    tt.server.store.refresh_session(cc.uid, b"\x00" * 16, tt.clock())
                v = base64.b64encode(generate_ephemeral_keypair(bytes(range(32))).public_point).decode()
                sealed = cc._seal(InnerMessage.request("PUT", "/tunnel/key", [], json.dumps({"v": v}).encode()),
                                  cc.key)
                resp = tt.server.handle(HttpRequest("PUT", "/tunnel/key", sealed.headers, sealed.body))
                assert resp.header(ERROR_HEADER) == "1303"
        # the expiry edge itself is inclusive
        te = Tunnel()
        ce = te.client()
        te.clock.advance(900)
        assert _sealed_code(ce, _post(te, ce, echo)[1]) == 0
        te.clock.advance(1)
        assert _post(te, ce, echo)[1].header(ERROR_HEADER) == "1302"


def test_acc_concurrent_refresh_single_put():
    """Supports 10: queued sends flush under the new key after one refresh."""
    t = Tunnel()
    c = t.client()
    t.clock.advance(901)
    out = {}
    threads = [threading.Thread(target=lambda i=i: out.__setitem__(i, c.request("POST", "/echo", [], b"%d" % i)))
               for i in range(8)]
    for th in threads:
        th.start()
    for th in threads:
        th.join(10)
    assert all(out[i].body == b"%d" % i for i in range(8))
    assert len(t.wire.requests("PUT")) == 1
