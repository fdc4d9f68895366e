"""Wire-protocol tests against a live in-process service on an OS-chosen port."""

import asyncio
import dataclasses
import json
import warnings

import pytest

from ghostkeys import service as service_mod
from ghostkeys.bloom import bf_params
from ghostkeys.detector import DetectorStore
from ghostkeys.generator import GeneratorConfig, PRESETS, generate, mix_seed
from ghostkeys.service import AuthService, ServiceConfig, ServiceConfigError


@pytest.fixture()
def small_service(bundle):
    """AuthService wired to the small test bundle, in-memory store."""
    model, cal, layout = bundle
    config = ServiceConfig(port=0, seed=1234, session_timeout=30.0)
    store = DetectorStore(
        None,
        filter_params=bf_params(10_000, 1e-6),
        oracle=lambda obs, k: [],
        iterations=200,
    )
    return AuthService(
        config, store=store, model=model, calibration=cal, layout=layout
    )


class _Client:
    def __init__(self, reader, writer):
        self.reader = reader
        self.writer = writer
        self._next = 0

    async def call(self, op, **fields):
        self._next += 1
        rid = f"r{self._next}"
        msg = {"op": op, "request_id": rid, **fields}
        self.writer.write((json.dumps(msg) + "\n").encode())
        await self.writer.drain()
        reply = json.loads(await self.reader.readline())
        assert reply["request_id"] == rid
        return reply

    async def raw(self, payload: bytes):
        self.writer.write(payload)
        await self.writer.drain()
        return json.loads(await self.reader.readline())

    async def close(self):
        self.writer.close()
        try:
            await self.writer.wait_closed()
        except (ConnectionError, BrokenPipeError):
            pass


def run(coro):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # honeyword shortfall
        return asyncio.run(coro)


async def _connect(service) -> _Client:
    reader, writer = await asyncio.open_connection("127.0.0.1", service.bound_port)
    return _Client(reader, writer)


async def _type_password(client, session_id, password, reply):
    """Drive a started session through the password; returns the done reply."""
    i = 0
    action = reply["action"]
    while i < len(password):
        char = password[i] if action == "await_real" else reply["ghost_char"]
        if action == "await_real":
            i += 1
        reply = await client.call(
            "session_key", session=session_id, char=char
        )
        action = reply["action"]
    reply = await client.call("session_finalize", session=session_id)
    while reply["action"] == "require_ghost":
        reply = await client.call(
            "session_key", session=session_id, char=reply["ghost_char"]
        )
    assert reply["action"] == "done"
    return reply


# -- the happy path ------------------------------------------------------------------


def test_register_session_login_flow(small_service):
    async def scenario():
        await small_service.start()
        try:
            client = await _connect(small_service)
            reply = await client.call(
                "register", user="amy", password="correcthorse"
            )
            assert reply["ok"] is True

            reply = await client.call("session_start", user="amy")
            assert reply["ok"] is True
            sid = reply["session"]
            done = await _type_password(client, sid, "correcthorse", reply)
            assert done["ok"] is True
            assert isinstance(done["ghost"], str)
            assert [bool(b) for b in done["mask"]] == done["mask"]
            assert len(done["mask"]) == len(done["ghost"])

            reply = await client.call(
                "login", user="amy", password="correcthorse"
            )
            assert reply == {"ok": True, "request_id": reply["request_id"]}
            await client.close()
        finally:
            await small_service.stop()

    run(scenario())


def test_session_stream_matches_batch_generate(small_service, bundle):
    """The server owns config and seeds; its session must replay generate()."""
    model, cal, layout = bundle

    async def scenario():
        await small_service.start()
        try:
            client = await _connect(small_service)
            await client.call("register", user="amy", password="correcthorse")
            reply = await client.call("session_start", user="amy")
            done = await _type_password(
                client, reply["session"], "correcthorse", reply
            )
            await client.close()
            return done
        finally:
            await small_service.stop()

    done = run(scenario())
    expected_config = dataclasses.replace(
        PRESETS["default"], rng_seed=mix_seed(1234, 1)
    )
    expected = generate(expected_config, "correcthorse", model, cal, layout)
    assert done["ghost"] == expected.ghost
    assert tuple(done["mask"]) == expected.mask


def test_sessions_with_same_seed_are_byte_identical(bundle):
    """Same service seed, same session index -> identical wire bytes."""
    model, cal, layout = bundle

    async def one_run():
        store = DetectorStore(
            None, filter_params=bf_params(1000, 1e-4),
            oracle=lambda obs, k: [], iterations=200,
        )
        service = AuthService(
            ServiceConfig(port=0, seed=77),
            store=store, model=model, calibration=cal, layout=layout,
        )
        await service.start()
        try:
            client = await _connect(service)
            await client.call("register", user="amy", password="correcthorse")
            reply = await client.call("session_start", user="amy")
            done = await _type_password(
                client, reply["session"], "correcthorse", reply
            )
            await client.close()
            return done["ghost"], tuple(done["mask"])
        finally:
            await service.stop()

    assert run(one_run()) == run(one_run())


# -- failure responses must be indistinguishable ---------------------------------------


def test_login_failures_are_byte_identical(small_service, bundle):
    async def scenario():
        await small_service.start()
        try:
            client = await _connect(small_service)
            await client.call("register", user="amy", password="correcthorse")
            reply = await client.call("session_start", user="amy")
            done = await _type_password(
                client, reply["session"], "correcthorse", reply
            )
            # legitimate login records the honeywords
            await client.call("login", user="amy", password="correcthorse")

            async def raw_reply(**fields):
                msg = {"op": "login", "request_id": "X", **fields}
                client.writer.write((json.dumps(msg) + "\n").encode())
                await client.writer.drain()
                return await client.reader.readline()

            wrong_pw = await raw_reply(user="amy", password="wronghorse1")
            honeyword = await raw_reply(user="amy", password=done["ghost"])
            unknown = await raw_reply(user="nobody", password="whatever12")
            await client.close()
            return wrong_pw, honeyword, unknown
        finally:
            await small_service.stop()

    wrong_pw, honeyword, unknown = run(scenario())
    assert wrong_pw == honeyword == unknown  # bytes, not just semantics
    assert json.loads(wrong_pw)["ok"] is False


def test_honeyword_login_still_raises_server_side_alarm(small_service):
    async def scenario():
        await small_service.start()
        try:
            client = await _connect(small_service)
            await client.call("register", user="amy", password="correcthorse")
            reply = await client.call("session_start", user="amy")
            done = await _type_password(
                client, reply["session"], "correcthorse", reply
            )
            await client.call("login", user="amy", password="correcthorse")
            await client.call("login", user="amy", password=done["ghost"])
            alarms = await client.call("admin_alarms")
            await client.close()
            return alarms
        finally:
            await small_service.stop()

    alarms = run(scenario())
    assert [e["user"] for e in alarms["events"]] == ["amy"]
    assert all("ts" in e for e in alarms["events"])


# -- protocol robustness ---------------------------------------------------------------


def test_malformed_json_gets_placeholder_request_id(small_service):
    async def scenario():
        await small_service.start()
        try:
            client = await _connect(small_service)
            bad = await client.raw(b"this is not json\n")
            non_object = await client.raw(b'"just a string"\n')
            # connection survives malformed input; sessions may be started
            # even before registration (new users type their password too)
            ok = await client.call("session_start", user="amy")
            await client.close()
            return bad, non_object, ok
        finally:
            await small_service.stop()

    bad, non_object, ok = run(scenario())
    assert bad["request_id"] == "?"
    assert bad["ok"] is False
    assert non_object["ok"] is False
    assert ok["ok"] is True and "session" in ok


def test_error_codes(small_service):
    async def scenario():
        await small_service.start()
        try:
            client = await _connect(small_service)
            missing_op = await client.raw(b'{"request_id": "1"}\n')
            unknown_op = await client.call("frobnicate")
            missing_field = await client.call("register", user="amy")
            bad_type = await client.call("register", user=7, password="x" * 10)
            dup = None
            await client.call("register", user="amy", password="correcthorse")
            dup = await client.call("register", user="amy", password="correcthorse")
            short_pw = await client.call("register", user="bob", password="ab")
            bad_session = await client.call(
                "session_key", session="s99", char="a"
            )
            await client.close()
            return missing_op, unknown_op, missing_field, bad_type, dup, short_pw, bad_session
        finally:
            await small_service.stop()

    missing_op, unknown_op, missing_field, bad_type, dup, short_pw, bad_session = run(
        scenario()
    )
    assert missing_op["error"] == "bad-request"
    assert unknown_op["error"] == "unknown-op"
    assert missing_field["error"] == "bad-request"
    assert bad_type["error"] == "bad-request"
    assert dup["error"] == "user-exists"
    assert short_pw["error"] == "bad-password"
    assert bad_session["error"] == "unknown-session"
    for reply in (missing_op, unknown_op, missing_field, bad_type, dup, short_pw):
        assert reply["ok"] is False


def test_wrong_ghost_char_keeps_session_alive(bundle):
    model, cal, layout = bundle
    # force immediate ghost demands so the first key is always a ghost
    preset = dataclasses.replace(
        PRESETS["default"], p0=1.0, p_max=1.0, p_min=1.0, delta_p=0.0
    )

    async def scenario():
        store = DetectorStore(
            None, filter_params=bf_params(1000, 1e-4),
            oracle=lambda obs, k: [], iterations=200,
        )
        service = AuthService(
            ServiceConfig(port=0, seed=5),
            store=store, model=model, calibration=cal, layout=layout,
        )
        service._base_config = preset
        await service.start()
        try:
            client = await _connect(service)
            await client.call("register", user="amy", password="correcthorse")
            reply = await client.call("session_start", user="amy")
            sid = reply["session"]
            assert reply["action"] == "require_ghost"
            demanded = reply["ghost_char"]
            wrong = "a" if demanded != "a" else "b"
            err = await client.call("session_key", session=sid, char=wrong)
            assert err["error"] == "wrong-ghost-char"
            # the demand is unchanged and the session continues
            retry = await client.call("session_key", session=sid, char=demanded)
            assert retry["ok"] is True
            bad_char = await client.call("session_key", session=sid, char="ab")
            assert bad_char["error"] == "invalid-char"
            await client.close()
        finally:
            await service.stop()

    run(scenario())


def test_one_active_session_per_connection(small_service):
    async def scenario():
        await small_service.start()
        try:
            client = await _connect(small_service)
            await client.call("register", user="amy", password="correcthorse")
            first = await client.call("session_start", user="amy")
            second = await client.call("session_start", user="amy")
            assert second["error"] == "session-active"
            # a second connection may hold its own session concurrently
            other = await _connect(small_service)
            theirs = await other.call("session_start", user="amy")
            assert theirs["ok"] is True
            assert theirs["session"] != first["session"]
            await other.close()
            await client.close()
        finally:
            await small_service.stop()

    run(scenario())


def test_dropped_connection_discards_session(small_service):
    async def scenario():
        await small_service.start()
        try:
            client = await _connect(small_service)
            await client.call("register", user="amy", password="correcthorse")
            reply = await client.call("session_start", user="amy")
            sid = reply["session"]
            await client.close()

            fresh = await _connect(small_service)
            gone = await fresh.call("session_key", session=sid, char="c")
            assert gone["error"] == "unknown-session"
            await fresh.close()
        finally:
            await small_service.stop()

    run(scenario())


def test_session_timeout_expires_sessions(bundle):
    model, cal, layout = bundle
    now = [1000.0]

    async def scenario():
        store = DetectorStore(
            None, filter_params=bf_params(1000, 1e-4),
            oracle=lambda obs, k: [], iterations=200,
        )
        service = AuthService(
            ServiceConfig(port=0, seed=5, session_timeout=60.0),
            store=store, model=model, calibration=cal, layout=layout,
            clock=lambda: now[0],
        )
        await service.start()
        try:
            client = await _connect(service)
            await client.call("register", user="amy", password="correcthorse")
            reply = await client.call("session_start", user="amy")
            sid = reply["session"]
            now[0] += 61.0
            expired = await client.call("session_key", session=sid, char="c")
            assert expired["error"] == "unknown-session"
            # a new session can be started after expiry on the same connection
            again = await client.call("session_start", user="amy")
            assert again["ok"] is True
            await client.close()
        finally:
            await service.stop()

    run(scenario())


def test_login_with_explicit_ghost_record(small_service, bundle):
    """CLI-driven flow: the ghost arrives in the login message itself."""
    model, cal, layout = bundle
    result = generate(
        GeneratorConfig(rng_seed=42), "correcthorse", model, cal, layout
    )

    async def scenario():
        await small_service.start()
        try:
            client = await _connect(small_service)
            await client.call("register", user="amy", password="correcthorse")

            # structurally broken records are refused outright
            bad_mask = await client.call(
                "login", user="amy", password="correcthorse",
                ghost=result.ghost, mask=[2] * len(result.ghost),
            )
            assert bad_mask["error"] == "bad-ghost"
            short_mask = await client.call(
                "login", user="amy", password="correcthorse",
                ghost=result.ghost, mask=[0],
            )
            assert short_mask["error"] == "bad-ghost"

            # a self-consistent record that does NOT extract to the account
            # password logs in fine but is ignored for honeyword recording
            mismatched = await client.call(
                "login", user="amy", password="correcthorse",
                ghost=result.ghost, mask=[0] * len(result.ghost),
            )
            assert mismatched["ok"] is True
            no_alarm = await client.call("login", user="amy", password=result.ghost)
            assert no_alarm["ok"] is False
            alarms = await client.call("admin_alarms")
            assert alarms["events"] == []

            # the genuine record arms the detector
            ok = await client.call(
                "login",
                user="amy",
                password="correcthorse",
                ghost=result.ghost,
                mask=[1 if b else 0 for b in result.mask],
            )
            assert ok["ok"] is True
            replay = await client.call("login", user="amy", password=result.ghost)
            assert replay["ok"] is False
            alarms = await client.call("admin_alarms")
            assert [e["user"] for e in alarms["events"]] == ["amy"]
            await client.close()
        finally:
            await small_service.stop()

    run(scenario())


def test_admin_ops_rejected_off_loopback(small_service):
    async def scenario():
        await small_service.start()
        try:
            client = await _connect(small_service)
            # loopback connections pass
            ok = await client.call("admin_alarms")
            assert ok["ok"] is True
            await client.close()
            return True
        finally:
            await small_service.stop()

    assert run(scenario())

    # the loopback predicate itself, with stubbed transports
    class _FakeWriter:
        def __init__(self, peer):
            self._peer = peer

        def get_extra_info(self, name):
            return self._peer

    assert service_mod._is_loopback_peer(_FakeWriter(("127.0.0.1", 1))) is True
    assert service_mod._is_loopback_peer(_FakeWriter(("::1", 1, 0, 0))) is True
    assert service_mod._is_loopback_peer(_FakeWriter(("192.0.2.10", 1))) is False
    assert service_mod._is_loopback_peer(_FakeWriter(None)) is True  # unix socket

    # and the handler-level refusal for a non-loopback connection
    refused = service_mod.AuthService.__new__(service_mod.AuthService)
    conn = service_mod._Connection(is_loopback=False)
    with pytest.raises(service_mod.ProtocolError) as exc:
        refused._require_loopback(conn)
    assert exc.value.code == "not-loopback"


def test_admin_rebuild(small_service):
    async def scenario():
        await small_service.start()
        try:
            client = await _connect(small_service)
            ok = await client.call(
                "admin_rebuild", expected_n=1000, target_fpr=1e-4
            )
            assert ok["ok"] is True
            bad = await client.call(
                "admin_rebuild", expected_n=0, target_fpr=1e-4
            )
            assert bad["error"] == "bad-filter-params"
            await client.close()
        finally:
            await small_service.stop()

    run(scenario())


def test_oversized_line_is_rejected(small_service):
    async def scenario():
        await small_service.start()
        try:
            client = await _connect(small_service)
            reply = await client.raw(b'{"op": "x", "pad": "' + b"y" * 100_000 + b'"}\n')
            return reply
        finally:
            await small_service.stop()

    reply = run(scenario())
    assert reply["error"] == "line-too-long"


# -- configuration ---------------------------------------------------------------------


def test_service_config_validation():
    with pytest.raises(ServiceConfigError):
        ServiceConfig(preset="nope")
    with pytest.raises(ServiceConfigError):
        ServiceConfig(session_timeout=0)
    cfg = ServiceConfig()
    assert cfg.host == "127.0.0.1"
    assert cfg.port == service_mod.DEFAULT_PORT
