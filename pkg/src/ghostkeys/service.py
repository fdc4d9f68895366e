"""Asyncio authentication and typing-session service.

Transport is newline-delimited UTF-8 JSON over TCP.  Every request object
yields exactly one response object echoing the client's ``request_id``
(malformed lines are answered with ``request_id`` ``"?"`` and the connection
stays open).  Operations::

    register         {user, password}                  -> {ok}
    session_start    {user}                            -> {session, action[, ghost_char]}
    session_key      {session, char}                   -> {action[, ghost_char][, ghost, mask]}
    session_finalize {session}                         -> {action[, ghost_char][, ghost, mask]}
    login            {user, password[, session|ghost+mask]} -> {ok}
    admin_alarms     {}                                -> {events}        (loopback only)
    admin_rebuild    {expected_n, target_fpr}          -> {ok}            (loopback only)

The server owns all generator parameters and seeds; clients cannot weaken
injection.  Typing sessions are bound to their connection: a dropped
connection discards them, and nothing partial is ever persisted.  Wrong
password and honeyword hits produce byte-identical failure responses —
alarms exist only server-side.

An optional HTTP shim (for the browser demo) exposes the same dispatch
through ``POST /api/connect`` / ``POST /api/send``, serves the layout
document at ``GET /api/layout``, and static demo assets under ``/demo``.
"""

from __future__ import annotations

import asyncio
import dataclasses
import ipaddress
import itertools
import json
import logging
import secrets
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from .alphabet import AlphabetError
from .attack import enumerate_guesses
from .bloom import FilterError, bf_params
from .defaults import default_bundle
from .detector import (
    DetectorError,
    DetectorStore,
    DuplicateUserError,
    StoreCorruptionError,
)
from .generator import (
    PRESETS,
    AwaitReal,
    Done,
    GeneratorConfig,
    GhostMismatchError,
    GhostResult,
    GhostSession,
    RequireGhost,
    SessionStateError,
    mix_seed,
)
from .layout import KeyboardLayout
from .markov import MarkovModel
from .meter import MeterCalibration

log = logging.getLogger("ghostkeys.service")

DEFAULT_PORT = 7807
DEFAULT_HTTP_PORT = 7808
DEFAULT_SESSION_TIMEOUT = 120.0

ENV_HOST = "GHOSTKEYS_HOST"
ENV_PORT = "GHOSTKEYS_PORT"
ENV_STORE = "GHOSTKEYS_STORE"
ENV_PRESET = "GHOSTKEYS_PRESET"
ENV_SESSION_TIMEOUT = "GHOSTKEYS_SESSION_TIMEOUT"

_MAX_HTTP_BODY = 1 << 20
_HTTP_CONN_IDLE_LIMIT = 3600.0

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".map": "application/json",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".ico": "image/x-icon",
}


class ServiceConfigError(ValueError):
    """Service cannot start with the given configuration."""


class ProtocolError(Exception):
    """A well-formed JSON request that cannot be honored."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = DEFAULT_PORT
    store_dir: Optional[str] = None  # None: volatile in-memory store
    preset: str = "default"
    seed: int = 0
    session_timeout: float = DEFAULT_SESSION_TIMEOUT
    http_port: Optional[int] = None  # None: demo shim disabled
    demo_dir: Optional[str] = None

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ServiceConfigError(
                f"unknown preset {self.preset!r}; choose from "
                + ", ".join(sorted(PRESETS))
            )
        if self.session_timeout <= 0:
            raise ServiceConfigError("session timeout must be positive")


@dataclass
class _LiveSession:
    session_id: str
    user: str
    engine: GhostSession
    last_touch: float


@dataclass
class _Connection:
    """Per-connection state; evaporates with the connection."""

    is_loopback: bool
    sessions: Dict[str, _LiveSession] = field(default_factory=dict)
    completed: Dict[str, Tuple[str, GhostResult]] = field(default_factory=dict)
    completed_order: List[str] = field(default_factory=list)
    last_activity: float = 0.0

    def retain(self, live: _LiveSession, result: GhostResult) -> None:
        self.completed[live.session_id] = (live.user, result)
        self.completed_order.append(live.session_id)


def _is_loopback_peer(writer: asyncio.StreamWriter) -> bool:
    peer = writer.get_extra_info("peername")
    if peer is None:  # unix socket or in-process transport
        return True
    try:
        return ipaddress.ip_address(peer[0]).is_loopback
    except ValueError:
        return False


def _encode(obj: Dict[str, Any]) -> bytes:
    return (json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n").encode(
        "utf-8"
    )


def _action_fields(action) -> Dict[str, Any]:
    if isinstance(action, RequireGhost):
        return {"action": "require_ghost", "ghost_char": action.char}
    if isinstance(action, AwaitReal):
        return {"action": "await_real"}
    if isinstance(action, Done):
        return {"action": "done"}
    raise AssertionError(f"unmapped session action {action!r}")


def _require(msg: Dict[str, Any], name: str, typ) -> Any:
    if name not in msg:
        raise ProtocolError("bad-request", f"missing field {name!r}")
    value = msg[name]
    if typ is str and not isinstance(value, str):
        raise ProtocolError("bad-request", f"field {name!r} must be a string")
    if typ is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ProtocolError("bad-request", f"field {name!r} must be an integer")
    if typ is float and not isinstance(value, (int, float)):
        raise ProtocolError("bad-request", f"field {name!r} must be a number")
    if typ is list and not isinstance(value, list):
        raise ProtocolError("bad-request", f"field {name!r} must be an array")
    return value


class AuthService:
    """One service instance: a TCP listener plus an optional HTTP demo shim."""

    def __init__(
        self,
        config: ServiceConfig,
        store: Optional[DetectorStore] = None,
        model: Optional[MarkovModel] = None,
        calibration: Optional[MeterCalibration] = None,
        layout: Optional[KeyboardLayout] = None,
        clock: Callable[[], float] = time.monotonic,
    ):
        self.config = config
        if model is None or calibration is None or layout is None:
            d_model, d_cal, d_layout = default_bundle()
            model = model or d_model
            calibration = calibration or d_cal
            layout = layout or d_layout
        self.model = model
        self.calibration = calibration
        self.layout = layout
        self._clock = clock
        if store is None:
            store = DetectorStore(
                store_dir=config.store_dir, oracle=self._oracle
            )
        self.store = store
        self._base_config: GeneratorConfig = PRESETS[config.preset]
        self._session_counter = itertools.count(1)
        self._server: Optional[asyncio.AbstractServer] = None
        self._http_server: Optional[asyncio.AbstractServer] = None
        self._http_conns: Dict[str, _Connection] = {}

    def _oracle(self, observed: str, budget: int) -> List[str]:
        return enumerate_guesses(observed, self.model, budget)

    # -- lifecycle -----------------------------------------------------------

    async def start(self) -> None:
        try:
            self._server = await asyncio.start_server(
                self._handle_connection, self.config.host, self.config.port
            )
        except OSError as exc:
            raise ServiceConfigError(
                f"cannot bind {self.config.host}:{self.config.port}: {exc}"
            ) from exc
        if self.config.http_port is not None:
            try:
                self._http_server = await asyncio.start_server(
                    self._handle_http, self.config.host, self.config.http_port
                )
            except OSError as exc:
                raise ServiceConfigError(
                    f"cannot bind HTTP {self.config.host}:"
                    f"{self.config.http_port}: {exc}"
                ) from exc
        log.info(
            "listening on %s:%d (preset %s)",
            self.config.host,
            self.bound_port,
            self.config.preset,
        )

    async def stop(self) -> None:
        """Graceful shutdown: stop accepting, then flush the store."""
        for server in (self._server, self._http_server):
            if server is not None:
                server.close()
                await server.wait_closed()
        self._server = None
        self._http_server = None
        self.store.close()

    @property
    def bound_port(self) -> int:
        assert self._server is not None, "service not started"
        return self._server.sockets[0].getsockname()[1]

    @property
    def bound_http_port(self) -> Optional[int]:
        if self._http_server is None:
            return None
        return self._http_server.sockets[0].getsockname()[1]

    # -- TCP transport ---------------------------------------------------------

    async def _handle_connection(
        self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter
    ) -> None:
        conn = _Connection(is_loopback=_is_loopback_peer(writer))
        try:
            while True:
                try:
                    line = await reader.readline()
                except (asyncio.LimitOverrunError, ValueError):
                    writer.write(
                        _encode(
                            {
                                "request_id": "?",
                                "ok": False,
                                "error": "line-too-long",
                                "message": "request exceeds the line limit",
                            }
                        )
                    )
                    await writer.drain()
                    break
                if not line:
                    break
                if not line.strip():
                    continue
                writer.write(_encode(self._dispatch_line(conn, line)))
                await writer.drain()
        except (ConnectionResetError, BrokenPipeError):
            pass
        finally:
            writer.close()
            try:
                await writer.wait_closed()
            except (ConnectionResetError, BrokenPipeError):
                pass

    # -- dispatch ---------------------------------------------------------------

    def _dispatch_line(self, conn: _Connection, line: bytes) -> Dict[str, Any]:
        try:
            msg = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            return {
                "request_id": "?",
                "ok": False,
                "error": "malformed-json",
                "message": str(exc),
            }
        if not isinstance(msg, dict):
            return {
                "request_id": "?",
                "ok": False,
                "error": "malformed-json",
                "message": "request must be a JSON object",
            }
        return self.dispatch(conn, msg)

    def dispatch(self, conn: _Connection, msg: Dict[str, Any]) -> Dict[str, Any]:
        rid = msg.get("request_id")
        conn.last_activity = self._clock()
        try:
            op = _require(msg, "op", str)
            handler = self._HANDLERS.get(op)
            if handler is None:
                raise ProtocolError("unknown-op", f"unknown op {op!r}")
            body = handler(self, conn, msg)
        except ProtocolError as exc:
            return {
                "request_id": rid,
                "ok": False,
                "error": exc.code,
                "message": exc.message,
            }
        except Exception:
            log.exception("internal error handling op %r", msg.get("op"))
            return {
                "request_id": rid,
                "ok": False,
                "error": "internal",
                "message": "internal error",
            }
        body["request_id"] = rid
        body.setdefault("ok", True)
        return body

    # -- handlers ---------------------------------------------------------------

    def _op_register(self, conn: _Connection, msg: Dict[str, Any]) -> Dict[str, Any]:
        user = _require(msg, "user", str)
        password = _require(msg, "password", str)
        try:
            self.store.register(user, password)
        except DuplicateUserError as exc:
            raise ProtocolError("user-exists", str(exc))
        except AlphabetError as exc:
            raise ProtocolError("bad-password", str(exc))
        except DetectorError as exc:
            raise ProtocolError("bad-user", str(exc))
        return {}

    def _op_session_start(
        self, conn: _Connection, msg: Dict[str, Any]
    ) -> Dict[str, Any]:
        user = _require(msg, "user", str)
        self._sweep_sessions(conn)
        if conn.sessions:
            raise ProtocolError(
                "session-active",
                "connection already has an active typing session",
            )
        index = next(self._session_counter)
        session_id = f"s{index}"
        engine = GhostSession(
            dataclasses.replace(
                self._base_config, rng_seed=mix_seed(self.config.seed, index)
            ),
            self.model,
            self.calibration,
            self.layout,
        )
        live = _LiveSession(
            session_id=session_id,
            user=user,
            engine=engine,
            last_touch=self._clock(),
        )
        conn.sessions[session_id] = live
        body = {"session": session_id}
        body.update(self._advance(conn, live))
        return body

    def _op_session_key(
        self, conn: _Connection, msg: Dict[str, Any]
    ) -> Dict[str, Any]:
        live = self._touch_session(conn, msg)
        char = _require(msg, "char", str)
        try:
            live.engine.key(char)
        except GhostMismatchError as exc:
            raise ProtocolError("wrong-ghost-char", str(exc))
        except SessionStateError as exc:
            raise ProtocolError("bad-state", str(exc))
        except (AlphabetError, ValueError) as exc:
            raise ProtocolError("invalid-char", str(exc))
        return self._advance(conn, live)

    def _op_session_finalize(
        self, conn: _Connection, msg: Dict[str, Any]
    ) -> Dict[str, Any]:
        live = self._touch_session(conn, msg)
        try:
            live.engine.begin_finalize()
        except SessionStateError as exc:
            raise ProtocolError("bad-state", str(exc))
        return self._advance(conn, live)

    def _op_login(self, conn: _Connection, msg: Dict[str, Any]) -> Dict[str, Any]:
        user = _require(msg, "user", str)
        password = _require(msg, "password", str)
        ghost_result, consume_sid = self._resolve_ghost_record(conn, msg, user)
        outcome = self.store.check_login_attempt(user, password, ghost_result)
        success = outcome.verdict == "success"
        if success and consume_sid is not None:
            conn.completed.pop(consume_sid, None)
            if consume_sid in conn.completed_order:
                conn.completed_order.remove(consume_sid)
        return {"ok": success}

    def _op_admin_alarms(
        self, conn: _Connection, msg: Dict[str, Any]
    ) -> Dict[str, Any]:
        self._require_loopback(conn)
        events = [
            {"ts": ts, "user": user} for ts, user in self.store.alarms()
        ]
        return {"events": events}

    def _op_admin_rebuild(
        self, conn: _Connection, msg: Dict[str, Any]
    ) -> Dict[str, Any]:
        self._require_loopback(conn)
        expected_n = _require(msg, "expected_n", int)
        target_fpr = _require(msg, "target_fpr", float)
        try:
            params = bf_params(expected_n, float(target_fpr))
        except FilterError as exc:
            raise ProtocolError("bad-filter-params", str(exc))
        self.store.rebuild_filter(params)
        return {}

    _HANDLERS = {
        "register": _op_register,
        "session_start": _op_session_start,
        "session_key": _op_session_key,
        "session_finalize": _op_session_finalize,
        "login": _op_login,
        "admin_alarms": _op_admin_alarms,
        "admin_rebuild": _op_admin_rebuild,
    }

    # -- session helpers -----------------------------------------------------------

    def _advance(self, conn: _Connection, live: _LiveSession) -> Dict[str, Any]:
        action = live.engine.poll()
        body = _action_fields(action)
        if isinstance(action, Done):
            result = live.engine.result()
            conn.sessions.pop(live.session_id, None)
            conn.retain(live, result)
            body["ghost"] = result.ghost
            body["mask"] = list(result.mask)
        return body

    def _touch_session(
        self, conn: _Connection, msg: Dict[str, Any]
    ) -> _LiveSession:
        session_id = _require(msg, "session", str)
        self._sweep_sessions(conn)
        live = conn.sessions.get(session_id)
        if live is None:
            raise ProtocolError(
                "unknown-session", f"no active session {session_id!r}"
            )
        live.last_touch = self._clock()
        return live

    def _sweep_sessions(self, conn: _Connection) -> None:
        now = self._clock()
        expired = [
            sid
            for sid, live in conn.sessions.items()
            if now - live.last_touch > self.config.session_timeout
        ]
        for sid in expired:
            del conn.sessions[sid]
            log.info("session %s expired", sid)

    def _resolve_ghost_record(
        self, conn: _Connection, msg: Dict[str, Any], user: str
    ) -> Tuple[Optional[GhostResult], Optional[str]]:
        """Ghost record for a login: explicit fields, named session, or the
        most recent completed session for this user on this connection."""
        if "ghost" in msg or "mask" in msg:
            ghost = _require(msg, "ghost", str)
            mask = _require(msg, "mask", list)
            if any(m not in (0, 1) for m in mask):
                raise ProtocolError("bad-ghost", "mask must be a list of 0/1")
            if len(mask) != len(ghost):
                raise ProtocolError(
                    "bad-ghost", "mask length must match ghost length"
                )
            original = "".join(
                c for c, m in zip(ghost, mask) if m == 0
            )
            try:
                result = GhostResult(
                    original=original, ghost=ghost, mask=tuple(mask)
                )
                result.verify()
            except ValueError as exc:
                raise ProtocolError("bad-ghost", str(exc))
            return result, None
        if "session" in msg:
            session_id = _require(msg, "session", str)
            entry = conn.completed.get(session_id)
            if entry is None:
                raise ProtocolError(
                    "unknown-session",
                    f"no completed session {session_id!r} on this connection",
                )
            return entry[1], session_id
        for session_id in reversed(conn.completed_order):
            owner, result = conn.completed[session_id]
            if owner == user:
                return result, session_id
        return None, None

    def _require_loopback(self, conn: _Connection) -> None:
        if not conn.is_loopback:
            raise ProtocolError(
                "not-loopback", "admin operations are loopback-only"
            )

    # -- HTTP demo shim ---------------------------------------------------------

    async def _handle_http(
        self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter
    ) -> None:
        try:
            request = await self._read_http_request(reader)
            if request is None:
                return
            method, path, body = request
            status, reason, ctype, payload = self._route_http(
                method, path, body, _is_loopback_peer(writer)
            )
            head = (
                f"HTTP/1.1 {status} {reason}\r\n"
                f"Content-Type: {ctype}\r\n"
                f"Content-Length: {len(payload)}\r\n"
                "Cache-Control: no-store\r\n"
                "Connection: close\r\n\r\n"
            )
            writer.write(head.encode("latin-1") + payload)
            await writer.drain()
        except (
            ConnectionResetError,
            BrokenPipeError,
            asyncio.IncompleteReadError,
            asyncio.LimitOverrunError,
            ValueError,
        ):
            pass
        finally:
            writer.close()
            try:
                await writer.wait_closed()
            except (ConnectionResetError, BrokenPipeError):
                pass

    @staticmethod
    async def _read_http_request(reader):
        line = await reader.readline()
        if not line:
            return None
        parts = line.decode("latin-1").split()
        if len(parts) != 3:
            return None
        method, path = parts[0], parts[1]
        length = 0
        while True:
            header = await reader.readline()
            if header in (b"\r\n", b"\n", b""):
                break
            name, _, value = header.decode("latin-1").partition(":")
            if name.strip().lower() == "content-length":
                try:
                    length = int(value.strip())
                except ValueError:
                    return None
        if length < 0 or length > _MAX_HTTP_BODY:
            return None
        body = await reader.readexactly(length) if length else b""
        return method, path, body

    def _route_http(
        self, method: str, path: str, body: bytes, is_loopback: bool
    ) -> Tuple[int, str, str, bytes]:
        path = path.split("?", 1)[0]
        if method == "POST" and path == "/api/connect":
            self._sweep_http_conns()
            token = secrets.token_hex(16)
            self._http_conns[token] = _Connection(
                is_loopback=is_loopback, last_activity=self._clock()
            )
            return 200, "OK", "application/json", _json_body({"token": token})
        if method == "POST" and path == "/api/send":
            try:
                payload = json.loads(body.decode("utf-8"))
                token = payload["token"]
                message = payload["message"]
            except (
                UnicodeDecodeError,
                json.JSONDecodeError,
                KeyError,
                TypeError,
            ):
                return (
                    400,
                    "Bad Request",
                    "application/json",
                    _json_body({"error": "bad-envelope"}),
                )
            conn = self._http_conns.get(token)
            if conn is None or not isinstance(message, dict):
                return (
                    400,
                    "Bad Request",
                    "application/json",
                    _json_body({"error": "unknown-token"}),
                )
            # admin rights follow the actual HTTP peer, not the stored conn
            conn.is_loopback = is_loopback
            response = self.dispatch(conn, message)
            return 200, "OK", "application/json", _json_body(response)
        if method == "GET" and path == "/api/layout":
            return 200, "OK", "application/json", _json_body(
                self._layout_document()
            )
        if method == "GET" and (path == "/demo" or path.startswith("/demo/")):
            return self._serve_static(path)
        return 404, "Not Found", "application/json", _json_body(
            {"error": "not-found"}
        )

    def _layout_document(self) -> Dict[str, Any]:
        keys = [
            {"char": char, "x": x, "y": y}
            for char, (x, y) in sorted(self.layout.keys.items())
        ]
        return {"name": self.layout.name, "pitch": self.layout.pitch, "keys": keys}

    def _serve_static(self, path: str) -> Tuple[int, str, str, bytes]:
        if self.config.demo_dir is None:
            return 404, "Not Found", "text/plain; charset=utf-8", (
                b"demo assets not configured (start with --demo-dir)"
            )
        root = Path(self.config.demo_dir).resolve()
        rel = path[len("/demo") :].lstrip("/")
        if rel in ("", "index"):
            rel = "index.html"
        if rel == "admin":
            rel = "admin.html"
        target = (root / rel).resolve()
        if root not in target.parents and target != root:
            return 404, "Not Found", "application/json", _json_body(
                {"error": "not-found"}
            )
        if not target.is_file():
            return 404, "Not Found", "application/json", _json_body(
                {"error": "not-found"}
            )
        ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        return 200, "OK", ctype, target.read_bytes()

    def _sweep_http_conns(self) -> None:
        now = self._clock()
        stale = [
            token
            for token, conn in self._http_conns.items()
            if now - conn.last_activity > _HTTP_CONN_IDLE_LIMIT
        ]
        for token in stale:
            del self._http_conns[token]


def _json_body(obj: Dict[str, Any]) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


async def _run_until_interrupt(service: AuthService) -> None:
    import signal

    loop = asyncio.get_running_loop()
    stop = loop.create_future()

    def _request_stop() -> None:
        if not stop.done():
            stop.set_result(None)

    for sig in (signal.SIGINT, signal.SIGTERM):
        try:
            loop.add_signal_handler(sig, _request_stop)
        except NotImplementedError:  # non-unix event loops
            pass
    await service.start()
    try:
        await stop
    finally:
        await service.stop()


def run(config: ServiceConfig, **kwargs) -> None:
    """Serve until SIGINT/SIGTERM; flushes the store on the way out.

    Raises ServiceConfigError for unusable configuration and
    StoreCorruptionError when the persisted store cannot be loaded.
    """
    service = AuthService(config, **kwargs)
    asyncio.run(_run_until_interrupt(service))


__all__ = [
    "AuthService",
    "ProtocolError",
    "ServiceConfig",
    "ServiceConfigError",
    "StoreCorruptionError",
    "run",
    "DEFAULT_PORT",
    "DEFAULT_HTTP_PORT",
    "DEFAULT_SESSION_TIMEOUT",
    "ENV_HOST",
    "ENV_PORT",
    "ENV_STORE",
    "ENV_PRESET",
    "ENV_SESSION_TIMEOUT",
]
