"""Wire protocol between an environment host and the agent.

Frames are a 4-byte big-endian payload length followed by a UTF-8 JSON
object with a ``type`` field. The conversation is strict lockstep: every
request gets exactly one reply before the next request is sent.

Session::

    client                      server
    Hello{"1", (0, 0)}    ->    Hello{"1", (0, 0)}
    Reset{task_id}        ->    ObservationMsg          (or Error)
    Observe{}             ->    ObservationMsg
    Execute{script_text}  ->    ExecResultMsg           (or Error)
    Shutdown{}            ->    Shutdown{}, then close

A message out of order gets ``Error{"protocol_violation", ...}`` and the
connection is closed. The raster travels as the symbolic grid; an adapter
for a real desktop would send an image under the same message shapes.
"""

from __future__ import annotations

import json
import socket
import socketserver
import struct
import threading
from dataclasses import dataclass, field, fields
from typing import Any, Callable, Union

from . import action_dsl as dsl
from .sim_desktop import EnvState, ExecReport, LocalEnv, Observation, execute

__all__ = [
    "DEFAULT_PORT",
    "MAX_FRAME",
    "PROTO_VERSION",
    "BridgeError",
    "Error",
    "ExecResultMsg",
    "Execute",
    "FrameTooLarge",
    "Hello",
    "MalformedPayload",
    "Observe",
    "ObservationMsg",
    "ProtocolViolation",
    "RemoteEnv",
    "RemoteError",
    "Reset",
    "Shutdown",
    "TransportError",
    "connect",
    "decode",
    "encode",
    "serve",
]

PROTO_VERSION = "1"
DEFAULT_PORT = 48333
MAX_FRAME = 16 * 1024 * 1024
_HEADER = struct.Struct(">I")


class BridgeError(Exception):
    pass


class FrameTooLarge(BridgeError):
    pass


class MalformedPayload(BridgeError):
    pass


class ProtocolViolation(BridgeError):
    pass


class TransportError(BridgeError, ConnectionError):
    pass


class RemoteError(BridgeError):
    def __init__(self, code: str, detail: str):
        super().__init__(f"{code}: {detail}")
        self.code = code
        self.detail = detail


class DesyncError(BridgeError):
    """The remote state hash disagrees with the client's shadow replay."""


# ---- messages ----


@dataclass(frozen=True)
class Hello:
    proto_version: str = PROTO_VERSION
    screen: tuple[int, int] = (0, 0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "screen", tuple(self.screen))


@dataclass(frozen=True)
class Reset:
    task_id: str


@dataclass(frozen=True)
class Observe:
    pass


@dataclass(frozen=True)
class ObservationMsg:
    metadata: list = field(default_factory=list)
    raster: dict = field(default_factory=dict)
    state_hash: str = ""


@dataclass(frozen=True)
class Execute:
    script_text: str


@dataclass(frozen=True)
class ExecResultMsg:
    report: dict
    state_hash: str


@dataclass(frozen=True)
class Error:
    code: str
    detail: str = ""


@dataclass(frozen=True)
class Shutdown:
    pass


WireMessage = Union[Hello, Reset, Observe, ObservationMsg, Execute, ExecResultMsg, Error, Shutdown]
MESSAGE_TYPES = {cls.__name__: cls for cls in (Hello, Reset, Observe, ObservationMsg, Execute, ExecResultMsg,
                                               Error, Shutdown)}
_FIELD_TYPES = {
    "proto_version": str, "task_id": str, "script_text": str, "state_hash": str, "code": str, "detail": str,
    "metadata": list, "raster": dict, "report": dict, "screen": list,
}


def encode(msg: WireMessage) -> bytes:
    name = type(msg).__name__
    if name not in MESSAGE_TYPES:
        raise TypeError(f"not a wire message: {msg!r}")
    body: dict[str, Any] = {"type": name}
    for f in fields(msg):
        v = getattr(msg, f.name)
        body[f.name] = list(v) if isinstance(v, tuple) else v
    try:
        payload = json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=False,
                             allow_nan=False).encode("utf-8")
    except ValueError as exc:
        raise MalformedPayload(f"cannot encode {name}: {exc}") from None
    if len(payload) > MAX_FRAME:
        raise FrameTooLarge(f"payload of {len(payload)} bytes exceeds {MAX_FRAME}")
    return _HEADER.pack(len(payload)) + payload


def _from_payload(payload: bytes) -> WireMessage:
    if not payload:
        raise MalformedPayload("empty payload")
    try:
        body = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedPayload(f"payload is not UTF-8 JSON: {exc}") from None
    if not isinstance(body, dict) or not isinstance(body.get("type"), str):
        raise MalformedPayload("payload is not an object with a string 'type'")
    cls = MESSAGE_TYPES.get(body.pop("type"))
    if cls is None:
        raise MalformedPayload("unknown message type")
    names = {f.name for f in fields(cls)}
    if set(body) != names:
        raise MalformedPayload(f"{cls.__name__} expects fields {sorted(names)}, got {sorted(body)}")
    for k, v in body.items():
        if not isinstance(v, _FIELD_TYPES[k]):
            raise MalformedPayload(f"{cls.__name__}.{k} has the wrong type")
    if cls is Hello and (len(body["screen"]) != 2 or not all(type(v) is int for v in body["screen"])):
        raise MalformedPayload("Hello.screen must be two integers")
    return cls(**body)


def decode(frame: bytes) -> WireMessage:
    """Decode one complete frame (header included)."""
    if len(frame) < _HEADER.size:
        raise MalformedPayload("frame shorter than its length header")
    (n,) = _HEADER.unpack_from(frame)
    if n > MAX_FRAME:
        raise FrameTooLarge(f"declared payload of {n} bytes exceeds {MAX_FRAME}")
    if len(frame) - _HEADER.size != n:
        raise MalformedPayload(f"declared length {n} but frame carries {len(frame) - _HEADER.size} bytes")
    return _from_payload(frame[_HEADER.size:])


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        try:
            chunk = sock.recv(n - len(buf))
        except socket.timeout:
            raise
        except OSError as exc:
            raise TransportError(f"connection failed: {exc}") from None
        if not chunk:
            raise TransportError("connection closed by peer")
        buf += chunk
    return bytes(buf)


def read_message(sock: socket.socket) -> WireMessage:
    (n,) = _HEADER.unpack(_recv_exact(sock, _HEADER.size))
    if n > MAX_FRAME:
        raise FrameTooLarge(f"declared payload of {n} bytes exceeds {MAX_FRAME}")
    return _from_payload(_recv_exact(sock, n))


def send_message(sock: socket.socket, msg: WireMessage) -> None:
    try:
        sock.sendall(encode(msg))
    except OSError as exc:
        raise TransportError(f"send failed: {exc}") from None


def observation_msg(obs: Observation, state_hash: str) -> ObservationMsg:
    d = obs.to_dict()
    return ObservationMsg(d["metadata"], d["raster"], state_hash)


# ---- server ----


class _Session(socketserver.BaseRequestHandler):
    server: "BridgeServer"

    def handle(self) -> None:
        sock = self.request
        sock.settimeout(self.server.timeout_s)
        greeted = False
        env: LocalEnv | None = None
        while True:
            try:
                msg = read_message(sock)
            except socket.timeout:
                self._reply(Error("timeout", "no request within the session timeout"))
                return
            except (FrameTooLarge, MalformedPayload) as exc:
                self._reply(Error("malformed", str(exc)))
                return
            except TransportError:
                return
            if not greeted:
                if not isinstance(msg, Hello):
                    self._violation(f"expected Hello, got {type(msg).__name__}")
                    return
                if msg.proto_version != PROTO_VERSION:
                    self._reply(Error("version_mismatch", f"server speaks {PROTO_VERSION}, client {msg.proto_version}"))
                    return
                greeted = True
                self._reply(Hello(PROTO_VERSION, (0, 0)))
                continue
            if isinstance(msg, Reset):
                try:
                    env = LocalEnv(self.server.env_factory(msg.task_id))
                except KeyError as exc:
                    self._reply(Error("unknown_task", str(exc)))
                    continue
                self._reply(observation_msg(env.observe(), env.state_hash()))
            elif isinstance(msg, Shutdown):
                self._reply(Shutdown())
                return
            elif env is None or not isinstance(msg, (Observe, Execute)):
                self._violation(f"unexpected {type(msg).__name__}" + (" before Reset" if env is None else ""))
                return
            elif isinstance(msg, Observe):
                self._reply(observation_msg(env.observe(), env.state_hash()))
            else:
                try:
                    report = env.execute(msg.script_text)
                except dsl.ActionSyntaxError as exc:
                    self._reply(Error("bad_script", str(exc)))
                    continue
                except ValueError as exc:  # OutOfBoundsError
                    self._reply(Error("out_of_bounds", str(exc)))
                    continue
                self._reply(ExecResultMsg(report.to_dict(), report.state_hash))

    def _reply(self, msg: WireMessage) -> None:
        try:
            send_message(self.request, msg)
        except TransportError:
            pass

    def _violation(self, detail: str) -> None:
        self._reply(Error("protocol_violation", detail))


class BridgeServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, addr, env_factory: Callable[[str], EnvState], timeout_s: float = 30.0):
        self.env_factory = env_factory
        self.timeout_s = timeout_s
        super().__init__(addr, _Session)

    @property
    def address(self) -> tuple[str, int]:
        return self.server_address[:2]

    def start(self) -> "BridgeServer":
        """Serve on a daemon thread; returns self."""
        threading.Thread(target=self.serve_forever, daemon=True, name="bridge-server").start()
        return self

    def stop(self) -> None:
        self.shutdown()
        self.server_close()


def serve(env_factory: Callable[[str], EnvState], listen_addr: tuple[str, int] = ("127.0.0.1", DEFAULT_PORT),
          timeout_s: float = 30.0, background: bool = False) -> BridgeServer:
    """Host environments: ``env_factory(task_id)`` returns a fresh initial state.

    With ``background=True`` the server runs on a daemon thread and is
    returned at once; otherwise this call blocks until shut down.
    """
    server = BridgeServer(listen_addr, env_factory, timeout_s)
    if background:
        return server.start()
    try:
        server.serve_forever()
    finally:
        server.server_close()
    return server


# ---- client ----


class RemoteEnv:
    """Client with the same observe/execute surface as :class:`LocalEnv`.

    The protocol only carries observations and hashes, so the client keeps
    a shadow copy of the state: each executed script is replayed locally
    and the resulting hash must match the server's. Goal checks read the
    shadow through :meth:`final_state`.
    """

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._shadow: EnvState | None = None
        self._hash = ""
        self._screen = (0, 0)

    def _call(self, msg: WireMessage) -> WireMessage:
        send_message(self._sock, msg)
        try:
            reply = read_message(self._sock)
        except socket.timeout:
            raise TransportError("timed out waiting for the server") from None
        if isinstance(reply, Error):
            raise RemoteError(reply.code, reply.detail)
        return reply

    def hello(self) -> Hello:
        reply = self._call(Hello(PROTO_VERSION, (0, 0)))
        if not isinstance(reply, Hello):
            raise ProtocolViolation(f"expected Hello, got {type(reply).__name__}")
        return reply

    def reset(self, task_id: str, initial_state: EnvState | None = None) -> Observation:
        reply = self._expect(self._call(Reset(task_id)), ObservationMsg)
        obs = self._observation(reply)
        if initial_state is not None:
            self._shadow = initial_state.copy()
            if self._shadow.state_hash() != reply.state_hash:
                raise DesyncError("remote initial state differs from the local task spec")
        return obs

    def _expect(self, reply: WireMessage, cls):
        if not isinstance(reply, cls):
            raise ProtocolViolation(f"expected {cls.__name__}, got {type(reply).__name__}")
        return reply

    def _observation(self, msg: ObservationMsg) -> Observation:
        obs = Observation.from_dict({"metadata": msg.metadata, "raster": msg.raster})
        obs = Observation(obs.metadata, obs.raster, msg.state_hash)
        self._hash = msg.state_hash
        self._screen = (obs.raster.width * obs.raster.cell_px, obs.raster.height * obs.raster.cell_px)
        return obs

    @property
    def screen(self) -> tuple[int, int]:
        return self._screen

    def observe(self) -> Observation:
        return self._observation(self._expect(self._call(Observe()), ObservationMsg))

    def execute(self, script) -> ExecReport:
        if isinstance(script, str):
            script = dsl.parse(script)
        reply = self._expect(self._call(Execute(dsl.render(script))), ExecResultMsg)
        report = ExecReport.from_dict(reply.report)
        self._hash = reply.state_hash
        if self._shadow is not None:
            self._shadow, local = execute(self._shadow, script)
            if local.state_hash != reply.state_hash:
                raise DesyncError("remote state hash differs from the local replay")
        return report

    def state_hash(self) -> str:
        return self._hash

    def final_state(self) -> EnvState:
        if self._shadow is None:
            raise BridgeError("no local shadow state; pass initial_state to reset()")
        return self._shadow

    def close(self) -> None:
        try:
            send_message(self._sock, Shutdown())
            read_message(self._sock)
        except (BridgeError, OSError):
            pass
        finally:
            self._sock.close()

    def __enter__(self) -> "RemoteEnv":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def connect(addr: tuple[str, int], timeout_s: float = 30.0) -> RemoteEnv:
    try:
        sock = socket.create_connection(addr, timeout=timeout_s)
    except OSError as exc:
        raise TransportError(f"cannot connect to {addr[0]}:{addr[1]}: {exc}") from None
    env = RemoteEnv(sock)
    try:
        env.hello()
    except BaseException:
        sock.close()
        raise
    return env


def observation_bytes(obs: Observation) -> bytes:
    """Canonical bytes of an observation, for byte-wise comparison."""
    return encode(observation_msg(obs, obs.state_hash))
