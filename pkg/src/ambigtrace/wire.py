"""Framed binary protocol between clients and the server.

A frame is ``type(1) | length(4, big-endian) | payload``.  Payloads:

    REGISTER  user_id(8) | pk
    OK        empty, or accepted-count(4) in reply to REPORT
    ERR       reason(1)
    REPORT    count(4) | count * (x | y)
    FETCH     user_id(8) | day(4)      day 0xFFFFFFFF = latest closed day
    BATCH     day(4) | count(4) | count * (z | w)

One request and one reply per connection.
"""

from __future__ import annotations

import enum
import logging
import os
import socket
import socketserver
import struct
import threading
from typing import NamedTuple

from .group import BadLength, DecodeError, NotMember
from .protocol import BroadcastToken, RerandToken, decode_pair, encode_pair
from .server import ReportTooLarge, Server, ServerError

log = logging.getLogger(__name__)

HEADER = struct.Struct(">BI")
LATEST_DAY = 0xFFFFFFFF
DEFAULT_ADDR = "127.0.0.1:7464"
ADDR_ENV = "AMBIGTRACE_ADDR"


class MsgType(enum.IntEnum):
    REGISTER = 0x01
    OK = 0x02
    ERR = 0x03
    REPORT = 0x04
    FETCH = 0x05
    BATCH = 0x06


class Reason(enum.IntEnum):
    BAD_LENGTH = 0x01
    NON_MEMBER = 0x02
    DUPLICATE_USER = 0x03
    TOO_LARGE = 0x04
    UNKNOWN_USER = 0x05
    UNKNOWN_DAY = 0x06
    BAD_REQUEST = 0x07


class FrameError(DecodeError):
    pass


class RemoteError(Exception):
    def __init__(self, reason: int):
        self.reason = reason
        try:
            name = Reason(reason).name.lower()
        except ValueError:
            name = f"reason 0x{reason:02x}"
        super().__init__(f"server replied ERR: {name}")


class WireMessage(NamedTuple):
    type: MsgType
    payload: bytes = b""


def frame(msg: WireMessage) -> bytes:
    if len(msg.payload) > 0xFFFFFFFF:
        raise ValueError("payload too long to frame")
    return HEADER.pack(int(msg.type), len(msg.payload)) + msg.payload


def deframe(data: bytes) -> WireMessage:
    if len(data) < HEADER.size:
        raise FrameError("truncated frame header")
    t, n = HEADER.unpack_from(data)
    try:
        t = MsgType(t)
    except ValueError:
        raise FrameError(f"unknown message type 0x{t:02x}") from None
    if len(data) - HEADER.size != n:
        raise FrameError(f"length field says {n} bytes, frame carries {len(data) - HEADER.size}")
    return WireMessage(t, bytes(data[HEADER.size:]))


def read_frame(f) -> WireMessage:
    """Read exactly one frame from a binary file-like object."""
    head = f.read(HEADER.size)
    if len(head) < HEADER.size:
        raise FrameError("connection closed before a full header arrived")
    _, n = HEADER.unpack(head)
    body = f.read(n)
    if len(body) < n:
        raise FrameError("connection closed mid-payload")
    return deframe(head + body)


# -- payload codecs ---------------------------------------------------------

def register_msg(group, user_id: int, pk: int) -> WireMessage:
    return WireMessage(MsgType.REGISTER, user_id.to_bytes(8, "big") + group.encode(pk))


def parse_register(group, payload: bytes) -> tuple[int, int]:
    if len(payload) != 8 + group.encoding_width:
        raise BadLength("REGISTER payload has wrong length")
    return int.from_bytes(payload[:8], "big"), group.decode(payload[8:])


def _pairs_payload(group, tokens) -> bytes:
    return struct.pack(">I", len(tokens)) + b"".join(encode_pair(group, t) for t in tokens)


def _parse_pairs(group, payload: bytes, cls, cap=None):
    if len(payload) < 4:
        raise BadLength("missing token count")
    (count,) = struct.unpack_from(">I", payload)
    if cap is not None and count > cap:
        raise ReportTooLarge(f"report of {count} tokens exceeds cap {cap}")
    w = 2 * group.encoding_width
    if len(payload) != 4 + count * w:
        raise BadLength(f"count {count} does not match payload length {len(payload)}")
    return [decode_pair(group, payload[4 + i * w:4 + (i + 1) * w], cls) for i in range(count)]


def report_msg(group, tokens) -> WireMessage:
    return WireMessage(MsgType.REPORT, _pairs_payload(group, list(tokens)))


def parse_report(group, payload: bytes, cap=None) -> list[BroadcastToken]:
    return _parse_pairs(group, payload, BroadcastToken, cap)


def fetch_msg(user_id: int, day: int | None = None) -> WireMessage:
    d = LATEST_DAY if day is None else day
    return WireMessage(MsgType.FETCH, user_id.to_bytes(8, "big") + d.to_bytes(4, "big"))


def parse_fetch(payload: bytes) -> tuple[int, int | None]:
    if len(payload) != 12:
        raise BadLength("FETCH payload must be 12 bytes")
    day = int.from_bytes(payload[8:], "big")
    return int.from_bytes(payload[:8], "big"), None if day == LATEST_DAY else day


def batch_msg(group, day: int, tokens) -> WireMessage:
    return WireMessage(MsgType.BATCH, day.to_bytes(4, "big") + _pairs_payload(group, list(tokens)))


def parse_batch(group, payload: bytes) -> tuple[int, list[RerandToken]]:
    if len(payload) < 4:
        raise BadLength("BATCH payload too short")
    return int.from_bytes(payload[:4], "big"), _parse_pairs(group, payload[4:], RerandToken)


def err_msg(reason: int) -> WireMessage:
    return WireMessage(MsgType.ERR, bytes([reason]))


# -- server side ------------------------------------------------------------

def handle(server: Server, msg: WireMessage) -> WireMessage:
    """Dispatch one request against the server state and build the reply."""
    g = server.group
    try:
        if msg.type is MsgType.REGISTER:
            uid, pk = parse_register(g, msg.payload)
            server.register(uid, pk)
            return WireMessage(MsgType.OK)
        if msg.type is MsgType.REPORT:
            tokens = parse_report(g, msg.payload, cap=server.report_cap)
            n = server.ingest_report(tokens)
            return WireMessage(MsgType.OK, struct.pack(">I", n))
        if msg.type is MsgType.FETCH:
            uid, day = parse_fetch(msg.payload)
            day, entries = server.fetch(uid, day)
            return batch_msg(g, day, entries)
    except BadLength:
        return err_msg(Reason.BAD_LENGTH)
    except NotMember:
        return err_msg(Reason.NON_MEMBER)
    except ServerError as e:
        return err_msg(e.reason)
    return err_msg(Reason.BAD_REQUEST)


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        try:
            req = read_frame(self.rfile)
        except FrameError as e:
            log.info("bad frame from %s: %s", self.client_address, e)
            reply = err_msg(Reason.BAD_REQUEST)
        else:
            reply = handle(self.server.state, req)
        self.wfile.write(frame(reply))


class TCPService(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, state: Server, host="127.0.0.1", port=0):
        self.state = state
        super().__init__((host, port), _Handler)

    @property
    def addr(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"

    def start(self) -> threading.Thread:
        t = threading.Thread(target=self.serve_forever, daemon=True)
        t.start()
        return t


# -- client side ------------------------------------------------------------

def resolve_addr(addr: str | None = None) -> tuple[str, int]:
    addr = addr or os.environ.get(ADDR_ENV) or DEFAULT_ADDR
    host, _, port = addr.rpartition(":")
    return host or "127.0.0.1", int(port)


def request(addr, msg: WireMessage, timeout: float = 10.0) -> WireMessage:
    host, port = resolve_addr(addr) if not isinstance(addr, tuple) else addr
    with socket.create_connection((host, port), timeout=timeout) as sock:
        sock.sendall(frame(msg))
        with sock.makefile("rb") as f:
            return read_frame(f)


def expect(reply: WireMessage, kind: MsgType) -> WireMessage:
    if reply.type is MsgType.ERR:
        raise RemoteError(reply.payload[0] if reply.payload else 0)
    if reply.type is not kind:
        raise FrameError(f"expected {kind.name}, got {reply.type.name}")
    return reply


def remote_register(addr, group, user_id, pk) -> None:
    expect(request(addr, register_msg(group, user_id, pk)), MsgType.OK)


def remote_report(addr, group, tokens) -> int:
    reply = expect(request(addr, report_msg(group, tokens)), MsgType.OK)
    return struct.unpack(">I", reply.payload)[0]


def remote_fetch(addr, group, user_id, day=None) -> tuple[int, list[RerandToken]]:
    reply = expect(request(addr, fetch_msg(user_id, day)), MsgType.BATCH)
    return parse_batch(group, reply.payload)
