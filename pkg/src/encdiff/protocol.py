"""Message framing and local transports for the user/server session.

Frame format, little-endian:

    magic "HEDM" | version u16 | kind u8 | payload_len u64 | payload

Both transports carry identical framed bytes: an in-process queue pair, or
a loopback stream socket.  Channels count the bytes they move so reports
can model bandwidth costs offline.
"""

from __future__ import annotations

import io
import json
import queue
import socket
import struct
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

MAGIC = b"HEDM"
VERSION = 1
_FRAME_HEADER = struct.Struct("<4sHBQ")


class ProtocolError(Exception):
    """Malformed frame, unexpected message, or lost peer."""


class MessageKind(IntEnum):
    COND_TENSOR = 1
    ACTIVATION = 2
    ENC_IMAGE = 3
    PLAIN_SCHEDULE_INFO = 4
    ACK = 5


@dataclass(frozen=True)
class Message:
    kind: MessageKind
    payload: bytes = b""


def frame(msg: Message) -> bytes:
    return _FRAME_HEADER.pack(MAGIC, VERSION, int(msg.kind), len(msg.payload)) + msg.payload


def parse_frame(blob: bytes) -> Message:
    if len(blob) < _FRAME_HEADER.size:
        raise ProtocolError("frame shorter than header")
    magic, version, kind, length = _FRAME_HEADER.unpack(blob[: _FRAME_HEADER.size])
    if magic != MAGIC:
        raise ProtocolError(f"bad frame magic {magic!r}")
    if version != VERSION:
        raise ProtocolError(f"unsupported protocol version {version}")
    if len(blob) != _FRAME_HEADER.size + length:
        raise ProtocolError(
            f"frame length {len(blob)} != header-declared {_FRAME_HEADER.size + length}"
        )
    try:
        kind = MessageKind(kind)
    except ValueError as exc:
        raise ProtocolError(f"unknown message kind {kind}") from exc
    return Message(kind=kind, payload=blob[_FRAME_HEADER.size :])


# ----------------------------------------------------------------- payloads


def pack_array(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.save(buf, np.ascontiguousarray(arr), allow_pickle=False)
    return buf.getvalue()


def unpack_array(data: bytes) -> np.ndarray:
    try:
        return np.load(io.BytesIO(data), allow_pickle=False)
    except ValueError as exc:
        raise ProtocolError(f"bad array payload: {exc}") from exc


def pack_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True).encode()


def unpack_json(data: bytes):
    try:
        return json.loads(data.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"bad json payload: {exc}") from exc


def pack_sections(*parts: bytes) -> bytes:
    out = [struct.pack("<I", len(parts))]
    for part in parts:
        out.append(struct.pack("<Q", len(part)))
        out.append(part)
    return b"".join(out)


def unpack_sections(data: bytes) -> list[bytes]:
    if len(data) < 4:
        raise ProtocolError("sectioned payload too short")
    (count,) = struct.unpack("<I", data[:4])
    pos = 4
    parts = []
    for _ in range(count):
        if len(data) < pos + 8:
            raise ProtocolError("truncated section length")
        (length,) = struct.unpack("<Q", data[pos : pos + 8])
        pos += 8
        if len(data) < pos + length:
            raise ProtocolError("truncated section body")
        parts.append(data[pos : pos + length])
        pos += length
    if pos != len(data):
        raise ProtocolError("trailing bytes after sections")
    return parts


# ----------------------------------------------------------------- channels

_CLOSE = object()


class QueueChannel:
    """One end of an in-process duplex pair; frames travel whole."""

    def __init__(self, inbox: queue.Queue, outbox: queue.Queue):
        self._inbox = inbox
        self._outbox = outbox
        self.bytes_sent = 0
        self.bytes_received = 0

    def send(self, msg: Message) -> None:
        blob = frame(msg)
        self.bytes_sent += len(blob)
        self._outbox.put(blob)

    def recv(self, timeout: float = 60.0) -> Message:
        try:
            blob = self._inbox.get(timeout=timeout)
        except queue.Empty as exc:
            raise ProtocolError("peer timed out") from exc
        if blob is _CLOSE:
            raise ProtocolError("peer disconnected")
        self.bytes_received += len(blob)
        return parse_frame(blob)

    def close(self) -> None:
        self._outbox.put(_CLOSE)


def queue_pair() -> tuple[QueueChannel, QueueChannel]:
    a, b = queue.Queue(), queue.Queue()
    return QueueChannel(a, b), QueueChannel(b, a)


class SocketChannel:
    """Framed messages over a connected stream socket."""

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._file = sock.makefile("rwb")
        self.bytes_sent = 0
        self.bytes_received = 0

    def send(self, msg: Message) -> None:
        blob = frame(msg)
        self.bytes_sent += len(blob)
        self._file.write(blob)
        self._file.flush()

    def _read_exact(self, count: int) -> bytes:
        data = self._file.read(count)
        if data is None or len(data) != count:
            raise ProtocolError("peer disconnected")
        return data

    def recv(self, timeout: float = 60.0) -> Message:
        self._sock.settimeout(timeout)
        header = self._read_exact(_FRAME_HEADER.size)
        magic, version, kind, length = _FRAME_HEADER.unpack(header)
        payload = self._read_exact(length) if length else b""
        self.bytes_received += len(header) + len(payload)
        return parse_frame(header + payload)

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()
