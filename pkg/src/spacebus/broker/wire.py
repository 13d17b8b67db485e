"""Length-prefixed wire frames for the loopback listeners.

Frame layout, used by both the broker and registry listeners:

    u32be  frame length (byte count of everything below)
    bytes  topic, UTF-8 (no 0x00 allowed)
    0x00   separator
    u16be  header count
    per header:  u16be key length, key UTF-8, u16be value length, value UTF-8
    bytes  payload (remainder of the frame)
"""

from __future__ import annotations

import socket
import struct
from typing import BinaryIO, Optional

from ..errors import FrameCodecError

MAX_FRAME = 16 * 1024 * 1024


def encode_frame(topic: str, headers: Optional[dict[str, str]] = None, payload: bytes = b"") -> bytes:
    topic_b = topic.encode("utf-8")
    if b"\x00" in topic_b:
        raise FrameCodecError("topic may not contain NUL")
    headers = headers or {}
    if len(headers) > 0xFFFF:
        raise FrameCodecError("too many headers")
    parts = [topic_b, b"\x00", struct.pack(">H", len(headers))]
    for k, v in headers.items():
        kb = k.encode("utf-8")
        vb = v.encode("utf-8")
        if len(kb) > 0xFFFF or len(vb) > 0xFFFF:
            raise FrameCodecError(f"header {k!r} too long")
        parts.append(struct.pack(">H", len(kb)))
        parts.append(kb)
        parts.append(struct.pack(">H", len(vb)))
        parts.append(vb)
    parts.append(payload)
    body = b"".join(parts)
    if len(body) > MAX_FRAME:
        raise FrameCodecError(f"frame too large: {len(body)}")
    return struct.pack(">I", len(body)) + body


def decode_frame(body: bytes) -> tuple[str, dict[str, str], bytes]:
    """Decode a frame body (the bytes after the length prefix)."""
    nul = body.find(b"\x00")
    if nul < 0:
        raise FrameCodecError("missing topic separator")
    try:
        topic = body[:nul].decode("utf-8")
    except UnicodeDecodeError as e:
        raise FrameCodecError(f"topic not UTF-8: {e}") from e
    pos = nul + 1
    if pos + 2 > len(body):
        raise FrameCodecError("truncated header count")
    (count,) = struct.unpack_from(">H", body, pos)
    pos += 2
    headers: dict[str, str] = {}
    for _ in range(count):
        if pos + 2 > len(body):
            raise FrameCodecError("truncated header key length")
        (klen,) = struct.unpack_from(">H", body, pos)
        pos += 2
        if pos + klen > len(body):
            raise FrameCodecError("truncated header key")
        key = body[pos : pos + klen].decode("utf-8")
        pos += klen
        if pos + 2 > len(body):
            raise FrameCodecError("truncated header value length")
        (vlen,) = struct.unpack_from(">H", body, pos)
        pos += 2
        if pos + vlen > len(body):
            raise FrameCodecError("truncated header value")
        headers[key] = body[pos : pos + vlen].decode("utf-8")
        pos += vlen
    return topic, headers, body[pos:]


def read_frame(stream: BinaryIO | socket.SocketIO) -> Optional[tuple[str, dict[str, str], bytes]]:
    """Read one frame from a blocking stream; None on clean EOF."""
    head = _read_exact(stream, 4)
    if head is None:
        return None
    (length,) = struct.unpack(">I", head)
    if length > MAX_FRAME:
        raise FrameCodecError(f"frame too large: {length}")
    body = _read_exact(stream, length)
    if body is None:
        raise FrameCodecError("truncated frame body")
    return decode_frame(body)


def _read_exact(stream, n: int) -> Optional[bytes]:
    buf = b""
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            if not buf:
                return None  # clean EOF at a frame boundary
            raise FrameCodecError("connection closed mid-frame")
        buf += chunk
    return buf
