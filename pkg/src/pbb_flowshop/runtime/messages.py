"""Protocol messages and their wire frames.

Frame layout::

    [kind: 1][src: 2][dst: 2][length: 2][payload: length bytes][checksum: 1]

Payload integers are unsigned little-endian of a fixed width. A batch
reallocation carries ``[count][id_0]...[id_{count-1}]``.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

HEADER_BYTES = 8
_HEAD = struct.Struct("<BHHH")


class ProtocolError(RuntimeError):
    """An actor received something the protocol does not allow."""


class Kind(enum.IntEnum):
    ASK_FOR_TASKS = 1
    TASK_GRANT = 2
    UPDATE_SOLUTION_REQUEST = 3
    BEST_SOLUTION = 4
    LOAD_REPORT = 5
    REALLOCATE_SINGLE = 6
    REALLOCATE_BATCH = 7
    TERMINATE = 8
    NO_TASKS = 9


@dataclass(frozen=True)
class Message:
    kind: Kind
    src: int
    dst: int
    payload: tuple[int, ...] = ()

    @classmethod
    def batch(cls, src: int, dst: int, ids) -> "Message":
        ids = tuple(ids)
        return cls(Kind.REALLOCATE_BATCH, src, dst, (len(ids),) + ids)

    @property
    def ids(self) -> tuple[int, ...]:
        """Particle ids carried by a grant or reallocation."""
        if self.kind is Kind.REALLOCATE_BATCH:
            count = self.payload[0]
            if len(self.payload) != count + 1:
                raise ProtocolError(f"batch tag says {count} ids, frame holds {len(self.payload) - 1}")
            return self.payload[1:]
        if self.kind in (Kind.TASK_GRANT, Kind.REALLOCATE_SINGLE):
            if len(self.payload) != 1:
                raise ProtocolError(f"{self.kind.name} must carry exactly one id")
            return self.payload
        return ()


def id_width(n: int) -> int:
    """Bytes per integer: 8 while every id fits 64 bits (n <= 20), else 16."""
    return 8 if n <= 20 else 16


def transfer_cost(msg: Message, width: int = 8, header: int = HEADER_BYTES) -> int:
    return header + width * len(msg.payload)


def max_batch(width: int) -> int:
    return (0xFFFF // width) - 1


def encode_frame(msg: Message, width: int = 8) -> bytes:
    body = b"".join(v.to_bytes(width, "little") for v in msg.payload)
    if len(body) > 0xFFFF:
        raise ProtocolError(f"payload of {len(body)} bytes does not fit one frame")
    head = _HEAD.pack(int(msg.kind), msg.src, msg.dst, len(body))
    return head + body + bytes([sum(head + body) & 0xFF])


def decode_frame(frame: bytes, width: int = 8) -> Message:
    if len(frame) < HEADER_BYTES:
        raise ProtocolError("truncated frame")
    kind, src, dst, length = _HEAD.unpack_from(frame)
    if len(frame) != _HEAD.size + length + 1:
        raise ProtocolError(f"frame length {len(frame)} disagrees with header ({length} payload bytes)")
    if sum(frame[:-1]) & 0xFF != frame[-1]:
        raise ProtocolError("checksum mismatch")
    if length % width:
        raise ProtocolError(f"payload of {length} bytes is not a multiple of {width}")
    body = frame[_HEAD.size:-1]
    payload = tuple(int.from_bytes(body[i:i + width], "little") for i in range(0, length, width))
    return Message(Kind(kind), src, dst, payload)
