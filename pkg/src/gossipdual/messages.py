"""Canonical byte encoding of a gossip window.

Layout (all integers little-endian)::

    offset  size  field
    0       4     sender       uint32
    4       8     time         uint64
    12      2     window_len   uint16
    14      2     n_zones      uint16
    16      ...   payload      ceil(window_len * n_zones / 8) bytes

The payload packs estimates tau-major then zone-major, filling each byte from
its least significant bit and zero-padding the last byte.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from gossipdual.errors import DecodeError
from gossipdual.gossip import EstimateTable

HEADER = struct.Struct("<IQHH")


def payload_size(window_len: int, n_zones: int) -> int:
    return (window_len * n_zones + 7) // 8


@dataclass(frozen=True)
class GossipMessage:
    sender: int
    time: int
    window_len: int
    n_zones: int
    payload: bytes

    def to_bytes(self) -> bytes:
        return HEADER.pack(self.sender, self.time, self.window_len, self.n_zones) + self.payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "GossipMessage":
        if len(data) < HEADER.size:
            raise DecodeError(f"message shorter than the {HEADER.size}-byte header")
        sender, time, window_len, n_zones = HEADER.unpack_from(data)
        return cls(sender, time, window_len, n_zones, bytes(data[HEADER.size:]))


def pack_window(values: np.ndarray) -> bytes:
    bits = np.asarray(values, dtype=np.uint8)
    if bits.size and bits.max() > 1:
        raise ValueError("window values must be binary")
    return np.packbits(bits.reshape(-1), bitorder="little").tobytes()


def unpack_window(payload: bytes, window_len: int, n_zones: int) -> np.ndarray:
    expected = payload_size(window_len, n_zones)
    if len(payload) != expected:
        raise DecodeError(f"payload is {len(payload)} bytes, expected {expected} "
                          f"for {window_len}x{n_zones} estimates")
    count = window_len * n_zones
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8), bitorder="little")
    if bits[count:].any():
        raise DecodeError("non-zero padding bits")
    return bits[:count].reshape(window_len, n_zones)


def encode_window(sender: int, time: int, values: np.ndarray) -> GossipMessage:
    values = np.asarray(values, dtype=np.uint8)
    if values.ndim != 2:
        raise ValueError("window must be a 2-D (tau, zone) array")
    window_len, n_zones = values.shape
    return GossipMessage(sender, time, window_len, n_zones, pack_window(values))


def encode_message(table: EstimateTable) -> GossipMessage:
    return encode_window(table.agent_id, max(table.t, 0), table.values)


def decode_message(msg: GossipMessage | bytes) -> np.ndarray:
    """Window contents as a ``(window_len, n_zones)`` uint8 array."""
    if isinstance(msg, (bytes, bytearray, memoryview)):
        msg = GossipMessage.from_bytes(bytes(msg))
    return unpack_window(msg.payload, msg.window_len, msg.n_zones)
