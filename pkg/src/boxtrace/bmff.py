"""Stream parser for the box (atom) structure of ISO base media files.

Only box headers and the payloads of schema-registered boxes are read;
opaque payloads (mdat included) are skipped by seeking, so parsing a
multi-gigabyte file costs time proportional to its box count, not its
size. Parsing is strict about sizes and lenient about content: unknown
boxes become opaque nodes, never failures.
"""

from __future__ import annotations

import json
import struct
import uuid as _uuidlib
from dataclasses import dataclass, field
from decimal import Decimal
from typing import BinaryIO, Callable

from .errors import (
    BoxDecodeError,
    NotBmff,
    PayloadTooShort,
    TruncatedBox,
    UnsupportedVersion,
    ZeroSizeNonFinal,
)

# Boxes recursed into as pure containers.
CONTAINER_TYPES = frozenset({
    "moov", "trak", "mdia", "minf", "stbl", "udta", "edts", "dinf",
    "mvex", "moof", "traf",
})

# Types accepted as the first box of a file; anything else means NotBmff.
TOP_LEVEL_TYPES = frozenset({
    "ftyp", "styp", "moov", "moof", "mdat", "free", "skip", "wide",
    "uuid", "pnot", "meta", "mfra", "sidx", "ssix", "prft", "emsg",
})

# Known-box payloads are read at most this far; opaque payloads not at all.
_PAYLOAD_READ_CAP = 64 * 1024

_MAX_STSD_ENTRIES = 32
_MAX_ELST_ENTRIES = 16


@dataclass(frozen=True)
class BoxHeader:
    """Decoded box header; `effective_len` covers header plus payload."""

    offset: int
    size: int
    type_code: str
    header_len: int
    effective_len: int
    large_size: int | None = None
    user_type: str | None = None

    @property
    def payload_offset(self) -> int:
        return self.offset + self.header_len

    @property
    def payload_len(self) -> int:
        return self.effective_len - self.header_len


@dataclass
class AtomNode:
    """One box in the container tree; leaf boxes carry decoded fields."""

    name: str
    header: BoxHeader | None
    fields: list[tuple[str, str]] = field(default_factory=list)
    children: list["AtomNode"] = field(default_factory=list)


@dataclass
class ContainerTree:
    """Full box tree of one file under a synthetic `root` node."""

    root: AtomNode
    source_id: str
    warnings: list[str] = field(default_factory=list)


def render_type_code(raw: bytes) -> str:
    """Render a 4-byte type code; non-printable bytes become ``\\xNN``.

    ``/``, ``@`` and ``\\`` are hex-escaped as well so that node names can
    never collide with the symbol path syntax.
    """
    out = []
    for b in raw:
        if 0x20 <= b <= 0x7E and b not in (0x2F, 0x40, 0x5C):
            out.append(chr(b))
        else:
            out.append(f"\\x{b:02x}")
    return "".join(out)


def ascii_or_hex(raw: bytes) -> str:
    """Canonical string for a byte value: printable ASCII or 0x-hex."""
    if all(0x20 <= b <= 0x7E for b in raw):
        return raw.decode("ascii")
    return "0x" + raw.hex()


def _fixed_point(raw: int, frac_bits: int) -> str:
    """Fixed-point value as a decimal string with trailing zeros trimmed."""
    value = Decimal(raw) / Decimal(1 << frac_bits)
    return format(value.normalize(), "f")


def _u16(b: bytes, o: int) -> int:
    return struct.unpack_from(">H", b, o)[0]


def _u32(b: bytes, o: int) -> int:
    return struct.unpack_from(">I", b, o)[0]


def _u64(b: bytes, o: int) -> int:
    return struct.unpack_from(">Q", b, o)[0]


def _i16(b: bytes, o: int) -> int:
    return struct.unpack_from(">h", b, o)[0]


def _i32(b: bytes, o: int) -> int:
    return struct.unpack_from(">i", b, o)[0]


def _i64(b: bytes, o: int) -> int:
    return struct.unpack_from(">q", b, o)[0]


def _need(payload: bytes, n: int, what: str) -> None:
    if len(payload) < n:
        raise PayloadTooShort(f"{what} needs {n} bytes, payload holds {len(payload)}")


def _fullbox(payload: bytes, what: str) -> tuple[list[tuple[str, str]], bytes]:
    _need(payload, 4, what)
    version = payload[0]
    flags = int.from_bytes(payload[1:4], "big")
    return [("version", str(version)), ("flags", str(flags))], payload[4:]


def _matrix(body: bytes, o: int) -> str:
    # 3x3 transform: u, v, w entries (indices 2, 5, 8) are 2.30 fixed,
    # the rest 16.16.
    parts = []
    for i in range(9):
        raw = _i32(body, o + 4 * i)
        parts.append(_fixed_point(raw, 30 if i % 3 == 2 else 16))
    return ",".join(parts)


def _language(code: int) -> str:
    chars = [((code >> s) & 0x1F) + 0x60 for s in (10, 5, 0)]
    if all(0x61 <= c <= 0x7A for c in chars):
        return "".join(chr(c) for c in chars)
    return str(code)


def _decode_ftyp(payload: bytes) -> list[tuple[str, str]]:
    _need(payload, 8, "ftyp")
    fields = [
        ("majorBrand", ascii_or_hex(payload[0:4])),
        ("minorVersion", str(_u32(payload, 4))),
    ]
    pos, n = 8, 1
    while pos + 4 <= len(payload):
        fields.append((f"compatibleBrand_{n}", ascii_or_hex(payload[pos:pos + 4])))
        pos += 4
        n += 1
    return fields


def _decode_mvhd(payload: bytes) -> list[tuple[str, str]]:
    fields, body = _fullbox(payload, "mvhd")
    version = int(fields[0][1])
    if version == 0:
        _need(body, 96, "mvhd v0")
        times = [_u32(body, 0), _u32(body, 4)]
        timescale, duration = _u32(body, 8), _u32(body, 12)
        o = 16
    elif version == 1:
        _need(body, 108, "mvhd v1")
        times = [_u64(body, 0), _u64(body, 8)]
        timescale, duration = _u32(body, 16), _u64(body, 20)
        o = 28
    else:
        raise UnsupportedVersion(f"mvhd version {version}")
    fields += [
        ("creationTime", str(times[0])),
        ("modificationTime", str(times[1])),
        ("timescale", str(timescale)),
        ("duration", str(duration)),
        ("rate", _fixed_point(_i32(body, o), 16)),
        ("volume", _fixed_point(_i16(body, o + 4), 8)),
        ("matrix", _matrix(body, o + 16)),
        ("nextTrackId", str(_u32(body, o + 76))),
    ]
    return fields


def _decode_tkhd(payload: bytes) -> list[tuple[str, str]]:
    fields, body = _fullbox(payload, "tkhd")
    version = int(fields[0][1])
    if version == 0:
        _need(body, 80, "tkhd v0")
        times = [_u32(body, 0), _u32(body, 4)]
        track_id = _u32(body, 8)
        duration = _u32(body, 16)
        o = 28
    elif version == 1:
        _need(body, 92, "tkhd v1")
        times = [_u64(body, 0), _u64(body, 8)]
        track_id = _u32(body, 16)
        duration = _u64(body, 24)
        o = 40
    else:
        raise UnsupportedVersion(f"tkhd version {version}")
    fields += [
        ("creationTime", str(times[0])),
        ("modificationTime", str(times[1])),
        ("trackId", str(track_id)),
        ("duration", str(duration)),
        ("layer", str(_i16(body, o))),
        ("alternateGroup", str(_i16(body, o + 2))),
        ("volume", _fixed_point(_i16(body, o + 4), 8)),
        ("matrix", _matrix(body, o + 8)),
        ("width", _fixed_point(_i32(body, o + 44), 16)),
        ("height", _fixed_point(_i32(body, o + 48), 16)),
    ]
    return fields


def _decode_mdhd(payload: bytes) -> list[tuple[str, str]]:
    fields, body = _fullbox(payload, "mdhd")
    version = int(fields[0][1])
    if version == 0:
        _need(body, 20, "mdhd v0")
        times = [_u32(body, 0), _u32(body, 4)]
        timescale, duration = _u32(body, 8), _u32(body, 12)
        o = 16
    elif version == 1:
        _need(body, 32, "mdhd v1")
        times = [_u64(body, 0), _u64(body, 8)]
        timescale, duration = _u32(body, 16), _u64(body, 20)
        o = 28
    else:
        raise UnsupportedVersion(f"mdhd version {version}")
    fields += [
        ("creationTime", str(times[0])),
        ("modificationTime", str(times[1])),
        ("timescale", str(timescale)),
        ("duration", str(duration)),
        ("language", _language(_u16(body, o))),
    ]
    return fields


def _decode_hdlr(payload: bytes) -> list[tuple[str, str]]:
    fields, body = _fullbox(payload, "hdlr")
    _need(body, 20, "hdlr")
    name = body[20:].rstrip(b"\x00")
    fields += [
        ("handlerType", ascii_or_hex(body[4:8])),
        ("name", ascii_or_hex(name)),
    ]
    return fields


def _decode_vmhd(payload: bytes) -> list[tuple[str, str]]:
    fields, body = _fullbox(payload, "vmhd")
    _need(body, 8, "vmhd")
    opcolor = ",".join(str(_u16(body, 2 + 2 * i)) for i in range(3))
    fields += [("graphicsMode", str(_u16(body, 0))), ("opColor", opcolor)]
    return fields


def _decode_smhd(payload: bytes) -> list[tuple[str, str]]:
    fields, body = _fullbox(payload, "smhd")
    _need(body, 4, "smhd")
    fields.append(("balance", _fixed_point(_i16(body, 0), 8)))
    return fields


def _decode_entry_count(name: str) -> Callable[[bytes], list[tuple[str, str]]]:
    def decode(payload: bytes) -> list[tuple[str, str]]:
        fields, body = _fullbox(payload, name)
        _need(body, 4, name)
        fields.append(("entryCount", str(_u32(body, 0))))
        return fields

    return decode


def _decode_stsz(payload: bytes) -> list[tuple[str, str]]:
    fields, body = _fullbox(payload, "stsz")
    _need(body, 8, "stsz")
    fields += [
        ("sampleSize", str(_u32(body, 0))),
        ("sampleCount", str(_u32(body, 4))),
    ]
    return fields


def _decode_stsd(payload: bytes) -> list[tuple[str, str]]:
    # Sample entry format codes only; codec-private data stays unparsed.
    fields, body = _fullbox(payload, "stsd")
    _need(body, 4, "stsd")
    entry_count = _u32(body, 0)
    fields.append(("entryCount", str(entry_count)))
    pos, n = 4, 1
    while pos + 8 <= len(body) and n <= min(entry_count, _MAX_STSD_ENTRIES):
        entry_size = _u32(body, pos)
        fields.append((f"format_{n}", ascii_or_hex(body[pos + 4:pos + 8])))
        if entry_size < 8 or pos + entry_size > len(body):
            break
        pos += entry_size
        n += 1
    return fields


def _decode_elst(payload: bytes) -> list[tuple[str, str]]:
    fields, body = _fullbox(payload, "elst")
    version = int(fields[0][1])
    if version not in (0, 1):
        raise UnsupportedVersion(f"elst version {version}")
    _need(body, 4, "elst")
    entry_count = _u32(body, 0)
    fields.append(("entryCount", str(entry_count)))
    entry_size = 20 if version == 1 else 12
    pos = 4
    for _ in range(min(entry_count, _MAX_ELST_ENTRIES)):
        if pos + entry_size > len(body):
            break
        if version == 1:
            duration, media_time = _u64(body, pos), _i64(body, pos + 8)
            rate_off = pos + 16
        else:
            duration, media_time = _u32(body, pos), _i32(body, pos + 4)
            rate_off = pos + 8
        rate = (_i16(body, rate_off) << 16) + _u16(body, rate_off + 2)
        fields += [
            ("segmentDuration", str(duration)),
            ("mediaTime", str(media_time)),
            ("mediaRate", _fixed_point(rate, 16)),
        ]
        pos += entry_size
    return fields


_DECODERS: dict[str, Callable[[bytes], list[tuple[str, str]]]] = {
    "ftyp": _decode_ftyp,
    "styp": _decode_ftyp,
    "mvhd": _decode_mvhd,
    "tkhd": _decode_tkhd,
    "mdhd": _decode_mdhd,
    "hdlr": _decode_hdlr,
    "vmhd": _decode_vmhd,
    "smhd": _decode_smhd,
    "dref": _decode_entry_count("dref"),
    "stts": _decode_entry_count("stts"),
    "stsc": _decode_entry_count("stsc"),
    "stco": _decode_entry_count("stco"),
    "co64": _decode_entry_count("co64"),
    "stsz": _decode_stsz,
    "stsd": _decode_stsd,
    "elst": _decode_elst,
}


def has_schema(type_code: str) -> bool:
    return type_code in _DECODERS or type_code == "uuid"


def decode_known_box(header: BoxHeader, payload: bytes) -> list[tuple[str, str]]:
    """Field-decode a schema-registered box payload.

    Raises BoxDecodeError subclasses when the payload defeats the schema;
    the caller downgrades such boxes to opaque form.
    """
    if header.type_code == "uuid":
        if header.user_type is None:
            raise PayloadTooShort("uuid box without user type")
        return [("userType", header.user_type)]
    decoder = _DECODERS.get(header.type_code)
    if decoder is None:
        raise BoxDecodeError(f"no schema registered for '{header.type_code}'")
    return decoder(payload)


def _opaque_fields(payload_len: int) -> list[tuple[str, str]]:
    return [("stuff", "opaque"), ("count", str(payload_len))]


def _read_at(stream: BinaryIO, offset: int, n: int) -> bytes:
    stream.seek(offset)
    return stream.read(n)


def _read_header(
    stream: BinaryIO, offset: int, scope_end: int, top_level: bool, first: bool
) -> BoxHeader:
    head = _read_at(stream, offset, 8)
    if len(head) < 8:
        if first:
            raise NotBmff("no first box exists" if not head else
                          f"only {len(head)} bytes at offset 0, no box header fits")
        raise TruncatedBox(offset, render_type_code(head.ljust(4, b"\x00")[:4]),
                           "trailing bytes cannot hold a box header")
    size = _u32(head, 0)
    raw_type = head[4:8]
    type_code = render_type_code(raw_type)
    if first and type_code not in TOP_LEVEL_TYPES:
        raise NotBmff(f"first box type '{type_code}' is not a recognized top-level box")
    header_len = 8
    large_size = None
    if size == 1:
        ext = _read_at(stream, offset + header_len, 8)
        if len(ext) < 8:
            raise TruncatedBox(offset, type_code, "64-bit size field truncated")
        large_size = _u64(ext, 0)
        header_len += 8
    user_type = None
    if raw_type == b"uuid":
        raw_uuid = _read_at(stream, offset + header_len, 16)
        if len(raw_uuid) < 16:
            raise TruncatedBox(offset, type_code, "uuid user type truncated")
        user_type = str(_uuidlib.UUID(bytes=raw_uuid))
        header_len += 16
    if size == 0:
        if not top_level:
            raise ZeroSizeNonFinal(offset, type_code)
        effective_len = scope_end - offset
    elif size == 1:
        effective_len = large_size  # type: ignore[assignment]
    else:
        effective_len = size
    if effective_len < header_len:
        raise TruncatedBox(offset, type_code,
                           f"declared length {effective_len} smaller than its "
                           f"{header_len}-byte header")
    if offset + effective_len > scope_end:
        raise TruncatedBox(offset, type_code,
                           f"declared length {effective_len} exceeds the "
                           f"{scope_end - offset} bytes remaining")
    return BoxHeader(offset=offset, size=size, type_code=type_code,
                     header_len=header_len, effective_len=effective_len,
                     large_size=large_size, user_type=user_type)


def _parse_boxes(
    stream: BinaryIO,
    start: int,
    end: int,
    top_level: bool,
    warnings: list[str],
) -> list[AtomNode]:
    nodes: list[AtomNode] = []
    pos = start
    while pos < end:
        if end - pos < 8:
            tail = _read_at(stream, pos, end - pos)
            if not top_level and not any(tail):
                # QuickTime-style zero terminator padding inside a container.
                warnings.append(
                    f"{end - pos} zero bytes of padding at offset {pos} ignored")
                break
            raise TruncatedBox(pos, render_type_code(tail.ljust(4, b"\x00")[:4]),
                               "trailing bytes cannot hold a box header")
        header = _read_header(stream, pos, end, top_level,
                              first=top_level and not nodes)
        if header.type_code in CONTAINER_TYPES:
            children = _parse_boxes(stream, header.payload_offset,
                                    header.payload_offset + header.payload_len,
                                    top_level=False, warnings=warnings)
            nodes.append(AtomNode(header.type_code, header, [], children))
        elif has_schema(header.type_code):
            payload = b""
            if header.type_code != "uuid":
                payload = _read_at(stream, header.payload_offset,
                                   min(header.payload_len, _PAYLOAD_READ_CAP))
            try:
                fields = decode_known_box(header, payload)
            except BoxDecodeError as exc:
                warnings.append(
                    f"box '{header.type_code}' at offset {header.offset}: "
                    f"{exc}; treated as opaque")
                fields = _opaque_fields(header.payload_len)
            nodes.append(AtomNode(header.type_code, header, fields, []))
        else:
            nodes.append(AtomNode(header.type_code, header,
                                  _opaque_fields(header.payload_len), []))
        pos = header.offset + header.effective_len
    return nodes


def parse_container(byte_source: BinaryIO, source_id: str = "") -> ContainerTree:
    """Parse the full top-level box sequence of a seekable byte stream."""
    byte_source.seek(0, 2)
    file_len = byte_source.tell()
    if file_len == 0:
        raise NotBmff("empty file")
    warnings: list[str] = []
    children = _parse_boxes(byte_source, 0, file_len, top_level=True,
                            warnings=warnings)
    root = AtomNode("root", None, [], children)
    return ContainerTree(root=root, source_id=source_id, warnings=warnings)


def parse_file(path: str) -> ContainerTree:
    """Open `path` and parse its container structure."""
    with open(path, "rb") as handle:
        return parse_container(handle, source_id=str(path))


def _node_to_obj(node: AtomNode) -> dict:
    obj: dict = {"name": node.name}
    if node.header is not None:
        obj["offset"] = node.header.offset
        obj["length"] = node.header.effective_len
    obj["fields"] = [[name, value] for name, value in node.fields]
    obj["children"] = [_node_to_obj(child) for child in node.children]
    return obj


def dump_tree(tree: ContainerTree, format: str = "text") -> str:
    """Render a parsed tree deterministically as indented text or JSON."""
    if format == "json":
        payload = [_node_to_obj(child) for child in tree.root.children]
        return json.dumps(payload, indent=2) + "\n"
    if format != "text":
        raise ValueError(f"unknown dump format: {format!r}")
    lines: list[str] = []

    def walk(node: AtomNode, depth: int) -> None:
        lines.append("  " * depth + node.name)
        for name, value in node.fields:
            lines.append("  " * (depth + 1) + f"@{name}: {value}")
        for child in node.children:
            walk(child, depth + 1)

    for child in tree.root.children:
        walk(child, 0)
    return "\n".join(lines) + "\n"
