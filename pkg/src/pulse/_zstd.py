"""Minimal ctypes binding over the system libzstd.

Covers exactly what archive ingestion needs: streaming decompression of
dump files (window log raised to 31 because public forum dumps are built
with long-distance matching) and one-shot compression for producing test
fixtures. No third-party wheel required.
"""

from __future__ import annotations

import ctypes
import ctypes.util
from typing import BinaryIO, Iterator

from .errors import UnreadableStream

_ZSTD_d_windowLogMax = 100  # ZSTD_dParameter enum value


class _InBuffer(ctypes.Structure):
    _fields_ = [
        ("src", ctypes.c_void_p),
        ("size", ctypes.c_size_t),
        ("pos", ctypes.c_size_t),
    ]


class _OutBuffer(ctypes.Structure):
    _fields_ = [
        ("dst", ctypes.c_void_p),
        ("size", ctypes.c_size_t),
        ("pos", ctypes.c_size_t),
    ]


_lib = None


def _load():
    global _lib
    if _lib is not None:
        return _lib
    name = ctypes.util.find_library("zstd")
    if name is None:
        raise UnreadableStream("libzstd shared library not found on this system")
    lib = ctypes.CDLL(name)

    lib.ZSTD_createDCtx.restype = ctypes.c_void_p
    lib.ZSTD_freeDCtx.argtypes = [ctypes.c_void_p]
    lib.ZSTD_DCtx_setParameter.argtypes = [ctypes.c_void_p, ctypes.c_int, ctypes.c_int]
    lib.ZSTD_DCtx_setParameter.restype = ctypes.c_size_t
    lib.ZSTD_decompressStream.argtypes = [
        ctypes.c_void_p,
        ctypes.POINTER(_OutBuffer),
        ctypes.POINTER(_InBuffer),
    ]
    lib.ZSTD_decompressStream.restype = ctypes.c_size_t
    lib.ZSTD_DStreamInSize.restype = ctypes.c_size_t
    lib.ZSTD_DStreamOutSize.restype = ctypes.c_size_t
    lib.ZSTD_isError.argtypes = [ctypes.c_size_t]
    lib.ZSTD_isError.restype = ctypes.c_uint
    lib.ZSTD_getErrorName.argtypes = [ctypes.c_size_t]
    lib.ZSTD_getErrorName.restype = ctypes.c_char_p
    lib.ZSTD_compressBound.argtypes = [ctypes.c_size_t]
    lib.ZSTD_compressBound.restype = ctypes.c_size_t
    lib.ZSTD_compress.argtypes = [
        ctypes.c_void_p,
        ctypes.c_size_t,
        ctypes.c_char_p,
        ctypes.c_size_t,
        ctypes.c_int,
    ]
    lib.ZSTD_compress.restype = ctypes.c_size_t

    _lib = lib
    return lib


def _error_name(lib, code: int) -> str:
    name = lib.ZSTD_getErrorName(code)
    return name.decode("ascii", "replace") if name else "unknown zstd error"


def iter_decompressed(stream: BinaryIO) -> Iterator[bytes]:
    """Yield decompressed byte chunks from a zstd-compressed binary stream."""
    lib = _load()
    dctx = lib.ZSTD_createDCtx()
    if not dctx:
        raise UnreadableStream("could not allocate zstd decompression context")
    lib.ZSTD_DCtx_setParameter(dctx, _ZSTD_d_windowLogMax, 31)
    in_size = lib.ZSTD_DStreamInSize()
    out_size = lib.ZSTD_DStreamOutSize()
    out_raw = ctypes.create_string_buffer(out_size)
    last_hint = 0
    try:
        while True:
            chunk = stream.read(in_size)
            if not chunk:
                break
            src = ctypes.create_string_buffer(chunk, len(chunk))
            inb = _InBuffer(ctypes.cast(src, ctypes.c_void_p), len(chunk), 0)
            while True:
                outb = _OutBuffer(ctypes.cast(out_raw, ctypes.c_void_p), out_size, 0)
                ret = lib.ZSTD_decompressStream(
                    dctx, ctypes.byref(outb), ctypes.byref(inb)
                )
                if lib.ZSTD_isError(ret):
                    raise UnreadableStream(
                        f"zstd decompression failed: {_error_name(lib, ret)}"
                    )
                last_hint = ret
                if outb.pos:
                    yield out_raw.raw[: outb.pos]
                # done with this chunk once all input is consumed and the
                # decompressor did not fill the whole output buffer
                if inb.pos >= inb.size and outb.pos < outb.size:
                    break
        if last_hint != 0:
            raise UnreadableStream("zstd stream ended mid-frame (truncated input)")
    finally:
        lib.ZSTD_freeDCtx(dctx)


def compress(data: bytes, level: int = 3) -> bytes:
    """One-shot compression, used to build .zst fixtures."""
    lib = _load()
    bound = lib.ZSTD_compressBound(len(data))
    dst = ctypes.create_string_buffer(bound)
    ret = lib.ZSTD_compress(dst, bound, data, len(data), level)
    if lib.ZSTD_isError(ret):
        raise UnreadableStream(f"zstd compression failed: {_error_name(lib, ret)}")
    return dst.raw[:ret]
