"""Codec-free frame sequence I/O, colorspace conversion and cropping.

Frames are float64 arrays shaped ``(H, W, C)`` with samples in ``[0, 1]``;
a sequence stacks them as ``(T, H, W, C)``. Supported on-disk formats are
PNG directories (``frame_000001.png`` ...) and YUV4MPEG2 streams.
"""
from __future__ import annotations

import dataclasses
import logging
import os
import re
import tempfile
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import cv2
import numpy as np

from evmforge.errors import (
    ChannelMismatch,
    DimensionMismatch,
    EmptyInput,
    IoFailure,
    MalformedFile,
    RoiOutOfBounds,
)

log = logging.getLogger(__name__)

COLORSPACES = ("RGB", "YIQ", "GRAY")
DEFAULT_FPS = 30.0

RGB_TO_YIQ = np.array(
    [
        [0.299, 0.587, 0.114],
        [0.5959, -0.2746, -0.3213],
        [0.2115, -0.5227, 0.3112],
    ]
)
YIQ_TO_RGB = np.linalg.inv(RGB_TO_YIQ)

_FRAME_NAME = re.compile(r"^frame_(\d+)\.(png|tif|tiff|bmp|ppm|pgm)$", re.IGNORECASE)


@dataclass(frozen=True)
class FrameSequence:
    frames: np.ndarray
    fps: float = DEFAULT_FPS
    colorspace: str = "RGB"

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim == 3:
            frames = frames[..., np.newaxis]
        if frames.ndim != 4:
            raise DimensionMismatch(f"expected (T, H, W, C) frames, got shape {frames.shape}")
        t, h, w, c = frames.shape
        if t < 1:
            raise EmptyInput("sequence has no frames")
        if h < 1 or w < 1:
            raise DimensionMismatch(f"degenerate frame size {w}x{h}")
        if c not in (1, 3):
            raise ChannelMismatch(f"frames must have 1 or 3 channels, got {c}")
        if self.colorspace not in COLORSPACES:
            raise ValueError(f"unknown colorspace {self.colorspace!r}")
        if (self.colorspace == "GRAY") != (c == 1):
            raise ChannelMismatch(f"{self.colorspace} sequence with {c} channels")
        if not (np.isfinite(self.fps) and self.fps > 0):
            raise ValueError(f"fps must be finite and positive, got {self.fps}")
        if not np.all(np.isfinite(frames)):
            raise ValueError("frames contain non-finite samples")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "fps", float(self.fps))

    def __len__(self):
        return self.frames.shape[0]

    @property
    def height(self):
        return self.frames.shape[1]

    @property
    def width(self):
        return self.frames.shape[2]

    @property
    def channels(self):
        return self.frames.shape[3]

    def replace(self, **changes) -> FrameSequence:
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class Roi:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1 or self.x < 0 or self.y < 0:
            raise RoiOutOfBounds(f"invalid roi {self}")

    def check(self, width, height):
        if self.x + self.w > width or self.y + self.h > height:
            raise RoiOutOfBounds(f"{self} exceeds frame {width}x{height}")

    def compose(self, inner: Roi) -> Roi:
        """ROI of ``inner`` (given relative to this ROI) in the parent frame."""
        if inner.x + inner.w > self.w or inner.y + inner.h > self.h:
            raise RoiOutOfBounds(f"{inner} exceeds enclosing {self}")
        return Roi(self.x + inner.x, self.y + inner.y, inner.w, inner.h)

    @classmethod
    def parse(cls, value) -> Roi:
        """Accept ``"x,y,w,h"``, a 4-sequence, or a mapping with x/y/w/h keys."""
        if isinstance(value, Roi):
            return value
        if isinstance(value, str):
            value = [int(v) for v in value.split(",")]
        if isinstance(value, dict):
            return cls(int(value["x"]), int(value["y"]), int(value["w"]), int(value["h"]))
        x, y, w, h = (int(v) for v in value)
        return cls(x, y, w, h)


# ---------------------------------------------------------------- colorspace

def rgb_to_yiq(f):
    f = np.asarray(f, dtype=np.float64)
    if f.shape[-1] != 3:
        raise ChannelMismatch(f"RGB->YIQ needs 3 channels, got {f.shape[-1]}")
    return f @ RGB_TO_YIQ.T


def yiq_to_rgb(f):
    f = np.asarray(f, dtype=np.float64)
    if f.shape[-1] != 3:
        raise ChannelMismatch(f"YIQ->RGB needs 3 channels, got {f.shape[-1]}")
    return f @ YIQ_TO_RGB.T


def luma(seq: FrameSequence) -> np.ndarray:
    """``(T, H, W)`` luma plane of any sequence."""
    if seq.colorspace == "RGB":
        return seq.frames @ RGB_TO_YIQ[0]
    return seq.frames[..., 0]


def to_yiq(seq: FrameSequence) -> FrameSequence:
    if seq.colorspace == "YIQ":
        return seq
    if seq.colorspace != "RGB":
        raise ChannelMismatch(f"cannot convert {seq.colorspace} to YIQ")
    return seq.replace(frames=rgb_to_yiq(seq.frames), colorspace="YIQ")


def to_rgb(seq: FrameSequence) -> FrameSequence:
    if seq.colorspace == "RGB":
        return seq
    if seq.colorspace != "YIQ":
        raise ChannelMismatch(f"cannot convert {seq.colorspace} to RGB")
    return seq.replace(frames=yiq_to_rgb(seq.frames), colorspace="RGB")


def crop(seq: FrameSequence, roi: Roi) -> FrameSequence:
    roi.check(seq.width, seq.height)
    frames = seq.frames[:, roi.y:roi.y + roi.h, roi.x:roi.x + roi.w, :]
    return seq.replace(frames=frames.copy())


# ---------------------------------------------------------------- loading

def load_frames(path, fps=None) -> FrameSequence:
    """Load a PNG (or other lossless raster) directory or a ``.y4m`` stream.

    ``fps`` overrides the Y4M header rate; PNG directories default to 30 fps.
    Grayscale inputs load as GRAY sequences, everything else as RGB.
    """
    path = Path(path)
    if path.is_dir():
        return _load_image_dir(path, DEFAULT_FPS if fps is None else fps)
    if not path.exists():
        raise EmptyInput(f"{path} does not exist")
    return _load_y4m(path, fps)


def _load_image_dir(path: Path, fps) -> FrameSequence:
    entries = []
    for p in path.iterdir():
        m = _FRAME_NAME.match(p.name)
        if m:
            entries.append((int(m.group(1)), p))
    if not entries:
        raise EmptyInput(f"no frame_NNNNNN images in {path}")
    entries.sort()
    frames = [_read_image(p) for _, p in entries]
    first = frames[0].shape
    for (_, p), f in zip(entries, frames):
        if f.shape != first:
            raise DimensionMismatch(f"{p.name} is {f.shape}, expected {first}")
    data = np.stack(frames)
    colorspace = "GRAY" if data.shape[-1] == 1 else "RGB"
    return FrameSequence(data, fps=fps, colorspace=colorspace)


def _read_image(p: Path) -> np.ndarray:
    raw = np.fromfile(str(p), dtype=np.uint8)
    img = cv2.imdecode(raw, cv2.IMREAD_UNCHANGED) if raw.size else None
    if img is None:
        raise MalformedFile(f"cannot decode {p}")
    if img.dtype == np.uint8:
        scale = 255.0
    elif img.dtype == np.uint16:
        scale = 65535.0
    else:
        raise MalformedFile(f"{p}: unsupported sample type {img.dtype}")
    if img.ndim == 2:
        img = img[..., np.newaxis]
    elif img.shape[2] == 4:
        img = cv2.cvtColor(img, cv2.COLOR_BGRA2RGB)
    elif img.shape[2] == 3:
        img = cv2.cvtColor(img, cv2.COLOR_BGR2RGB)
    else:
        raise MalformedFile(f"{p}: unsupported channel count {img.shape[2]}")
    return img.astype(np.float64) / scale


# BT.601 luma weights used by the Y4M YCbCr conversion
_KR, _KB = 0.299, 0.114
_KG = 1.0 - _KR - _KB


def _ycbcr_to_rgb(y, cb, cr):
    r = y + 2.0 * (1.0 - _KR) * cr
    b = y + 2.0 * (1.0 - _KB) * cb
    g = (y - _KR * r - _KB * b) / _KG
    return np.stack([r, g, b], axis=-1)


def _rgb_to_ycbcr(rgb):
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    y = _KR * r + _KG * g + _KB * b
    cb = (b - y) / (2.0 * (1.0 - _KB))
    cr = (r - y) / (2.0 * (1.0 - _KR))
    return y, cb, cr


def _parse_y4m_header(line: bytes, path):
    tokens = line.decode("ascii", errors="replace").split()
    if not tokens or tokens[0] != "YUV4MPEG2":
        raise MalformedFile(f"{path}: missing YUV4MPEG2 signature")
    params = {"C": "420jpeg", "X": []}
    for tok in tokens[1:]:
        key, val = tok[0], tok[1:]
        if key == "X":
            params["X"].append(val)
        else:
            params[key] = val
    try:
        width, height = int(params["W"]), int(params["H"])
    except (KeyError, ValueError):
        raise MalformedFile(f"{path}: header lacks valid W/H") from None
    rate = None
    if "F" in params:
        try:
            num, den = (int(v) for v in params["F"].split(":"))
            rate = num / den
        except (ValueError, ZeroDivisionError):
            raise MalformedFile(f"{path}: bad frame rate {params['F']!r}") from None
    full_range = any(x.upper() == "COLORRANGE=FULL" for x in params["X"])
    return width, height, rate, params["C"], full_range


def _y4m_layout(cs: str, width, height, path):
    """(bits, chroma plane shape or None, subsampling factors)."""
    m = re.fullmatch(r"(mono|420|422|444)(jpeg|paldv|mpeg2)?(?:p(\d+))?(16)?", cs)
    if not m:
        raise MalformedFile(f"{path}: unsupported colorspace C{cs}")
    kind = m.group(1)
    bits = int(m.group(3) or m.group(4) or 8)
    if bits not in (8, 10, 12, 16):
        raise MalformedFile(f"{path}: unsupported bit depth {bits}")
    if kind == "mono":
        return bits, None, (1, 1)
    sy, sx = {"420": (2, 2), "422": (1, 2), "444": (1, 1)}[kind]
    return bits, (-(-height // sy), -(-width // sx)), (sy, sx)


def _load_y4m(path: Path, fps) -> FrameSequence:
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    nl = data.find(b"\n")
    if nl < 0:
        raise MalformedFile(f"{path}: truncated header")
    width, height, rate, cs, full_range = _parse_y4m_header(data[:nl], path)
    bits, chroma_shape, (sy, sx) = _y4m_layout(cs, width, height, path)
    dtype = np.dtype("<u2") if bits > 8 else np.dtype(np.uint8)
    luma_n = width * height
    chroma_n = 0 if chroma_shape is None else chroma_shape[0] * chroma_shape[1]
    frame_bytes = (luma_n + 2 * chroma_n) * dtype.itemsize
    maxcode = float((1 << bits) - 1)
    s = float(1 << (bits - 8))

    frames = []
    pos = nl + 1
    while pos < len(data):
        end = data.find(b"\n", pos)
        if end < 0 or not data[pos:end].startswith(b"FRAME"):
            raise MalformedFile(f"{path}: expected FRAME marker at byte {pos}")
        pos = end + 1
        if pos + frame_bytes > len(data):
            raise MalformedFile(f"{path}: truncated frame {len(frames) + 1}")
        planes = np.frombuffer(data, dtype=dtype, count=frame_bytes // dtype.itemsize, offset=pos)
        pos += frame_bytes
        yp = planes[:luma_n].reshape(height, width).astype(np.float64)
        y = yp / maxcode if full_range else (yp - 16.0 * s) / (219.0 * s)
        if chroma_shape is None:
            frames.append(np.clip(y, 0.0, 1.0)[..., np.newaxis])
            continue
        cb, cr = (
            planes[luma_n + i * chroma_n:luma_n + (i + 1) * chroma_n]
            .reshape(chroma_shape).astype(np.float64)
            for i in range(2)
        )
        # nearest-neighbour chroma upsampling
        cb = np.repeat(np.repeat(cb, sy, axis=0), sx, axis=1)[:height, :width]
        cr = np.repeat(np.repeat(cr, sy, axis=0), sx, axis=1)[:height, :width]
        center = float(1 << (bits - 1))
        if full_range:
            cb, cr = (cb - center) / maxcode, (cr - center) / maxcode
        else:
            cb, cr = (cb - center) / (224.0 * s), (cr - center) / (224.0 * s)
        frames.append(np.clip(_ycbcr_to_rgb(y, cb, cr), 0.0, 1.0))
    if not frames:
        raise EmptyInput(f"{path}: stream has no frames")
    if fps is None:
        fps = rate if rate else DEFAULT_FPS
    colorspace = "GRAY" if chroma_shape is None else "RGB"
    return FrameSequence(np.stack(frames), fps=fps, colorspace=colorspace)


# ---------------------------------------------------------------- writing

def atomic_write_bytes(path, payload: bytes):
    """Write ``payload`` to ``path`` via a temp file in the same directory."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(payload)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _quantize(frames, bit_depth):
    maxv = (1 << bit_depth) - 1
    dtype = np.uint8 if bit_depth == 8 else np.uint16
    return np.round(np.clip(frames, 0.0, 1.0) * maxv).astype(dtype)


def write_frames(seq: FrameSequence, path, format="png", bit_depth=8):
    """Write ``seq`` losslessly (up to ``bit_depth`` quantization).

    ``png``: ``path`` is a directory receiving ``frame_000001.png`` ...; any
    stale ``frame_*`` files there are removed first.
    ``y4m``: RGB is stored as full-range 16-bit 4:4:4 YCbCr, GRAY as mono.
    """
    if seq.colorspace not in ("RGB", "GRAY"):
        raise ValueError(f"write_frames needs RGB or GRAY, got {seq.colorspace}")
    if bit_depth not in (8, 16):
        raise ValueError("bit_depth must be 8 or 16")
    path = Path(path)
    if format == "png":
        _write_png_dir(seq, path, bit_depth)
    elif format == "y4m":
        _write_y4m(seq, path, bit_depth)
    else:
        raise ValueError(f"unknown format {format!r}")


def _write_png_dir(seq, path: Path, bit_depth):
    try:
        path.mkdir(parents=True, exist_ok=True)
        for stale in path.iterdir():
            if _FRAME_NAME.match(stale.name):
                stale.unlink()
    except OSError as exc:
        raise IoFailure(f"cannot prepare {path}: {exc}") from exc
    codes = _quantize(seq.frames, bit_depth)
    for i, img in enumerate(codes, start=1):
        if img.shape[-1] == 3:
            img = cv2.cvtColor(img, cv2.COLOR_RGB2BGR)
        else:
            img = img[..., 0]
        ok, buf = cv2.imencode(".png", img)
        if not ok:
            raise IoFailure(f"PNG encoding failed for frame {i}")
        atomic_write_bytes(path / f"frame_{i:06d}.png", buf.tobytes())


def _write_y4m(seq, path: Path, bit_depth):
    rate = _fps_ratio(seq.fps)
    if seq.colorspace == "GRAY":
        cs = "mono" if bit_depth == 8 else "mono16"
        planes = [_quantize(seq.frames[..., 0], bit_depth)]
    else:
        cs = "444p16"
        y, cb, cr = _rgb_to_ycbcr(seq.frames)
        center = 32768.0 / 65535.0
        planes = [_quantize(y, 16), _quantize(cb + center, 16), _quantize(cr + center, 16)]
    header = f"YUV4MPEG2 W{seq.width} H{seq.height} F{rate} Ip A1:1 C{cs} XCOLORRANGE=FULL\n"
    le = [p.astype("<u2") if p.dtype == np.uint16 else p for p in planes]
    chunks = [header.encode("ascii")]
    for t in range(len(seq)):
        chunks.append(b"FRAME\n")
        chunks.extend(p[t].tobytes() for p in le)
    atomic_write_bytes(path, b"".join(chunks))


def _fps_ratio(fps):
    frac = Fraction(fps).limit_denominator(1001)
    return f"{frac.numerator}:{frac.denominator}"
