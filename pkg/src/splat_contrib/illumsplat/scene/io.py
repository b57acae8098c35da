"""On-disk formats: scene files, camera sets, PPM images and tensor archives.

Every binary format is little-endian, except 16-bit PPM samples which are
big-endian as Netpbm defines them.
"""

from __future__ import annotations

import logging
import struct
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Union

import numpy as np
import torch

from ..errors import FormatError, ShapeError, UnsupportedVariantError, ValidationError
from ..numerics import DTYPE, MAX_SH_DEGREE, sh_coeff_count
from .camera import Camera
from .gaussians import PARAMETER_NAMES, GaussianCloud

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SCENE_MAGIC = b"GSPL"
SCENE_VERSION = 1
SCENE_HEADER = struct.Struct("<4sIQII")

ARCHIVE_MAGIC = b"ISTA"
ARCHIVE_VERSION = 1
ARCHIVE_HEADER = struct.Struct("<4sIQ")

CAMERA_TOLERANCE = 1e-6


@dataclass
class SceneHeader:
    version: int
    count: int
    sh_degree: int
    embed_dim: int

    @property
    def record_floats(self) -> int:
        return 3 + 4 + 3 + 1 + 1 + sh_coeff_count(self.sh_degree) + self.embed_dim

    @property
    def record_size(self) -> int:
        return 8 * self.record_floats

    @property
    def file_size(self) -> int:
        return SCENE_HEADER.size + self.count * self.record_size


def _field_widths(sh_degree: int, embed_dim: int) -> list[tuple[str, int]]:
    widths = {"X": 3, "q": 4, "s": 3, "mu": 1, "sigma_u": 1, "sh": sh_coeff_count(sh_degree), "e": embed_dim}
    return [(name, widths[name]) for name in PARAMETER_NAMES]


def encode_scene(cloud: GaussianCloud) -> bytes:
    header = SCENE_HEADER.pack(SCENE_MAGIC, SCENE_VERSION, len(cloud), cloud.sh_degree, cloud.embed_dim)
    columns = []
    for name, width in _field_widths(cloud.sh_degree, cloud.embed_dim):
        tensor = getattr(cloud, name).detach().to(DTYPE).cpu()
        columns.append(tensor.reshape(len(cloud), width).numpy())
    body = np.concatenate(columns, axis=1) if columns else np.zeros((0, 0))
    return header + np.ascontiguousarray(body, dtype="<f8").tobytes()


def read_scene_header(data: bytes, path: str = "<bytes>") -> SceneHeader:
    if len(data) < SCENE_HEADER.size:
        raise FormatError(path, len(data), f"truncated header: expected {SCENE_HEADER.size} bytes, got {len(data)}")
    magic, version, count, degree, embed = SCENE_HEADER.unpack_from(data, 0)
    if magic != SCENE_MAGIC:
        raise FormatError(path, 0, f"bad magic {magic!r}, expected {SCENE_MAGIC!r}")
    if version != SCENE_VERSION:
        raise FormatError(path, 4, f"unsupported version {version}, expected {SCENE_VERSION}")
    if degree > MAX_SH_DEGREE:
        raise FormatError(path, 16, f"SH degree {degree} exceeds {MAX_SH_DEGREE}")
    return SceneHeader(version=version, count=count, sh_degree=degree, embed_dim=embed)


def decode_scene(data: bytes, path: str = "<bytes>") -> GaussianCloud:
    header = read_scene_header(data, path)
    if len(data) != header.file_size:
        raise FormatError(
            path,
            min(len(data), header.file_size),
            f"length mismatch: expected {header.file_size} bytes, got {len(data)}",
        )
    body = np.frombuffer(data, dtype="<f8", offset=SCENE_HEADER.size).reshape(header.count, header.record_floats)
    tensors: dict[str, torch.Tensor] = {}
    start = 0
    for name, width in _field_widths(header.sh_degree, header.embed_dim):
        column = torch.from_numpy(body[:, start : start + width].astype(np.float64))
        tensors[name] = column.reshape(header.count) if name in ("mu", "sigma_u") else column.reshape(header.count, width)
        start += width
    return GaussianCloud(**tensors)


def write_scene(path: PathLike, cloud: GaussianCloud) -> None:
    Path(path).write_bytes(encode_scene(cloud))
    logger.debug("wrote %d gaussians to %s", len(cloud), path)


def read_scene(path: PathLike) -> GaussianCloud:
    return decode_scene(Path(path).read_bytes(), str(path))


def format_camera(cam: Camera) -> str:
    values = [float(v) for v in cam.K.reshape(-1)] + [float(v) for v in cam.W.reshape(-1)]
    return " ".join(repr(v) for v in values) + f" {cam.width} {cam.height}"


def write_camera_set(path: PathLike, cameras: list[Camera]) -> None:
    lines = [
        "# one camera per line: K (3x3 row-major) W (4x4 row-major world-to-camera) width height",
    ]
    lines.extend(format_camera(cam) for cam in cameras)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_camera_set(path: PathLike) -> list[Camera]:
    """Parse a camera text file.

    Raises:
        FormatError: on a malformed line, with the byte offset of the line.
        ValidationError: when a camera's rotation is not orthonormal within 1e-6.
    """
    raw = Path(path).read_bytes()
    cameras: list[Camera] = []
    offset = 0
    for number, line in enumerate(raw.split(b"\n"), start=1):
        line_offset = offset
        offset += len(line) + 1
        text = line.split(b"#", 1)[0].decode("utf-8").strip()
        if not text:
            continue
        tokens = text.split()
        if len(tokens) != 27:
            raise FormatError(str(path), line_offset, f"line {number}: expected 27 values, got {len(tokens)}")
        try:
            values = [float(t) for t in tokens[:25]]
            width, height = int(tokens[25]), int(tokens[26])
        except ValueError as exc:
            raise FormatError(str(path), line_offset, f"line {number}: {exc}") from None
        cam = Camera(
            K=torch.tensor(values[:9], dtype=DTYPE).reshape(3, 3),
            W=torch.tensor(values[9:], dtype=DTYPE).reshape(4, 4),
            width=width,
            height=height,
        )
        try:
            cam.validate(CAMERA_TOLERANCE)
        except ValidationError as exc:
            raise ValidationError(f"{path}: camera on line {number}: {exc}") from None
        cameras.append(cam)
    return cameras


def encode_ppm(image: torch.Tensor, maxval: int = 255) -> bytes:
    if image.dim() != 3 or image.shape[2] != 3:
        raise ShapeError(f"image must be (H, W, 3), got {tuple(image.shape)}")
    if maxval not in (255, 65535):
        raise ValidationError(f"maxval must be 255 or 65535, got {maxval}")
    height, width = int(image.shape[0]), int(image.shape[1])
    values = image.detach().to(DTYPE).clamp(0.0, 1.0).cpu().numpy()
    quantized = np.rint(values * maxval)
    dtype = "u1" if maxval == 255 else ">u2"
    header = f"P6\n{width} {height}\n{maxval}\n".encode("ascii")
    return header + quantized.astype(dtype).tobytes()


def _read_token(data: bytes, pos: int, path: str) -> tuple[bytes, int]:
    length = len(data)
    while pos < length:
        if data[pos : pos + 1].isspace():
            pos += 1
        elif data[pos : pos + 1] == b"#":
            while pos < length and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            break
    start = pos
    while pos < length and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise FormatError(path, start, "unexpected end of header")
    return data[start:pos], pos


def decode_ppm(data: bytes, path: str = "<bytes>") -> torch.Tensor:
    """Decode a binary PPM into an (H, W, 3) float64 tensor in [0, 1]."""
    if len(data) < 2:
        raise FormatError(path, 0, "file too short for a PPM header")
    magic = data[:2]
    if magic != b"P6":
        if magic[:1] == b"P" and magic[1:2] in b"1234567":
            raise UnsupportedVariantError(path, 0, f"netpbm variant {magic.decode()} is not supported, use P6")
        raise FormatError(path, 0, f"bad magic {magic!r}, expected b'P6'")
    pos = 2
    fields = []
    for what in ("width", "height", "maxval"):
        start = pos
        token, pos = _read_token(data, pos, path)
        try:
            value = int(token)
        except ValueError:
            raise FormatError(path, start, f"invalid {what} {token!r}") from None
        fields.append(value)
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise FormatError(path, 2, f"invalid size {width}x{height}")
    if not 0 < maxval < 65536:
        raise FormatError(path, pos, f"maxval {maxval} out of range")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise FormatError(path, pos, "missing whitespace after maxval")
    pos += 1
    sample_size = 1 if maxval < 256 else 2
    expected = width * height * 3 * sample_size
    if len(data) - pos != expected:
        raise FormatError(path, pos, f"expected {expected} bytes of pixel data, got {len(data) - pos}")
    dtype = "u1" if sample_size == 1 else ">u2"
    pixels = np.frombuffer(data, dtype=dtype, offset=pos).reshape(height, width, 3)
    return torch.from_numpy(pixels.astype(np.float64) / maxval)


def write_image(path: PathLike, image: torch.Tensor, maxval: int = 255) -> None:
    Path(path).write_bytes(encode_ppm(image, maxval))


def read_image(path: PathLike) -> torch.Tensor:
    return decode_ppm(Path(path).read_bytes(), str(path))


def encode_tensor_archive(tensors: Mapping[str, torch.Tensor]) -> bytes:
    """Pack named tensors: header, then per tensor name, shape and float64 data."""
    chunks = [ARCHIVE_HEADER.pack(ARCHIVE_MAGIC, ARCHIVE_VERSION, len(tensors))]
    for name, tensor in tensors.items():
        encoded = name.encode("utf-8")
        array = tensor.detach().to(DTYPE).cpu().contiguous().numpy()
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", array.ndim))
        chunks.append(struct.pack(f"<{array.ndim}Q", *array.shape))
        chunks.append(array.astype("<f8").tobytes())
    return b"".join(chunks)


def decode_tensor_archive(data: bytes, path: str = "<bytes>") -> OrderedDict[str, torch.Tensor]:
    if len(data) < ARCHIVE_HEADER.size:
        raise FormatError(path, len(data), "truncated archive header")
    magic, version, count = ARCHIVE_HEADER.unpack_from(data, 0)
    if magic != ARCHIVE_MAGIC:
        raise FormatError(path, 0, f"bad magic {magic!r}, expected {ARCHIVE_MAGIC!r}")
    if version != ARCHIVE_VERSION:
        raise FormatError(path, 4, f"unsupported version {version}")
    pos = ARCHIVE_HEADER.size
    result: OrderedDict[str, torch.Tensor] = OrderedDict()
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<I", data, pos)
            pos += 4
            name = data[pos : pos + name_len].decode("utf-8")
            pos += name_len
            (ndim,) = struct.unpack_from("<I", data, pos)
            pos += 4
            shape = struct.unpack_from(f"<{ndim}Q", data, pos)
            pos += 8 * ndim
            size = int(np.prod(shape, dtype=np.int64)) if ndim else 1
            if pos + 8 * size > len(data):
                raise FormatError(path, pos, f"tensor {name!r} needs {8 * size} bytes, {len(data) - pos} left")
            array = np.frombuffer(data, dtype="<f8", count=size, offset=pos).astype(np.float64)
            pos += 8 * size
            result[name] = torch.from_numpy(array.reshape(shape))
    except struct.error:
        raise FormatError(path, pos, "truncated tensor entry") from None
    if pos != len(data):
        raise FormatError(path, pos, f"{len(data) - pos} trailing bytes")
    return result


def write_tensor_archive(path: PathLike, tensors: Mapping[str, torch.Tensor]) -> None:
    Path(path).write_bytes(encode_tensor_archive(tensors))


def read_tensor_archive(path: PathLike) -> OrderedDict[str, torch.Tensor]:
    return decode_tensor_archive(Path(path).read_bytes(), str(path))
