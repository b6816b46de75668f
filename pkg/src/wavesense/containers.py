"""Complex-image container files and magnitude export.

Images travel as paired files: a small text header (magic ``PSNS1``) and a raw
binary data file of little-endian interleaved (real, imag) float32 samples,
row-major. A header may declare ``planes: n`` to stack several equally-sized
images in one data file (coil stacks, bound planes). Extra ``key: value``
lines are preserved so callers can attach metadata such as the reduction
factor.
"""

import os

import numpy as np

from .errors import FormatError

MAGIC = "PSNS1"
STORAGE_DTYPE = np.dtype("<c8")  # complex64, little-endian


def _data_path_for(header_path):
    root, _ = os.path.splitext(header_path)
    return root + ".dat"


def write_image(image, header_path, extra=None):
    """Write a single 2D complex image as a PSNS1 header/data pair.

    The data file is stored as complex64; pass complex64 input for a bit-exact
    round trip. ``extra`` is an optional dict of additional header fields.
    """
    image = np.asarray(image)
    if image.ndim != 2:
        raise FormatError(f"expected a 2D image, got shape {image.shape}")
    write_stack(image[None, :, :], header_path, extra=extra)


def write_stack(stack, header_path, extra=None):
    """Write a (planes, Y, X) complex stack as one header/data pair."""
    stack = np.asarray(stack)
    if stack.ndim != 3:
        raise FormatError(f"expected a (planes, Y, X) stack, got shape {stack.shape}")
    planes, height, width = stack.shape
    if height < 1 or width < 1 or planes < 1:
        raise FormatError(f"degenerate dimensions {stack.shape}")
    data_path = _data_path_for(header_path)
    lines = [
        MAGIC,
        f"height: {height}",
        f"width: {width}",
        "dtype: complex64",
        f"planes: {planes}",
        f"data: {os.path.basename(data_path)}",
    ]
    for key, value in (extra or {}).items():
        lines.append(f"{key}: {value}")
    with open(header_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    stack.astype(STORAGE_DTYPE, copy=False).tofile(data_path)


def read_header(header_path):
    """Parse a PSNS1 header, returning its fields as a dict of strings."""
    with open(header_path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh]
    if not lines or lines[0].strip() != MAGIC:
        raise FormatError(f"{header_path}: bad magic string")
    fields = {}
    for line in lines[1:]:
        if not line.strip():
            continue
        if ":" not in line:
            raise FormatError(f"{header_path}: malformed header line {line!r}")
        key, _, value = line.partition(":")
        fields[key.strip()] = value.strip()
    for required in ("height", "width", "dtype"):
        if required not in fields:
            raise FormatError(f"{header_path}: missing header field {required!r}")
    if fields["dtype"] != "complex64":
        raise FormatError(f"{header_path}: unsupported dtype {fields['dtype']!r}")
    return fields


def read_stack(header_path):
    """Read a header/data pair; returns ((planes, Y, X) complex64 array, fields)."""
    fields = read_header(header_path)
    try:
        height = int(fields["height"])
        width = int(fields["width"])
        planes = int(fields.get("planes", "1"))
    except ValueError as exc:
        raise FormatError(f"{header_path}: non-integer dimension: {exc}") from exc
    if height < 1 or width < 1 or planes < 1:
        raise FormatError(f"{header_path}: degenerate dimensions")
    data_name = fields.get("data")
    if data_name is not None:
        data_path = os.path.join(os.path.dirname(header_path) or ".", data_name)
    else:
        data_path = _data_path_for(header_path)
    if not os.path.exists(data_path):
        raise FileNotFoundError(f"missing data file {data_path}")
    expected = planes * height * width * STORAGE_DTYPE.itemsize
    actual = os.path.getsize(data_path)
    if actual != expected:
        raise FormatError(
            f"{data_path}: byte-count mismatch (header implies {expected}, file has {actual})"
        )
    data = np.fromfile(data_path, dtype=STORAGE_DTYPE)
    return data.reshape(planes, height, width), fields


def read_image(header_path):
    """Read a single-plane container; returns the (Y, X) complex64 image."""
    stack, fields = read_stack(header_path)
    if stack.shape[0] != 1:
        raise FormatError(
            f"{header_path}: expected a single plane, file holds {stack.shape[0]}"
        )
    return stack[0]


def export_magnitude(image, path):
    """Write the magnitude of a complex image as an 8-bit binary PGM (P5).

    Pixels are round(255 * |rho| / max |rho|) with half-away-from-zero
    rounding; an all-zero image maps to all-zero pixels.
    """
    image = np.asarray(image)
    if image.ndim != 2:
        raise FormatError(f"expected a 2D image, got shape {image.shape}")
    mag = np.abs(image).astype(np.float64)
    peak = mag.max()
    if peak > 0.0:
        # floor(x + 0.5) is half-away-from-zero for the nonnegative values here
        pixels = np.floor(255.0 * mag / peak + 0.5).astype(np.uint8)
    else:
        pixels = np.zeros(mag.shape, dtype=np.uint8)
    height, width = mag.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())
