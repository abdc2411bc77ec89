"""Reading and writing 3D integer label volumes in NRRD.

Only the subset needed for segmentation label maps is handled: attached
headers, ``dimension: 3``, integral sample types and ``raw`` or ``gzip``
encoding.  Voxels are kept as a flat array with x varying fastest, which is
the on-disk order of NRRD.
"""

from __future__ import annotations

import gzip
import re
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    NegativeLabel,
    NrrdFormatError,
    TruncatedData,
    UnsupportedEncoding,
    UnsupportedType,
)

LABEL_DTYPE = np.int64

_TYPE_ALIASES = {
    "uchar": "uchar", "unsigned char": "uchar", "uint8": "uchar", "uint8_t": "uchar",
    "short": "short", "short int": "short", "signed short": "short",
    "signed short int": "short", "int16": "short", "int16_t": "short",
    "ushort": "ushort", "unsigned short": "ushort", "unsigned short int": "ushort",
    "uint16": "ushort", "uint16_t": "ushort",
    "int": "int", "signed int": "int", "int32": "int", "int32_t": "int",
    "uint": "uint", "unsigned int": "uint", "uint32": "uint", "uint32_t": "uint",
}
_NUMPY_TYPES = {
    "uchar": np.uint8,
    "short": np.int16,
    "ushort": np.uint16,
    "int": np.int32,
    "uint": np.uint32,
}
SUPPORTED_TYPES = tuple(_NUMPY_TYPES)

# standard field names that the reader consumes itself
_CONSUMED = {
    "type", "dimension", "sizes", "encoding", "endian", "space directions",
    "space origin", "spacings", "space dimension", "data file", "datafile",
}
_STANDARD_FIELDS = _CONSUMED | {
    "content", "space", "kinds", "labels", "units", "space units",
    "measurement frame", "centers", "centerings", "axis mins", "axismins",
    "axis maxs", "axismaxs", "thicknesses", "min", "max", "old min", "oldmin",
    "old max", "oldmax", "block size", "blocksize", "line skip", "lineskip",
    "byte skip", "byteskip", "sample units", "number",
}

_MAGIC = re.compile(rb"^NRRD000[1-5]$")


@dataclass(frozen=True, eq=False)
class LabelVolume:
    """A 3D grid of non-negative integer labels with its physical geometry.

    Parameters
    ----------
    dims : tuple of int
        ``(nx, ny, nz)``.
    spacing : tuple of float
        Voxel size along each logical axis, in mm.
    origin : tuple of float
        Physical position of voxel ``(0, 0, 0)``, in mm.
    direction : ndarray, shape (3, 3)
        Unit column vectors giving the physical direction of each logical axis.
    voxels : ndarray
        Flat label array of length ``nx*ny*nz``, x fastest.
    metadata : dict
        Header fields that are carried along but not interpreted.
    """

    dims: tuple
    spacing: tuple
    origin: tuple = (0.0, 0.0, 0.0)
    direction: np.ndarray = field(default_factory=lambda: np.eye(3))
    voxels: np.ndarray = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        spacing = tuple(float(s) for s in self.spacing)
        origin = tuple(float(o) for o in self.origin)
        direction = np.array(self.direction, dtype=float).reshape(3, 3)
        if len(dims) != 3 or min(dims) < 1:
            raise DimensionMismatch(f"dims must be three positive integers, got {self.dims}")
        if len(spacing) != 3 or not all(s > 0 and np.isfinite(s) for s in spacing):
            raise NrrdFormatError(f"spacing must be three positive numbers, got {self.spacing}")
        if len(origin) != 3 or not all(np.isfinite(origin)):
            raise NrrdFormatError(f"origin must be three finite numbers, got {self.origin}")
        if not np.all(np.isfinite(direction)) or np.linalg.det(direction) <= 0:
            raise NrrdFormatError("direction matrix must have a positive determinant")
        voxels = np.zeros(int(np.prod(dims)), dtype=LABEL_DTYPE) if self.voxels is None \
            else np.asarray(self.voxels).ravel(order="F" if np.ndim(self.voxels) == 3 else "C")
        if voxels.size != int(np.prod(dims)):
            raise DimensionMismatch(
                f"{voxels.size} voxels given for dims {dims}"
            )
        if voxels.size and voxels.min() < 0:
            raise NegativeLabel(f"negative label {int(voxels.min())} in volume")
        voxels = voxels.astype(LABEL_DTYPE, copy=True)
        voxels.setflags(write=False)
        direction.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "direction", direction)
        object.__setattr__(self, "voxels", voxels)
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def array(self):
        """Read-only ``(nx, ny, nz)`` view of the voxels, indexed ``[i, j, k]``."""
        return self.voxels.reshape(self.dims, order="F")

    def with_voxels(self, voxels):
        """Same geometry and metadata, new labels."""
        return LabelVolume(self.dims, self.spacing, self.origin, self.direction,
                           voxels, self.metadata)

    def same_grid(self, other, tol=0.0):
        return (self.dims == other.dims
                and np.allclose(self.spacing, other.spacing, rtol=tol, atol=0)
                and np.allclose(self.origin, other.origin, rtol=tol, atol=tol)
                and np.allclose(self.direction, other.direction, rtol=tol, atol=tol))

    def histogram(self):
        """Map label -> voxel count, for labels that occur."""
        values, counts = np.unique(self.voxels, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}

    def __eq__(self, other):
        if not isinstance(other, LabelVolume):
            return NotImplemented
        return (self.same_grid(other) and np.array_equal(self.voxels, other.voxels)
                and self.metadata == other.metadata)

    def __repr__(self):
        return (f"LabelVolume(dims={self.dims}, spacing={self.spacing}, "
                f"origin={self.origin}, labels={len(np.unique(self.voxels))})")


def _parse_vector(text):
    text = text.strip()
    if text == "none":
        return None
    m = re.fullmatch(r"\(([^()]*)\)", text)
    if not m:
        raise NrrdFormatError(f"bad vector {text!r}")
    try:
        values = [float(v) for v in m.group(1).split(",")]
    except ValueError:
        raise NrrdFormatError(f"bad vector {text!r}") from None
    return values


def _split_header(data):
    """Return (list of header lines, payload bytes)."""
    pos = 0
    lines = []
    while True:
        end = data.find(b"\n", pos)
        if end < 0:
            raise NrrdFormatError("header is not terminated by an empty line")
        line = data[pos:end]
        pos = end + 1
        if line.endswith(b"\r"):
            line = line[:-1]
        if not line:
            return lines, data[pos:]
        lines.append(line)


def read_nrrd(data):
    """Parse an NRRD byte string (or a path) into a :class:`LabelVolume`.

    Raises a :class:`~hexatlas.errors.HexAtlasError` subclass for every input
    that is not a conforming 3D integer label volume.
    """
    if isinstance(data, (str, Path)):
        data = Path(data).read_bytes()
    data = bytes(data)
    lines, payload = _split_header(data)
    if not lines or not _MAGIC.match(lines[0]):
        raise NrrdFormatError("missing NRRD0001-NRRD0005 magic")

    fields = {}
    metadata = {}
    for raw in lines[1:]:
        try:
            line = raw.decode("ascii")
        except UnicodeDecodeError:
            raise NrrdFormatError("non-ASCII header line") from None
        if line.startswith("#"):
            continue
        if ":=" in line and (": " not in line or line.index(":=") < line.index(": ")):
            key, value = line.split(":=", 1)
            metadata[key] = value
            continue
        if ": " not in line:
            raise NrrdFormatError(f"malformed header line {line!r}")
        key, value = line.split(": ", 1)
        key = key.strip().lower()
        if key in fields:
            raise NrrdFormatError(f"duplicate header field {key!r}")
        fields[key] = value.strip()

    for required in ("type", "dimension", "sizes", "encoding"):
        if required not in fields:
            raise NrrdFormatError(f"missing required field {required!r}")
    if "data file" in fields or "datafile" in fields:
        raise NrrdFormatError("detached data files are not supported")

    if fields["dimension"] != "3":
        raise DimensionMismatch(f"dimension {fields['dimension']!r}, expected 3")
    type_name = fields["type"].lower()
    if type_name not in _TYPE_ALIASES:
        raise UnsupportedType(f"sample type {fields['type']!r} is not an integer label type")
    type_name = _TYPE_ALIASES[type_name]
    encoding = fields["encoding"].lower()
    if encoding in ("gz",):
        encoding = "gzip"
    if encoding not in ("raw", "gzip"):
        raise UnsupportedEncoding(f"encoding {fields['encoding']!r}")

    try:
        dims = tuple(int(v) for v in fields["sizes"].split())
    except ValueError:
        raise NrrdFormatError(f"bad sizes {fields['sizes']!r}") from None
    if len(dims) != 3:
        raise DimensionMismatch(f"sizes lists {len(dims)} axes, expected 3")
    if min(dims) < 1:
        raise NrrdFormatError(f"non-positive size in {dims}")

    if "space directions" in fields:
        vectors = re.findall(r"\([^()]*\)|none", fields["space directions"])
        vectors = [_parse_vector(v) for v in vectors]
        if len(vectors) != 3 or any(v is None or len(v) != 3 for v in vectors):
            raise NrrdFormatError("space directions must be three 3-vectors")
        columns = np.array(vectors, dtype=float).T
        spacing = np.linalg.norm(columns, axis=0)
        if not np.all(np.isfinite(spacing)) or np.any(spacing <= 0):
            raise NrrdFormatError("degenerate space direction")
        direction = columns / spacing
    elif "spacings" in fields:
        try:
            spacing = np.array([float(v) for v in fields["spacings"].split()])
        except ValueError:
            raise NrrdFormatError(f"bad spacings {fields['spacings']!r}") from None
        if spacing.shape != (3,):
            raise NrrdFormatError("spacings must list three values")
        direction = np.eye(3)
    else:
        spacing = np.ones(3)
        direction = np.eye(3)

    if "space origin" in fields:
        origin = _parse_vector(fields["space origin"])
        if origin is None or len(origin) != 3:
            raise NrrdFormatError("space origin must be a 3-vector")
    else:
        origin = (0.0, 0.0, 0.0)

    endian = fields.get("endian", "little").lower()
    if endian not in ("little", "big"):
        raise NrrdFormatError(f"bad endian {endian!r}")

    if encoding == "gzip":
        try:
            payload = zlib.decompress(payload, zlib.MAX_WBITS | 32)
        except zlib.error as exc:
            raise TruncatedData(f"gzip payload could not be decoded: {exc}") from None

    dtype = np.dtype(_NUMPY_TYPES[type_name]).newbyteorder("<" if endian == "little" else ">")
    count = int(np.prod(dims))
    if len(payload) < count * dtype.itemsize:
        raise TruncatedData(
            f"payload has {len(payload)} bytes, need {count * dtype.itemsize}"
        )
    voxels = np.frombuffer(payload, dtype=dtype, count=count)
    if voxels.size and voxels.min() < 0:
        raise NegativeLabel(f"negative label {int(voxels.min())} in volume")

    for key, value in fields.items():
        if key not in _CONSUMED:
            metadata[key] = value
    try:
        return LabelVolume(dims, tuple(spacing), tuple(origin), direction, voxels, metadata)
    except NegativeLabel:
        raise
    except (DimensionMismatch, NrrdFormatError):
        raise
    except ValueError as exc:
        raise NrrdFormatError(str(exc)) from None


def _narrowest_type(max_label):
    for name in ("uchar", "ushort", "uint"):
        if max_label <= np.iinfo(_NUMPY_TYPES[name]).max:
            return name
    raise UnsupportedType(f"label {max_label} does not fit in 32 bits")


def _fmt_vector(values):
    return "(" + ",".join(repr(float(v)) for v in values) + ")"


def write_nrrd(vol, encoding="gzip", type_name=None):
    """Serialise a :class:`LabelVolume` as an attached-header NRRD0004 file.

    The sample type is the narrowest unsigned type that holds the largest
    label unless ``type_name`` forces one of :data:`SUPPORTED_TYPES`.
    """
    if encoding not in ("raw", "gzip"):
        raise UnsupportedEncoding(f"encoding {encoding!r}")
    max_label = int(vol.voxels.max()) if vol.voxels.size else 0
    if type_name is None:
        type_name = _narrowest_type(max_label)
    else:
        type_name = _TYPE_ALIASES.get(type_name, type_name)
        if type_name not in _NUMPY_TYPES:
            raise UnsupportedType(f"sample type {type_name!r}")
        if max_label > np.iinfo(_NUMPY_TYPES[type_name]).max:
            raise UnsupportedType(f"label {max_label} does not fit in {type_name}")
    dtype = np.dtype(_NUMPY_TYPES[type_name]).newbyteorder("<")

    columns = np.asarray(vol.direction) * np.asarray(vol.spacing)
    header = [
        "NRRD0004",
        f"type: {type_name}",
        "dimension: 3",
        "sizes: " + " ".join(str(n) for n in vol.dims),
        (f"space: {vol.metadata['space']}" if "space" in vol.metadata
         else "space dimension: 3"),
        "space directions: " + " ".join(_fmt_vector(columns[:, a]) for a in range(3)),
        "space origin: " + _fmt_vector(vol.origin),
    ]
    if dtype.itemsize > 1:
        header.append("endian: little")
    header.append(f"encoding: {encoding}")
    for key, value in vol.metadata.items():
        if key.lower() in _STANDARD_FIELDS:
            if key.lower() not in _CONSUMED and key.lower() != "space":
                header.append(f"{key}: {value}")
        else:
            header.append(f"{key}:={value}")

    payload = vol.voxels.astype(dtype).tobytes()
    if encoding == "gzip":
        payload = gzip.compress(payload, mtime=0)
    return ("\n".join(header) + "\n\n").encode("ascii") + payload


def load_nrrd(path):
    return read_nrrd(Path(path).read_bytes())


def save_nrrd(vol, path, encoding="gzip"):
    Path(path).write_bytes(write_nrrd(vol, encoding))
