import gzip

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hexatlas import LabelVolume, read_nrrd, write_nrrd
from hexatlas.errors import (
    DimensionMismatch,
    HexAtlasError,
    NegativeLabel,
    NrrdFormatError,
    TruncatedData,
    UnsupportedEncoding,
    UnsupportedType,
)


def header(**fields):
    base = {"type": "uchar", "dimension": "3", "sizes": "1 1 1", "encoding": "raw"}
    base.update(fields)
    lines = ["NRRD0004"] + [f"{k.replace('_', ' ')}: {v}" for k, v in base.items()]
    return ("\n".join(lines) + "\n\n").encode()


def test_minimal_file():
    vol = read_nrrd(header() + b"\x07")
    assert vol.dims == (1, 1, 1)
    assert vol.voxels.tolist() == [7]
    assert vol.spacing == (1.0, 1.0, 1.0)
    assert vol.origin == (0.0, 0.0, 0.0)
    np.testing.assert_array_equal(vol.direction, np.eye(3))


def test_gzip_all_background():
    vol = read_nrrd(header(sizes="2 2 2", encoding="gzip") + gzip.compress(bytes(8)))
    assert vol.voxels.tolist() == [0] * 8


@pytest.mark.parametrize("magic", [b"NRRD0001", b"NRRD0003", b"NRRD0005"])
def test_magic_versions(magic):
    data = header().replace(b"NRRD0004", magic) + b"\x01"
    assert read_nrrd(data).voxels.tolist() == [1]


def test_bad_magic():
    with pytest.raises(NrrdFormatError):
        read_nrrd(header().replace(b"NRRD0004", b"NRRD0009") + b"\x01")


def test_bzip2_rejected():
    with pytest.raises(UnsupportedEncoding):
        read_nrrd(header(encoding="bzip2") + b"\x00")


def test_ascii_rejected():
    with pytest.raises(UnsupportedEncoding):
        read_nrrd(header(encoding="ascii") + b"7\n")


@pytest.mark.parametrize("t", ["float", "double", "int64"])
def test_float_types_rejected(t):
    with pytest.raises(UnsupportedType):
        read_nrrd(header(type=t) + bytes(8))


def test_dimension_must_be_three():
    with pytest.raises(DimensionMismatch):
        read_nrrd(header(dimension="2", sizes="1 1") + b"\x00")


def test_truncated_payload():
    with pytest.raises(TruncatedData):
        read_nrrd(header(sizes="2 2 2") + bytes(7))


def test_negative_label():
    data = header(type="short", sizes="2 1 1", endian="little") + np.array([3, -1], "<i2").tobytes()
    with pytest.raises(NegativeLabel):
        read_nrrd(data)


def test_detached_header_rejected():
    with pytest.raises(NrrdFormatError):
        read_nrrd(header(data_file="x.raw") + b"")


def test_big_endian_and_comments():
    data = (b"NRRD0004\n# a comment\ntype: unsigned short\ndimension: 3\nsizes: 3 1 1\n"
            b"endian: big\nencoding: raw\n\n" + np.array([1, 300, 65535], ">u2").tobytes())
    assert read_nrrd(data).voxels.tolist() == [1, 300, 65535]


def test_space_directions_diagonal():
    vol = read_nrrd(header(space_dimension="3",
                           space_directions="(0.5,0,0) (0,0.75,0) (0,0,2)",
                           space_origin="(-10,20.5,3)") + b"\x01")
    assert vol.spacing == (0.5, 0.75, 2.0)
    assert vol.origin == (-10.0, 20.5, 3.0)
    np.testing.assert_array_equal(vol.direction, np.eye(3))


def test_oblique_direction_normalised():
    vol = read_nrrd(header(space_directions="(0,2,0) (-2,0,0) (0,0,3)") + b"\x01")
    assert vol.spacing == pytest.approx((2.0, 2.0, 3.0))
    np.testing.assert_allclose(vol.direction, [[0, -1, 0], [1, 0, 0], [0, 0, 1]])


def test_write_minimal_round_trip():
    vol = LabelVolume((1, 1, 1), (1, 1, 1), voxels=[7])
    for enc in ("raw", "gzip"):
        assert read_nrrd(write_nrrd(vol, enc)) == vol


@pytest.mark.parametrize("max_label, expected", [(200, b"type: uchar"), (255, b"type: uchar"),
                                                 (300, b"type: ushort"), (70000, b"type: uint")])
def test_narrowest_type(max_label, expected):
    vol = LabelVolume((2, 1, 1), (1, 1, 1), voxels=[0, max_label])
    data = write_nrrd(vol, "raw")
    assert expected + b"\n" in data
    assert read_nrrd(data).voxels.tolist() == [0, max_label]


def test_header_field_order():
    vol = LabelVolume((2, 1, 1), (1, 1, 1), voxels=[0, 300])
    head = write_nrrd(vol, "raw").split(b"\n\n", 1)[0].decode().splitlines()
    keys = [line.split(":")[0] for line in head[1:]]
    assert keys == ["type", "dimension", "sizes", "space dimension", "space directions",
                    "space origin", "endian", "encoding"]


def test_write_is_deterministic():
    vol = LabelVolume((3, 2, 2), (1, 1, 1), voxels=np.arange(12))
    assert write_nrrd(vol, "gzip") == write_nrrd(vol, "gzip")


def test_metadata_carried():
    data = header(space="left-posterior-superior", content="atlas") + b"\x05"
    data = data.replace(b"\n\n", b"\nowner:=spl\n\n")
    vol = read_nrrd(data)
    assert vol.metadata == {"space": "left-posterior-superior", "content": "atlas", "owner": "spl"}
    assert read_nrrd(write_nrrd(vol)) == vol


@st.composite
def volumes(draw):
    dims = tuple(draw(st.lists(st.integers(1, 5), min_size=3, max_size=3)))
    n = int(np.prod(dims))
    top = draw(st.sampled_from([1, 255, 256, 65535, 65536, 2**31 - 1]))
    vox = draw(st.lists(st.integers(0, top), min_size=n, max_size=n))
    spacing = tuple(draw(st.lists(st.floats(0.01, 10), min_size=3, max_size=3)))
    origin = tuple(draw(st.lists(st.floats(-500, 500), min_size=3, max_size=3)))
    angle = draw(st.floats(-3.0, 3.0))
    c, s = np.cos(angle), np.sin(angle)
    direction = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    return LabelVolume(dims, spacing, origin, direction, vox)


@settings(max_examples=60, deadline=None)
@given(volumes(), st.sampled_from(["raw", "gzip"]))
def test_round_trip_property(vol, encoding):
    back = read_nrrd(write_nrrd(vol, encoding))
    np.testing.assert_array_equal(back.voxels, vol.voxels)
    assert back.dims == vol.dims
    np.testing.assert_allclose(back.spacing, vol.spacing, rtol=1e-12, atol=0)
    np.testing.assert_allclose(back.origin, vol.origin, rtol=0, atol=1e-12 * 500)
    np.testing.assert_allclose(back.direction, vol.direction, rtol=0, atol=1e-12)


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=200))
def test_parser_total_on_garbage(data):
    try:
        vol = read_nrrd(b"NRRD0004\n" + data)
    except HexAtlasError:
        return
    assert vol.voxels.size == np.prod(vol.dims)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from([
    "type: uchar", "type: float", "type: ushort", "dimension: 3", "dimension: 2",
    "sizes: 1 1 1", "sizes: 2 2", "sizes: 0 1 1", "encoding: raw", "encoding: gzip",
    "endian: big", "endian: sideways", "space directions: (1,0,0) (0,1,0) (0,0,1)",
    "space directions: (0,0,0) (0,1,0) (0,0,1)", "space directions: none (0,1,0)",
    "space origin: (1,2)", "space origin: (nan,0,0)", "bogus line", "k:=v", "# c",
]), max_size=8), st.binary(max_size=16))
def test_parser_total_on_header_mixes(lines, payload):
    data = ("NRRD0004\n" + "\n".join(lines) + "\n\n").encode() + payload
    try:
        read_nrrd(data)
    except HexAtlasError:
        pass
