import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cbyte.core import BBox
from cbyte.mot_io import (
    MotParseError,
    MotRecord,
    format_number,
    list_frames,
    load_frame,
    parse_mot,
    save_frame,
    serialize_records,
    write_mot,
)
from cbyte.tracker import TrackSnapshot

six_dp = st.integers(-10**9, 10**9).map(lambda n: n / 10**6)


def test_parse_detection_line():
    out = parse_mot("1,-1,10,20,30,40,0.9,-1,-1,-1\n")
    assert list(out) == [1]
    (r,) = out[1]
    assert (r.frame, r.id, r.left, r.top, r.width, r.height, r.score) == (1, -1, 10, 20, 30, 40, 0.9)
    assert r.extra == (-1, -1, -1)


def test_parse_error_names_line():
    with pytest.raises(MotParseError) as exc:
        parse_mot("1,abc,1,2,3,4,0.5,-1,-1,-1\n")
    assert exc.value.line_no == 1 and "line 1" in str(exc.value)


def test_parse_error_later_line():
    with pytest.raises(MotParseError) as exc:
        parse_mot("1,1,1,2,3,4,1\n\n2,1,1,2\n")
    assert exc.value.line_no == 3


@pytest.mark.parametrize("line", ["0,1,1,2,3,4,1", "1,1,nan,2,3,4,1", "1,1,1,2,3,4,x"])
def test_parse_rejects(line):
    with pytest.raises(MotParseError):
        parse_mot(line)


def test_empty_file():
    assert parse_mot("") == {}


def test_seven_fields_default_extra():
    (r,) = parse_mot("2,5,1,2,3,4,0.5")[2]
    assert r.extra == (-1, -1, -1)


def test_grouped_and_sorted():
    text = "3,1,0,0,1,1,1\n1,2,0,0,1,1,1\n3,0,0,0,1,1,1\n"
    out = parse_mot(text)
    assert list(out) == [1, 3]
    assert [r.id for r in out[3]] == [1, 0]


@pytest.mark.parametrize("value,text", [(10.0, "10"), (0.5, "0.5"), (-0.0, "0"), (1e-7, "0"), (-1.0, "-1"), (0.1234567, "0.123457")])
def test_format_number(value, text):
    assert format_number(value) == text


records = st.builds(
    MotRecord,
    st.integers(1, 1000),
    st.integers(-1, 500),
    six_dp, six_dp, six_dp, six_dp, six_dp,
    st.tuples(six_dp, six_dp, six_dp),
)


@given(st.lists(records, max_size=20))
def test_round_trip(recs):
    recs = sorted(recs, key=lambda r: r.frame)
    text = serialize_records(recs)
    parsed = parse_mot(text)
    assert [r for f in parsed for r in parsed[f]] == recs
    assert serialize_records(parsed) == text


def test_write_mot_order_and_empty():
    assert write_mot([]) == ""
    hist = [
        TrackSnapshot(2, 3, BBox(1, 2, 3, 4), 0.5),
        TrackSnapshot(1, 7, BBox(0, 0, 1, 1), 1.0),
        TrackSnapshot(2, 1, BBox(5, 5, 2, 2), 0.75),
    ]
    text = write_mot(hist)
    assert text == "1,7,0,0,1,1,1,-1,-1,-1\n2,1,5,5,2,2,0.75,-1,-1,-1\n2,3,1,2,3,4,0.5,-1,-1,-1\n"
    assert write_mot(list(reversed(hist))) == text


def test_frame_io(tmp_path):
    px = (np.arange(12, dtype=np.uint8) * 20).reshape(3, 4)
    save_frame(tmp_path / "img000002.pgm", px)
    save_frame(tmp_path / "img000010.png", px)
    (tmp_path / "notes.txt").write_text("x")
    frames = list_frames(tmp_path)
    assert list(frames) == [2, 10]
    f = load_frame(frames[2], 2)
    assert f.frame_index == 2
    np.testing.assert_array_equal(f.to_uint8(), px)


def test_duplicate_frame_numbers(tmp_path):
    px = np.zeros((2, 2), np.uint8)
    save_frame(tmp_path / "1.png", px)
    save_frame(tmp_path / "001.pgm", px)
    with pytest.raises(ValueError):
        list_frames(tmp_path)
