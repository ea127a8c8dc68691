import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from asrga.errors import DimensionError
from asrga.matrixio import read_matrix, write_matrix

finite = st.floats(allow_nan=False, allow_infinity=False)
matrices = st.tuples(st.integers(1, 6), st.integers(1, 6)).flatmap(lambda s: arrays(np.float64, s, elements=finite))


@settings(max_examples=60, deadline=None)
@given(A=matrices, ext=st.sampled_from([".txt", ".csv", ".mat"]))
def test_roundtrip_bit_exact(tmp_path_factory, A, ext):
    path = tmp_path_factory.mktemp("m") / f"a{ext}"
    write_matrix(path, A)
    B = read_matrix(path)
    assert B.shape == A.shape
    assert B.tobytes() == (A + 0.0).tobytes() or np.array_equal(A, B)


def test_plain_format_layout(tmp_path):
    write_matrix(tmp_path / "a.txt", [[1.0, 2.5], [3.0, 0.1]])
    assert (tmp_path / "a.txt").read_text() == "2 2\n1 2.5\n3 0.10000000000000001\n"
    write_matrix(tmp_path / "a.csv", [[1.0, 2.5]])
    assert (tmp_path / "a.csv").read_text() == "1,2.5\n"


def test_vector_written_as_column(tmp_path):
    write_matrix(tmp_path / "v.txt", np.array([1.0, 2.0, 3.0]))
    assert read_matrix(tmp_path / "v.txt").shape == (3, 1)


@pytest.mark.parametrize(
    "name, text, match",
    [
        ("a.txt", "2 2\n1 2 3\n", "header says 2x2"),
        ("a.txt", "x y\n", "two integers"),
        ("a.txt", "", "header"),
        ("a.csv", "1,2\n3\n", "line 2"),
        ("a.csv", "\n", "empty"),
    ],
)
def test_malformed_files(tmp_path, name, text, match):
    (tmp_path / name).write_text(text)
    with pytest.raises(DimensionError, match=match):
        read_matrix(tmp_path / name)


def test_rejects_3d(tmp_path):
    with pytest.raises(DimensionError):
        write_matrix(tmp_path / "a.txt", np.zeros((2, 2, 2)))
