import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import sparse

from sfwkit.data import (
    Dataset,
    ParseError,
    load_dataset,
    parse_csv,
    parse_libsvm,
    parse_synth_spec,
    serialize_libsvm,
    synth_dataset,
)


def _libsvm(text, **kw):
    return parse_libsvm(io.StringIO(text), **kw)


def test_libsvm_example():
    ds = _libsvm("+1 1:0.5 3:2\n-1 2:1\n")
    assert ds.task == "classification" and ds.X.shape == (2, 3)
    np.testing.assert_array_equal(ds.X.to_dense(), [[0.5, 0, 2], [0, 1, 0]])
    np.testing.assert_array_equal(ds.y, [1, -1])


def test_libsvm_zero_one_labels_map_to_signs():
    ds = _libsvm("0 1:1\n1 1:2\n")
    np.testing.assert_array_equal(ds.y, [-1, 1])


def test_libsvm_regression_labels():
    ds = _libsvm("0.5 1:1\n-2.25 2:1\n")
    assert ds.task == "regression"
    np.testing.assert_array_equal(ds.y, [0.5, -2.25])


def test_libsvm_skips_blank_and_comments_and_drops_zeros():
    ds = _libsvm("# header\n\n1 1:0 2:3  # trailing\n-1\n")
    assert ds.n == 2 and ds.X.nnz == 1 and ds.d == 2


def test_libsvm_accepts_bytes():
    ds = parse_libsvm(io.BytesIO(b"1 2:1.5\n"))
    assert ds.X.to_dense()[0, 1] == 1.5


def test_libsvm_n_features():
    assert _libsvm("1 1:1\n", n_features=4).d == 4
    with pytest.raises(ParseError):
        _libsvm("1 5:1\n", n_features=4)


@pytest.mark.parametrize(
    "text, line",
    [
        ("1 1:1\n1 0:2\n", 2),
        ("1 2:1 1:1\n", 1),
        ("1 1:1\n1 1:1\n-1 2:x\n", 3),
        ("abc 1:1\n", 1),
        ("1 3\n", 1),
        ("1 2:1 2:3\n", 1),
        ("1 1:nan\n", 1),
    ],
)
def test_libsvm_errors_report_line(text, line):
    with pytest.raises(ParseError) as info:
        _libsvm(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_libsvm_bad_utf8():
    with pytest.raises(ParseError):
        parse_libsvm(io.BytesIO(b"1 1:\xff\n"))


@st.composite
def datasets(draw):
    n = draw(st.integers(0, 8))
    d = draw(st.integers(1, 6))
    task = draw(st.sampled_from(["classification", "regression"]))
    finite = st.floats(-1e6, 1e6, allow_nan=False, allow_subnormal=False)
    A = np.array(draw(st.lists(st.lists(finite, min_size=d, max_size=d), min_size=n, max_size=n)), dtype=float)
    A = A.reshape(n, d)
    mask = np.array(draw(st.lists(st.booleans(), min_size=n * d, max_size=n * d)), dtype=bool).reshape(n, d)
    A[mask] = 0.0
    if task == "classification":
        y = np.array(draw(st.lists(st.sampled_from([-1.0, 1.0]), min_size=n, max_size=n)))
    else:
        y = np.array(draw(st.lists(finite, min_size=n, max_size=n)))
    return Dataset(sparse.csr_matrix(A), y, task=task)


@given(datasets())
def test_libsvm_round_trip(ds):
    back = _libsvm(serialize_libsvm(ds), n_features=ds.d, task=ds.task)
    assert back.task == ds.task and back.X.shape == ds.X.shape
    np.testing.assert_array_equal(back.X.to_dense(), ds.X.to_dense())
    np.testing.assert_array_equal(back.y, ds.y)


def test_csv_example():
    ds = parse_csv(io.StringIO("a,b,y\n1,2,3\n4,5,6\n"))
    assert ds.task == "regression" and not ds.X.is_sparse
    np.testing.assert_array_equal(ds.X.to_dense(), [[1, 2], [4, 5]])
    np.testing.assert_array_equal(ds.y, [3, 6])


def test_csv_target_by_name_and_index():
    text = "y,a\n1,2\n3,4\n"
    for target in ("y", 0, -2, "0"):
        ds = parse_csv(io.StringIO(text), target=target)
        np.testing.assert_array_equal(ds.y, [1, 3])
    with pytest.raises(ParseError):
        parse_csv(io.StringIO(text), target="z")
    with pytest.raises(ParseError):
        parse_csv(io.StringIO(text), target=5)


def test_csv_non_numeric_cell_location():
    with pytest.raises(ParseError) as info:
        parse_csv(io.StringIO("a,y\n1,2\n3,oops\n"))
    assert (info.value.line, info.value.column) == (3, 2)


def test_csv_ragged_row():
    with pytest.raises(ParseError) as info:
        parse_csv(io.StringIO("a,y\n1\n"))
    assert info.value.line == 2


def test_csv_empty_and_header_only():
    with pytest.raises(ParseError):
        parse_csv(io.StringIO(""))
    ds = parse_csv(io.StringIO("a,b,y\n"))
    assert ds.n == 0 and ds.d == 2


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.eye(2), [1.0], task="regression")
    with pytest.raises(ValueError):
        Dataset(np.eye(2), [1.0, 0.5])
    with pytest.raises(ValueError):
        Dataset(np.eye(2), [1.0, 1.0], task="ranking")


def test_synth_deterministic():
    a = synth_dataset(3, 40, 7, density=0.4)
    b = synth_dataset(3, 40, 7, density=0.4)
    np.testing.assert_array_equal(a.X.to_dense(), b.X.to_dense())
    np.testing.assert_array_equal(a.y, b.y)
    c = synth_dataset(4, 40, 7, density=0.4)
    assert not np.array_equal(a.X.to_dense(), c.X.to_dense())


def test_synth_storage_and_density():
    dense = synth_dataset(0, 30, 6, density=1.0)
    assert not dense.X.is_sparse and dense.X.nnz == 30 * 6
    sp = synth_dataset(0, 2000, 10, density=0.1)
    assert sp.X.is_sparse and abs(sp.X.nnz / 20000 - 0.1) < 0.02
    assert set(np.unique(sp.y)) <= {-1.0, 1.0}
    reg = synth_dataset(0, 30, 6, task="regression")
    assert reg.task == "regression"
    with pytest.raises(ValueError):
        synth_dataset(0, 10, 3, density=0.0)


def test_synth_spec():
    spec = parse_synth_spec("n=683, d=10, task=regression, seed=2, noise=0.5")
    assert spec == {"n": 683, "d": 10, "task": "regression", "seed": 2, "noise": 0.5, "density": 1.0}
    for bad in ("n", "q=1", "n=abc"):
        with pytest.raises(ValueError):
            parse_synth_spec(bad)


def test_load_dataset_data_dir(tmp_path, monkeypatch):
    (tmp_path / "tiny.svm").write_text("1 1:1\n-1 2:1\n")
    monkeypatch.setenv("SFWKIT_DATA_DIR", str(tmp_path))
    monkeypatch.chdir("/")
    ds = load_dataset("tiny.svm", "libsvm")
    assert ds.n == 2 and ds.name == "tiny.svm"
    with pytest.raises(OSError, match="missing.svm"):
        load_dataset("missing.svm", "libsvm")
    with pytest.raises(ValueError):
        load_dataset("tiny.svm", "arff")
    assert load_dataset("n=5,d=2", "synth").n == 5
