"""Panel container validation, subsetting, and CSV round-trips."""

import numpy as np
import pytest

from deaselect.data import (
    DataSet,
    normalize_input_subset,
    read_panel_csv,
    write_panel_csv,
)
from deaselect.exceptions import InputError


def test_dataset_shape_properties(tiny_panel):
    assert tiny_panel.n == 4
    assert tiny_panel.m == 2
    assert tiny_panel.s == 1
    assert tiny_panel.input_labels == ("x1", "x2")
    assert tiny_panel.output_labels == ("y1",)


def test_dataset_arrays_are_immutable(tiny_panel):
    with pytest.raises(ValueError):
        tiny_panel.X[0, 0] = 99.0
    with pytest.raises(ValueError):
        tiny_panel.Y[0, 0] = 99.0


def test_dataset_accepts_1d_output_row():
    data = DataSet.from_arrays(np.array([[1.0, 2.0]]), np.array([3.0, 4.0]))
    assert data.s == 1 and data.n == 2


@pytest.mark.parametrize(
    "X, Y",
    [
        ([[1.0, 2.0]], [[1.0]]),  # DMU count mismatch
        ([[1.0, -2.0]], [[1.0, 1.0]]),  # nonpositive input
        ([[1.0, 2.0]], [[1.0, 0.0]]),  # zero output
        ([[1.0, np.nan]], [[1.0, 1.0]]),  # non-finite
        ([[1.0, np.inf]], [[1.0, 1.0]]),
    ],
)
def test_dataset_rejects_bad_values(X, Y):
    with pytest.raises(InputError):
        DataSet.from_arrays(np.array(X), np.array(Y))


def test_dataset_rejects_label_length_mismatch():
    with pytest.raises(InputError):
        DataSet(
            np.array([[1.0, 2.0]]),
            np.array([[1.0, 1.0]]),
            ("a", "b"),  # two labels for one input row
            ("y",),
        )


def test_subset_inputs_keeps_order_and_labels(tiny_panel):
    sub = tiny_panel.subset_inputs((1,))
    assert sub.m == 1
    assert sub.input_labels == ("x2",)
    assert np.array_equal(sub.X, tiny_panel.X[1:2, :])
    assert np.array_equal(sub.Y, tiny_panel.Y)
    # order is preserved, not sorted
    swapped = tiny_panel.subset_inputs((1, 0))
    assert swapped.input_labels == ("x2", "x1")
    assert np.array_equal(swapped.X[0], tiny_panel.X[1])


def test_take_dmus(tiny_panel):
    head = tiny_panel.take_dmus(range(2))
    assert head.n == 2
    assert np.array_equal(head.X, tiny_panel.X[:, :2])
    with pytest.raises(InputError):
        tiny_panel.take_dmus([0, 99])
    with pytest.raises(InputError):
        tiny_panel.take_dmus([])


def test_normalize_input_subset():
    assert normalize_input_subset(None, 3) == (0, 1, 2)
    assert normalize_input_subset((2, 0), 3) == (2, 0)
    with pytest.raises(InputError):
        normalize_input_subset((), 3)
    with pytest.raises(InputError):
        normalize_input_subset((0, 0), 3)
    with pytest.raises(InputError):
        normalize_input_subset((3,), 3)


def test_csv_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(1)
    X = np.exp(rng.normal(size=(3, 7)))
    Y = np.exp(rng.normal(size=(2, 7)))
    data = DataSet.from_arrays(X, Y, ("a", "b", "c"), ("p", "q"))
    path = tmp_path / "panel.csv"
    write_panel_csv(data, path)
    back = read_panel_csv(path)
    # repr round-trip must preserve every float bit-for-bit
    assert np.array_equal(back.X, data.X)
    assert np.array_equal(back.Y, data.Y)
    assert back.input_labels == data.input_labels
    assert back.output_labels == data.output_labels


def test_csv_header_format(tmp_path, tiny_panel):
    path = tmp_path / "panel.csv"
    write_panel_csv(tiny_panel, path)
    header = path.read_text(encoding="utf-8").splitlines()[0]
    assert header == "in:x1,in:x2,out:y1"


def test_csv_read_rejects_malformed_files(tmp_path):
    cases = {
        "empty.csv": "",
        "no_outputs.csv": "in:a,in:b\n1.0,2.0\n",
        "bad_prefix.csv": "in:a,weird:y\n1.0,2.0\n",
        "input_after_output.csv": "in:a,out:y,in:b\n1.0,2.0,3.0\n",
        "ragged.csv": "in:a,out:y\n1.0\n",
        "non_numeric.csv": "in:a,out:y\n1.0,apple\n",
        "no_rows.csv": "in:a,out:y\n",
        "negative.csv": "in:a,out:y\n-1.0,2.0\n",
    }
    for name, text in cases.items():
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        with pytest.raises(InputError):
            read_panel_csv(path)


def test_csv_read_skips_blank_lines(tmp_path):
    path = tmp_path / "blank.csv"
    path.write_text("in:a,out:y\n1.0,2.0\n\n3.0,4.0\n", encoding="utf-8")
    data = read_panel_csv(path)
    assert data.n == 2
    assert np.array_equal(data.X, np.array([[1.0, 3.0]]))
