"""Functional reference behavior and comparison semantics."""

import numpy as np
import pytest

from treefab import (
    DimsMismatch,
    LayerConfig,
    LayerKind,
    compare,
    conv_reference,
    total_macs,
)
from treefab.errors import ShapeMismatch

from common import TINY, random_data


def test_unit_filter():
    layer = LayerConfig(LayerKind.CONV, r=1, s=1, c=1, g=1, k=1, n=1, x=1, y=1)
    out = conv_reference(
        layer,
        np.full((1, 1, 1, 1, 1), 5, dtype=np.int32),
        np.full((1, 1, 1, 1, 1), 2, dtype=np.int32),
    )
    assert out.output.item() == 10
    assert out.mac_count == 1


def test_tiny_all_ones():
    ones_in = np.ones((1, 1, 6, 5, 5), dtype=np.int32)
    ones_w = np.ones((1, 6, 6, 3, 3), dtype=np.int32)
    out = conv_reference(TINY, ones_in, ones_w).output
    assert (out == 54).all()  # every output sums an R*S*C window of ones


def test_group_independence():
    layer = LayerConfig(LayerKind.CONV, r=2, s=2, c=3, g=2, k=4, n=1, x=4, y=4)
    inputs, weights = random_data(layer, seed=3)
    base = conv_reference(layer, inputs, weights).output
    zeroed = inputs.copy()
    zeroed[:, 1] = 0
    out = conv_reference(layer, zeroed, weights).output
    assert (out[:, 0] == base[:, 0]).all()
    assert not out[:, 1].any()


def test_linearity():
    inputs, weights = random_data(TINY, seed=4)
    base = conv_reference(TINY, inputs, weights).output
    scaled = conv_reference(TINY, 3 * inputs, weights).output
    assert (scaled == 3 * base).all()


def test_zero_weights():
    inputs, weights = random_data(TINY, seed=5)
    out = conv_reference(TINY, inputs, np.zeros_like(weights)).output
    assert not out.any()


def test_padding_and_stride():
    layer = LayerConfig(LayerKind.CONV, r=3, s=3, c=2, g=1, k=2, n=2,
                        x=7, y=7, stride=2, padding=1)
    inputs, weights = random_data(layer, seed=6)
    out = conv_reference(layer, inputs, weights)
    assert out.output.shape == (2, 1, 2, 4, 4)
    # corner output only sees the in-bounds 2x2 window
    manual = 0
    for c in range(2):
        for r in range(3):
            for s in range(3):
                ix, iy = r - 1, s - 1
                if 0 <= ix < 7 and 0 <= iy < 7:
                    manual += int(inputs[0, 0, c, ix, iy]) * \
                        int(weights[0, 0, c, r, s])
    assert out.output[0, 0, 0, 0, 0] == manual


def test_mac_count_matches_layer():
    out = conv_reference(TINY, *random_data(TINY, seed=7))
    assert out.mac_count == total_macs(TINY) == 2916


def test_shape_rejection():
    inputs, weights = random_data(TINY, seed=8)
    with pytest.raises(ShapeMismatch):
        conv_reference(TINY, inputs[:, :, :5], weights)


class TestCompare:
    def test_identical(self):
        a = np.arange(12, dtype=np.int32).reshape(3, 4)
        assert compare(a, a.copy()).ok

    def test_off_by_one_reports_coordinate(self):
        a = np.zeros((2, 2), dtype=np.int32)
        b = a.copy()
        b[1, 0] = 1
        result = compare(a, b)
        assert not result.ok
        assert result.first_mismatch[0] == (1, 0)
        assert "(1, 0)" in result.report()

    def test_float_tolerance(self):
        a = np.array([1.0], dtype=np.float32)
        b = np.array([1.0 + 1e-6], dtype=np.float32)
        assert compare(a, b, tolerance=1e-5).ok
        assert not compare(a, b, tolerance=1e-8).ok

    def test_dims_mismatch(self):
        with pytest.raises(DimsMismatch):
            compare(np.zeros((2, 2)), np.zeros((2, 3)))
