import numpy as np
import pytest
from PIL import Image

from graphfam.centrality import CentralityProfile
from graphfam.errors import InputFormatError
from graphfam.imagegen import (
    FeatureImage,
    export_png,
    layout_for,
    load_image,
    pixel_to_feature,
    save_image,
    to_image,
)


def make_profile(values):
    return CentralityProfile(values=np.asarray(values, dtype=float), registry_hash="ab" * 32)


class TestLayout:
    def test_production_size(self):
        layout = layout_for(426)
        assert (layout.side, layout.pad) == (42, 60)

    def test_single_api(self):
        layout = layout_for(1)
        assert (layout.side, layout.pad) == (2, 0)

    def test_perfect_square(self):
        layout = layout_for(100)
        assert (layout.side, layout.pad) == (20, 0)

    @pytest.mark.parametrize("s", [1, 2, 3, 17, 64, 100, 426, 1000])
    def test_geometry_invariants(self, s):
        layout = layout_for(s)
        assert layout.side ** 2 == 4 * s + layout.pad
        assert 0 <= layout.pad < 2 * layout.side + 1


class TestPixelToFeature:
    def test_origin(self):
        assert pixel_to_feature(layout_for(426), 0, 0) == (0, "degree")

    def test_pad_pixel(self):
        # flat 41*42+41 = 1763 >= 1704
        assert pixel_to_feature(layout_for(426), 41, 41) is None

    def test_last_feature_pixel(self):
        # flat 1703 = 40*42 + 23 -> api 425, remainder 3 (harmonic)
        assert pixel_to_feature(layout_for(426), 40, 23) == (425, "harmonic")

    def test_out_of_bounds(self):
        with pytest.raises(ValueError):
            pixel_to_feature(layout_for(426), 42, 0)

    @pytest.mark.parametrize("s", [1, 100, 426])
    def test_bijection(self, s):
        layout = layout_for(s)
        seen = {}
        for row in range(layout.side):
            for col in range(layout.side):
                feat = pixel_to_feature(layout, row, col)
                flat = row * layout.side + col
                if flat < 4 * s:
                    assert feat is not None
                    assert feat not in seen
                    seen[feat] = flat
                    assert flat == feat[0] * 4 + {"degree": 0, "katz": 1,
                                                  "closeness": 2, "harmonic": 3}[feat[1]]
                else:
                    assert feat is None
        assert len(seen) == 4 * s


class TestToImage:
    def test_all_zero_profile(self):
        img = to_image(make_profile(np.zeros((3, 4))), layout_for(3))
        assert np.all(img.pixels == 0.0)

    def test_single_hot_row(self):
        values = np.zeros((3, 4))
        values[0] = 1.0
        img = to_image(make_profile(values), layout_for(3))
        flat = img.pixels.reshape(-1)
        assert np.all(flat[:4] == 255.0)
        assert np.all(flat[4:] == 0.0)

    def test_placement_round_trip(self):
        s = 7
        layout = layout_for(s)
        values = np.arange(4 * s, dtype=float).reshape(s, 4) / (4 * s)
        img = to_image(make_profile(values), layout)
        for row in range(layout.side):
            for col in range(layout.side):
                feat = pixel_to_feature(layout, row, col)
                pix = img.pixels[row, col]
                if feat is None:
                    assert pix == 0.0
                else:
                    api, kind = feat
                    cols = {"degree": 0, "katz": 1, "closeness": 2, "harmonic": 3}
                    assert pix == 255.0 * values[api, cols[kind]]

    def test_scale_linearity(self):
        values = np.random.default_rng(0).random((5, 4))
        layout = layout_for(5)
        img1 = to_image(make_profile(values), layout)
        img2 = to_image(make_profile(0.5 * values), layout)
        assert np.allclose(img2.pixels, 0.5 * img1.pixels)

    def test_size_mismatch(self):
        with pytest.raises(InputFormatError):
            to_image(make_profile(np.zeros((3, 4))), layout_for(4))


class TestPngExport:
    def test_all_zero_black(self, tmp_path):
        img = to_image(make_profile(np.zeros((3, 4))), layout_for(3))
        path = tmp_path / "img.png"
        export_png(img, path)
        arr = np.asarray(Image.open(path))
        assert arr.dtype == np.uint8
        assert np.all(arr == 0)

    def test_full_intensity_and_half_even(self, tmp_path):
        layout = layout_for(1)
        pixels = np.array([[255.0, 127.5], [128.5, 1.0]])
        img = FeatureImage(pixels=pixels, layout=layout, registry_hash="00" * 32,
                           source_hash="11" * 32)
        path = tmp_path / "img.png"
        export_png(img, path)
        arr = np.asarray(Image.open(path))
        assert arr[0, 0] == 255
        assert arr[0, 1] == 128  # round half to even
        assert arr[1, 0] == 128
        assert arr[1, 1] == 1

    def test_cache_round_trip(self, tmp_path):
        values = np.random.default_rng(1).random((6, 4))
        img = to_image(make_profile(values), layout_for(6))
        path = tmp_path / "img.cimg"
        save_image(img, path)
        loaded = load_image(path)
        assert loaded.layout == img.layout
        assert loaded.source_hash == img.source_hash
        assert loaded.pixels.tobytes() == img.pixels.tobytes()
