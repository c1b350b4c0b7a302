import numpy as np
import pytest
from PIL import Image

from polypseg.errors import FrameFormatError
from polypseg.imagecore import (
    Plane,
    RgbFrame,
    extract_channel,
    gradient_magnitude,
    read_frame,
    to_grayscale,
    to_hue,
    write_frame,
)

from conftest import constant_frame, random_frame


def frame_of(color):
    px = np.zeros((3, 3, 3), dtype=np.uint8)
    px[:, :] = color
    return RgbFrame(px)


class TestRgbFrame:
    def test_rejects_small_frames(self):
        with pytest.raises(ValueError):
            RgbFrame(np.zeros((2, 5, 3), dtype=np.uint8))
        with pytest.raises(ValueError):
            RgbFrame(np.zeros((5, 2, 3), dtype=np.uint8))

    def test_rejects_bad_shape_and_dtype(self):
        with pytest.raises(ValueError):
            RgbFrame(np.zeros((5, 5), dtype=np.uint8))
        with pytest.raises(ValueError):
            RgbFrame(np.zeros((5, 5, 3), dtype=np.float64))

    def test_is_immutable(self):
        f = constant_frame(4, 4)
        with pytest.raises(ValueError):
            f.pixels[0, 0, 0] = 1


class TestToGrayscale:
    def test_black_maps_to_zero(self):
        assert to_grayscale(frame_of((0, 0, 0))).data[1, 1] == 0

    def test_white_maps_to_255(self):
        assert to_grayscale(frame_of((255, 255, 255))).data[1, 1] == 255

    def test_pure_red(self):
        # hand oracle: round(0.299 * 255) = round(76.245) = 76
        assert to_grayscale(frame_of((255, 0, 0))).data[1, 1] == 76

    def test_monotone_under_common_scaling(self, rng):
        f = random_frame(rng, 12, 9)
        for factor in (0.9, 0.5, 0.13):
            scaled = RgbFrame(np.floor(f.pixels * factor).astype(np.uint8))
            assert np.all(to_grayscale(scaled).data <= to_grayscale(f).data)

    def test_deterministic(self, rng):
        f = random_frame(rng, 7, 7)
        assert np.array_equal(to_grayscale(f).data, to_grayscale(f).data)


class TestExtractChannel:
    def test_projections(self):
        f = frame_of((10, 20, 30))
        assert extract_channel(f, "R").data[0, 0] == 10
        assert extract_channel(f, "G").data[0, 0] == 20
        assert extract_channel(f, "B").data[0, 0] == 30

    def test_unknown_channel(self):
        with pytest.raises(ValueError):
            extract_channel(frame_of((1, 2, 3)), "X")

    def test_lossless_reassembly(self, rng):
        f = random_frame(rng, 11, 8)
        rebuilt = np.stack(
            [extract_channel(f, c).data for c in "RGB"], axis=2
        )
        assert np.array_equal(rebuilt, f.pixels)


class TestToHue:
    def test_pure_red_is_zero(self):
        assert to_hue(frame_of((255, 0, 0))).data[0, 0] == 0

    def test_pure_green(self):
        # hand oracle: round(120 / 360 * 255) = 85
        assert to_hue(frame_of((0, 255, 0))).data[0, 0] == 85

    def test_achromatic_is_zero(self):
        assert to_hue(frame_of((128, 128, 128))).data[0, 0] == 0
        assert to_hue(frame_of((0, 0, 0))).data[0, 0] == 0

    def test_stays_in_byte_range(self, rng):
        h = to_hue(random_frame(rng, 16, 16)).data
        assert h.min() >= 0 and h.max() <= 255

    def test_matches_scalar_oracle(self, rng):
        # scalar re-derivation of the standard hue formula, one pixel at a time
        def hue_byte(r, g, b):
            mx, mn = max(r, g, b), min(r, g, b)
            if mx == mn:
                return 0
            delta = float(mx - mn)
            if mx == r:
                h6 = ((g - b) / delta) % 6.0
            elif mx == g:
                h6 = (b - r) / delta + 2.0
            else:
                h6 = (r - g) / delta + 4.0
            return int(np.floor(60.0 * h6 * 255.0 / 360.0 + 0.5))

        f = random_frame(rng, 6, 6)
        h = to_hue(f).data
        for y in range(6):
            for x in range(6):
                r, g, b = (int(v) for v in f.pixels[y, x])
                assert h[y, x] == hue_byte(r, g, b), (r, g, b)


class TestGradientMagnitude:
    def test_constant_plane_is_zero(self):
        g = gradient_magnitude(Plane(np.full((6, 7), 42, np.uint8)))
        assert np.all(g.data == 0)

    def test_vertical_step(self):
        # step 0|255 between columns 3 and 4: gradient 255 at columns 3 and 4
        arr = np.zeros((5, 8), dtype=np.uint8)
        arr[:, 4:] = 255
        g = gradient_magnitude(Plane(arr)).data
        for row in range(1, 4):
            assert g[row, 3] == 255 and g[row, 4] == 255
            assert np.all(g[row, :3] == 0) and np.all(g[row, 5:] == 0)

    def test_single_bright_pixel(self):
        arr = np.zeros((7, 7), dtype=np.uint8)
        arr[3, 3] = 255
        g = gradient_magnitude(Plane(arr)).data
        assert g[3, 3] == 0
        for y, x in ((2, 3), (4, 3), (3, 2), (3, 4)):
            assert g[y, x] == 255

    def test_non_negative(self, rng):
        plane = Plane(rng.integers(0, 256, size=(9, 9)).astype(np.uint8))
        assert np.all(gradient_magnitude(plane).data >= 0)


class TestPngIo:
    def test_round_trip(self, rng, tmp_path):
        f = random_frame(rng, 10, 6)
        p = tmp_path / "f.png"
        write_frame(f, p)
        assert np.array_equal(read_frame(p).pixels, f.pixels)

    def test_rgba_alpha_discarded(self, rng, tmp_path):
        rgb = rng.integers(0, 256, size=(5, 5, 3)).astype(np.uint8)
        rgba = np.dstack([rgb, np.full((5, 5), 37, np.uint8)])
        p = tmp_path / "a.png"
        Image.fromarray(rgba, mode="RGBA").save(p)
        assert np.array_equal(read_frame(p).pixels, rgb)

    def test_rejects_non_png(self, rng, tmp_path):
        p = tmp_path / "f.jpg"
        Image.fromarray(random_frame(rng, 5, 5).pixels).save(p, format="JPEG")
        with pytest.raises(FrameFormatError):
            read_frame(p)

    def test_rejects_grayscale_png(self, tmp_path):
        p = tmp_path / "g.png"
        Image.fromarray(np.zeros((5, 5), np.uint8), mode="L").save(p)
        with pytest.raises(FrameFormatError):
            read_frame(p)

    def test_rejects_corrupt_file(self, tmp_path):
        p = tmp_path / "bad.png"
        p.write_bytes(b"not a png at all")
        with pytest.raises(FrameFormatError):
            read_frame(p)
