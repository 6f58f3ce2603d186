import numpy as np
import pytest

from pqsm.errors import ParseError
from pqsm.images import (
    image_to_raster,
    raster_to_image,
    read_pgm,
    write_pgm16,
    write_ppm,
)


class TestOrientation:
    def test_round_trip_inverse(self, rng):
        raster = rng.random((7, 5))
        np.testing.assert_array_equal(image_to_raster(raster_to_image(raster)), raster)
        image = rng.random((5, 7))
        np.testing.assert_array_equal(raster_to_image(image_to_raster(image)), image)

    def test_v_axis_becomes_top_row(self):
        # raster[u, v]: v grows upward; image row 0 is the top
        raster = np.zeros((3, 2))
        raster[0, 1] = 1.0
        image = raster_to_image(raster)
        assert image.shape == (2, 3)
        assert image[0, 0] == 1.0

    def test_color_raster(self, rng):
        raster = rng.integers(0, 256, size=(4, 6, 3)).astype(np.uint8)
        image = raster_to_image(raster)
        assert image.shape == (6, 4, 3)
        np.testing.assert_array_equal(image_to_raster(image), raster)


class TestPgm16:
    def test_round_trip_quantized(self, rng, tmp_path):
        image = rng.random((9, 13))
        path = tmp_path / "map.pgm"
        write_pgm16(path, image)
        back = read_pgm(path)
        assert back.shape == image.shape
        np.testing.assert_allclose(back, image, atol=0.5 / 65535 + 1e-12)

    def test_exact_codes_survive(self, tmp_path):
        image = np.array([[0.0, 1.0], [32768 / 65535, 1 / 65535]])
        path = tmp_path / "codes.pgm"
        write_pgm16(path, image)
        np.testing.assert_array_equal(read_pgm(path), image)

    def test_rejects_out_of_range(self, tmp_path):
        with pytest.raises(ValueError):
            write_pgm16(tmp_path / "bad.pgm", np.array([[1.5]]))
        with pytest.raises(ValueError):
            write_pgm16(tmp_path / "bad.pgm", np.array([[-0.1]]))

    def test_reads_8_bit(self, tmp_path):
        path = tmp_path / "gray8.pgm"
        path.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 255, 128, 64]))
        img = read_pgm(path)
        np.testing.assert_allclose(
            img, np.array([[0, 255], [128, 64]]) / 255.0, rtol=1e-12
        )

    def test_header_comments_skipped(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P5\n# made by hand\n1 1\n# another\n255\n\x7f")
        assert read_pgm(path)[0, 0] == pytest.approx(127 / 255)

    def test_malformed_magic(self, tmp_path):
        path = tmp_path / "bad.pgm"
        path.write_bytes(b"P4\n1 1\n255\n\x00")
        with pytest.raises(ParseError):
            read_pgm(path)

    def test_truncated_pixels(self, tmp_path):
        path = tmp_path / "short.pgm"
        path.write_bytes(b"P5\n4 4\n65535\n\x00\x01")
        with pytest.raises(ParseError):
            read_pgm(path)


class TestPpm:
    def test_writes_p6(self, rng, tmp_path):
        image = rng.integers(0, 256, size=(3, 5, 3)).astype(np.uint8)
        path = tmp_path / "tex.ppm"
        write_ppm(path, image)
        blob = path.read_bytes()
        assert blob.startswith(b"P6\n5 3\n255\n")
        assert blob[len(b"P6\n5 3\n255\n"):] == image.tobytes()
