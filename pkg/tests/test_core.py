import json
import math

import numpy as np
import pytest

from photoloop.core import (
    Category,
    EditAction,
    GenerativeInstruction,
    ImageState,
    InvalidImage,
    Origin,
    PixelImage,
    ProceduralParams,
    Scale,
    action_from_json,
    content_hash,
    decode_image_base64,
    downscale,
    encode_png_base64,
    read_image,
    state_to_json,
    write_image,
)


def block_mean_oracle(px, f):
    h, w, _ = px.shape
    oh, ow = math.ceil(h / f), math.ceil(w / f)
    out = np.zeros((oh, ow, 3))
    for i in range(oh):
        for j in range(ow):
            for c in range(3):
                vals = [px[y, x, c] for y in range(i * f, min(h, (i + 1) * f)) for x in range(j * f, min(w, (j + 1) * f))]
                out[i, j, c] = sum(vals) / len(vals)
    return out


class TestPixelImage:
    def test_rejects_out_of_range(self):
        with pytest.raises(InvalidImage):
            PixelImage(np.full((2, 2, 3), 1.5))

    def test_rejects_nan_and_bad_shape(self):
        with pytest.raises(InvalidImage):
            PixelImage(np.full((2, 2, 3), np.nan))
        with pytest.raises(InvalidImage):
            PixelImage(np.zeros((2, 2)))
        with pytest.raises(InvalidImage):
            PixelImage(np.zeros((0, 2, 3)))

    def test_immutable(self):
        im = PixelImage.constant(2, 2)
        with pytest.raises(ValueError):
            im.pixels[0, 0, 0] = 1.0

    def test_copy_on_construct(self):
        arr = np.zeros((2, 2, 3))
        im = PixelImage(arr)
        arr[0, 0, 0] = 1.0
        assert im.pixels[0, 0, 0] == 0.0

    def test_dims(self):
        im = PixelImage(np.zeros((3, 5, 3)))
        assert (im.width, im.height) == (5, 3)


class TestDownscale:
    def test_constant_half(self):
        out = downscale(PixelImage.constant(4, 4, 0.5), Scale.HALF)
        assert out.shape == (2, 2, 3)
        assert np.all(out.pixels == 0.5)

    def test_forced_mean(self):
        px = np.array([[0.0, 1.0], [1.0, 0.0]])
        out = downscale(PixelImage.from_array(px), "half")
        assert out.shape == (1, 1, 3)
        assert out.pixels[0, 0, 0] == 0.5

    def test_5x5_quarter_matches_loop_oracle(self, rng):
        px = rng.random((5, 5, 3))
        out = downscale(PixelImage(px), Scale.QUARTER)
        assert out.shape == (2, 2, 3)
        np.testing.assert_allclose(out.pixels, block_mean_oracle(px, 4), atol=1e-15)

    @pytest.mark.parametrize("h,w", [(7, 3), (1, 1), (9, 16), (2, 9)])
    def test_ceil_dims_and_oracle(self, rng, h, w):
        px = rng.random((h, w, 3))
        for f in (2, 4):
            out = downscale(PixelImage(px), f)
            assert out.shape == (math.ceil(h / f), math.ceil(w / f), 3)
            np.testing.assert_allclose(out.pixels, block_mean_oracle(px, f), atol=1e-15)

    def test_full_is_identity(self, rng):
        im = PixelImage(rng.random((3, 3, 3)))
        assert downscale(im, Scale.FULL) is im


class TestContentHash:
    def test_deterministic(self, rng):
        im = PixelImage(rng.random((6, 6, 3)))
        assert len({content_hash(im) for _ in range(1000)}) == 1

    def test_half_unit_change_differs(self):
        a = np.full((4, 4, 3), 0.25)
        b = a.copy()
        b[1, 1, 0] = 0.75
        assert content_hash(PixelImage(a)) != content_hash(PixelImage(b))

    def test_sub_quantum_change_equal(self):
        a = np.full((4, 4, 3), 0.31)  # 0.3 * 255 = 76.5 sits on a rounding boundary
        b = a.copy()
        b[2, 2, 1] += 1e-6
        assert content_hash(PixelImage(a)) == content_hash(PixelImage(b))

    def test_shape_participates(self):
        assert content_hash(PixelImage.constant(2, 8)) != content_hash(PixelImage.constant(8, 2))

    def test_fits_64_bits(self, rng):
        assert 0 <= content_hash(PixelImage(rng.random((3, 3, 3)))) < 2**64


class TestActions:
    def test_payload_variants(self):
        a = EditAction("b", Category.GLOBAL_TONE, "x", ProceduralParams.of("brightness", delta=0.1))
        g = EditAction("g", Category.SEMANTIC_EDIT, "sky", GenerativeInstruction("sky"))
        assert a.is_procedural and not g.is_procedural
        with pytest.raises(TypeError):
            EditAction("bad", Category.GLOBAL_TONE, "x", {"delta": 1})

    def test_json_roundtrip(self):
        a = EditAction("b", Category.GLOBAL_TONE, "x", ProceduralParams.of("brightness", delta=0.1), Origin.USER_GUIDED)
        wire = a.to_json()
        assert wire["params"] == {"operator": "brightness", "delta": 0.1}
        back = action_from_json(json.loads(json.dumps(wire)), Origin.USER_GUIDED)
        assert back == a

    def test_category_parse_aliases(self):
        assert Category.parse("SemanticEdit") is Category.SEMANTIC_EDIT
        assert Scale.parse("1/4") is Scale.QUARTER


class TestStateAndIO:
    def test_advance_tracks_history(self):
        s = ImageState(PixelImage.constant(2, 2))
        a = EditAction("a", Category.GLOBAL_TONE, "x", GenerativeInstruction("x"))
        s2 = s.advance(a, PixelImage.constant(2, 2, 0.6))
        assert s2.step == len(s2.history) == 1 and s2.history == ("a",)
        assert json.loads(state_to_json(s2))["history"] == ["a"]

    def test_png_roundtrip_8bit(self, tmp_path, rng):
        im = PixelImage.from_uint8(rng.integers(0, 256, (5, 7, 3), dtype=np.uint8))
        write_image(im, tmp_path / "a.png")
        assert read_image(tmp_path / "a.png") == im

    def test_jpeg_writes_and_reads(self, tmp_path):
        write_image(PixelImage.constant(8, 8, 0.5), tmp_path / "a.jpg")
        back = read_image(tmp_path / "a.jpg")
        assert back.shape == (8, 8, 3)
        assert abs(back.pixels.mean() - 0.5) < 0.01

    def test_base64_roundtrip(self, rng):
        im = PixelImage.from_uint8(rng.integers(0, 256, (4, 4, 3), dtype=np.uint8))
        assert decode_image_base64(encode_png_base64(im)) == im
