import math

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from conftest import DEAD_URL
from photoloop.core import PixelImage
from photoloop.evaluator import (
    UGC_DECODING,
    AllScorersFailed,
    ConfigMismatch,
    Decision,
    Evaluator,
    ImageTooSmall,
    ScoreReport,
    ScorerConfig,
    ScorerEntry,
    colorfulness_score,
    compare_and_decide,
    contrast_score,
    default_scorer_config,
    evaluate,
    exposure_score,
    ggd_fit,
    nss_quality,
    rms_contrast,
    sharpness_score,
)
from photoloop.remote import Endpoint


def fixed(*raws, weights=(1.0, 2.0, 2.0, 0.8)):
    return ScorerConfig(tuple(ScorerEntry(f"s{i}", w, fn=lambda im, r=r: r) for i, (w, r) in enumerate(zip(weights, raws))))


def report(agg, key=(("a", 1.0),)):
    return ScoreReport((("a", agg),), (("a", 1.0),), agg, 0, (), key)


IMG = PixelImage.constant(4, 4, 0.5)


class TestAggregate:
    def test_equal_raws(self):
        assert evaluate(IMG, fixed(0.5, 0.5, 0.5, 0.5)).aggregate == 0.5

    def test_first_slot_only(self):
        assert evaluate(IMG, fixed(1.0, 0.0, 0.0, 0.0)).aggregate == pytest.approx(1.0 / 5.8, abs=1e-12)

    def test_default_normalizer(self):
        assert default_scorer_config().normalizer == 5.8

    def test_per_scorer_ids_match_config(self, photo):
        r = evaluate(photo)
        assert [k for k, _ in r.per_scorer] == [e.scorer_id for e in default_scorer_config().entries]
        assert all(0.0 <= v <= 1.0 for _, v in r.per_scorer)

    def test_native_range_and_direction(self):
        cfg = ScorerConfig((
            ScorerEntry("up", 1.0, fn=lambda im: 7.0, native_range=(0, 10)),
            ScorerEntry("down", 1.0, fn=lambda im: 2.5, native_range=(0, 10), higher_is_better=False),
        ))
        r = evaluate(IMG, cfg)
        assert r.raw("up") == pytest.approx(0.7) and r.raw("down") == pytest.approx(0.75)

    def test_raw_clamped(self):
        r = evaluate(IMG, ScorerConfig((ScorerEntry("x", 1.0, fn=lambda im: 3.0),)))
        assert r.raw("x") == 1.0

    def test_invalid_weight(self):
        with pytest.raises(ValueError):
            ScorerEntry("x", 0.0, builtin="nss_quality")
        with pytest.raises(ValueError):
            ScorerConfig(())


class TestExternalScorers:
    def test_external_scorer(self, mock_server):
        cfg = ScorerConfig((ScorerEntry("ext", 2.0, endpoint=Endpoint(mock_server.base + "/scorer", retries=0)),))
        assert evaluate(IMG, cfg).aggregate == pytest.approx(0.7)

    def test_ugc_request_carries_decoding(self, mock_server):
        mock_server.requests.clear()
        e = Endpoint(mock_server.base + "/scorer", retries=0)
        evaluate(IMG, ScorerConfig((ScorerEntry("ugc", 0.8, endpoint=e, decoding=dict(UGC_DECODING)),)))
        body = mock_server.requests[-1][1]
        assert body["decoding"] == {"temperature": 0.7, "top_p": 0.9, "max_tokens": 32}
        assert "reference_text" in body

    def test_one_dead_of_four(self):
        dead = Endpoint(DEAD_URL, timeout=1.0, retries=0)
        raws = (0.9, 0.3, 0.6)
        cfg = ScorerConfig((
            ScorerEntry("s0", 1.0, fn=lambda im: raws[0]),
            ScorerEntry("s1", 2.0, fn=lambda im: raws[1]),
            ScorerEntry("s2", 2.0, endpoint=dead),
            ScorerEntry("s3", 0.8, fn=lambda im: raws[2]),
        ))
        r = evaluate(IMG, cfg)
        assert r.omitted == ("s2",)
        assert r.aggregate == pytest.approx((1.0 * 0.9 + 2.0 * 0.3 + 0.8 * 0.6) / 3.8, abs=1e-12)

    def test_all_failed(self):
        dead = Endpoint(DEAD_URL, timeout=1.0, retries=0)
        with pytest.raises(AllScorersFailed):
            evaluate(IMG, ScorerConfig((ScorerEntry("d", 1.0, endpoint=dead),)))

    def test_small_image_skips_nss_only(self):
        r = evaluate(PixelImage.constant(8, 8, 0.5))
        assert r.omitted == ("preference",)
        assert r.aggregate == pytest.approx(math.fsum(
            w * r.raw(k) for k, w in r.weights) / (5.8 - 2.0), abs=1e-12)


class TestBuiltins:
    def test_constant_gray(self):
        g = PixelImage.constant(32, 32, 0.5)
        assert contrast_score(g) == 0 and sharpness_score(g) == 0 and colorfulness_score(g) == 0
        assert exposure_score(g) == 1.0

    def test_black_exposure_zero(self):
        assert exposure_score(PixelImage.constant(4, 4, 0.0)) == 0.0

    def test_rms_contrast_hand(self):
        im = PixelImage.from_array(np.array([[0.0, 0.0], [1.0, 1.0]]))
        assert rms_contrast(im) == 0.5

    def test_noise_sharper_than_blur(self, rng):
        noise = rng.random((48, 48, 3))
        blurred = gaussian_filter(noise, sigma=(5, 5, 0))
        assert sharpness_score(PixelImage(noise)) > sharpness_score(PixelImage(blurred))

    def test_nss_small_raises(self):
        with pytest.raises(ImageTooSmall):
            nss_quality(PixelImage.constant(15, 15))

    def test_nss_constant_zero(self):
        assert nss_quality(PixelImage.constant(32, 32, 0.4)) == 0.0

    def test_nss_prefers_natural_over_noise(self, rng):
        from skimage import data

        natural = PixelImage.from_uint8(data.camera()[::2, ::2, None].repeat(3, 2))
        assert nss_quality(natural) > nss_quality(PixelImage(rng.random((128, 128, 3))))

    def test_ggd_recovers_gaussian_shape(self, rng):
        shape, var = ggd_fit(rng.standard_normal(200_000))
        assert shape == pytest.approx(2.0, abs=0.05) and var == pytest.approx(1.0, abs=0.02)

    def test_ggd_recovers_laplace_shape(self, rng):
        shape, _ = ggd_fit(rng.laplace(size=200_000))
        assert shape == pytest.approx(1.0, abs=0.05)

    def test_concurrent_equals_sequential(self, photo):
        assert Evaluator(max_workers=4).evaluate(photo) == Evaluator().evaluate(photo)


class TestDecide:
    def test_improvement_accepts(self):
        assert compare_and_decide(report(0.6), report(0.7), 0.0) is Decision.ACCEPT

    def test_equal_reverts(self):
        assert compare_and_decide(report(0.6), report(0.6), 0.0) is Decision.REVERT

    def test_threshold(self):
        assert compare_and_decide(report(0.60), report(0.605), 0.01) is Decision.REVERT

    def test_config_mismatch(self):
        with pytest.raises(ConfigMismatch):
            compare_and_decide(report(0.6), report(0.7, key=(("b", 1.0),)))
