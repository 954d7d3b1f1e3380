import numpy as np
import pytest

from conftest import DEAD_URL
from photoloop.core import Category, ImageState, Origin, PixelImage
from photoloop.memory import EditingMemory, TriedAction
from photoloop.perceiver import (
    ExternalPerceiver,
    HeuristicPerceiver,
    Perceiver,
    PerceiverContext,
    Scene,
    classify_scene,
    compute_statistics,
)
from photoloop.remote import Endpoint


def landscape():
    px = np.zeros((32, 32, 3))
    px[:16] = (0.3, 0.5, 0.9)
    px[16:] = (0.2, 0.7, 0.2)
    return PixelImage(px)


def state(im):
    return ImageState(im)


class TestStatistics:
    def test_constant(self):
        st = compute_statistics(PixelImage.constant(8, 8, 0.3))
        assert st.rms_contrast == 0 and st.sharpness == 0 and st.colorfulness == 0

    def test_white(self):
        assert compute_statistics(PixelImage.constant(4, 4, 1.0)).mean_luminance == pytest.approx(1.0, abs=1e-15)

    def test_two_by_two_contrast(self):
        st = compute_statistics(PixelImage.from_array(np.array([[0.0, 0.0], [1.0, 1.0]])))
        assert st.rms_contrast == 0.5 and st.dark_fraction == 0.5


class TestScene:
    def test_black_is_night(self):
        assert classify_scene(state(PixelImage.constant(8, 8, 0.0))) is Scene.NIGHT

    def test_gray_unknown(self):
        assert classify_scene(state(PixelImage.constant(8, 8, 0.5))) is Scene.UNKNOWN

    def test_landscape(self):
        assert classify_scene(state(landscape())) is Scene.LANDSCAPE

    def test_deterministic(self, photo):
        assert len({classify_scene(photo) for _ in range(5)}) == 1


class TestHeuristicProposals:
    def ctx(self, **kw):
        return PerceiverContext(**{"scene": Scene.UNKNOWN, "memory": EditingMemory(), **kw})

    def test_length_and_diversity(self, photo):
        for k in (1, 2, 5, 8):
            acts = HeuristicPerceiver().propose(state(photo), self.ctx(k=k))
            assert 1 <= len(acts) <= k
            assert len({a.id for a in acts}) == len(acts)
            if k >= 2:
                assert len({a.category for a in acts}) >= 2

    def test_dark_image_gets_brightening(self):
        acts = HeuristicPerceiver().propose(state(PixelImage.constant(16, 16, 0.1)), self.ctx())
        assert "brightness_up" in [a.id for a in acts]

    def test_warm_prompt_adds_color_balance(self, photo):
        acts = HeuristicPerceiver().propose(state(photo), self.ctx(user_prompt="warmer mood"))
        assert acts[0].id == "warm_tone"
        assert acts[0].category is Category.COLOR_BALANCE and acts[0].origin is Origin.USER_GUIDED

    def test_unmatched_prompt_becomes_instruction(self, photo):
        acts = HeuristicPerceiver().propose(state(photo), self.ctx(user_prompt="add a hot air balloon"))
        assert acts[0].id == "user_prompt" and not acts[0].is_procedural

    def test_memory_excludes_recent_rejections(self, photo):
        first = HeuristicPerceiver().propose(state(photo), self.ctx())
        mem = EditingMemory()
        mem.record(1, [TriedAction(first[0].id, False, -0.1)])
        again = HeuristicPerceiver().propose(state(photo), self.ctx(memory=mem))
        assert first[0].id not in [a.id for a in again]

    def test_exclusion_window_expires(self, photo):
        first = HeuristicPerceiver().propose(state(photo), self.ctx())
        mem = EditingMemory()
        mem.record(1, [TriedAction(first[0].id, False, -0.1)])
        for i in range(2, 5):
            mem.record(i, [])
        again = HeuristicPerceiver().propose(state(photo), self.ctx(memory=mem))
        assert first[0].id in [a.id for a in again]

    def test_portrait_suppresses_subject_edits(self, photo):
        acts = HeuristicPerceiver().propose(state(photo), self.ctx(scene=Scene.PORTRAIT, k=9))
        assert not any(a.category in (Category.LOCAL_RETOUCH, Category.SEMANTIC_EDIT) for a in acts)

    def test_scene_suggestion_included(self):
        acts = HeuristicPerceiver().propose(state(landscape()), self.ctx(scene=Scene.LANDSCAPE, k=9))
        assert "enhance_sky_foliage" in [a.id for a in acts]

    def test_k_validated(self):
        with pytest.raises(ValueError):
            PerceiverContext(k=0)


class TestExternal:
    def test_protocol(self, mock_server, photo):
        p = ExternalPerceiver(Endpoint(mock_server.base + "/perceiver", retries=0))
        mock_server.requests.clear()
        acts = p.propose(state(photo), PerceiverContext(Scene.UNKNOWN, EditingMemory(), "calm", 3))
        body = mock_server.requests[-1][1]
        assert set(body) == {"image", "scene", "memory", "user_prompt", "k", "decoding"}
        assert body["decoding"] == {"max_tokens": 1024, "temperature": 0.7, "top_p": 0.8}
        assert [a.id for a in acts] == ["ext_bright", "ext_sky"]
        assert acts[0].is_procedural and not acts[1].is_procedural
        assert p.last_scene is Scene.LANDSCAPE

    def test_dead_service_falls_back(self, photo):
        p = Perceiver(Endpoint(DEAD_URL, timeout=1.0, retries=0))
        ctx = PerceiverContext(Scene.UNKNOWN, EditingMemory(), None, 4)
        assert p.propose(state(photo), ctx) == HeuristicPerceiver().propose(state(photo), ctx)
        assert p.fallbacks == 1
