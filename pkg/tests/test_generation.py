import json

import httpx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chairspace import blobshape as bs
from chairspace import embedding as em
from chairspace import generation as gen


@pytest.fixture(scope="module")
def armchair():
    return bs.generate_procedural_chair("armchair", 1)


class TestApplyAdjective:
    def test_high_raises_selected_centers(self, armchair):
        out = gen.apply_adjective(armchair, bs.PART_GROUPS["back"], "high", 0.5)
        for i in bs.PART_GROUPS["back"]:
            dz = out.parts[i].center[2] - armchair.parts[i].center[2]
            assert dz == pytest.approx(0.15, abs=1e-12)
        for i in bs.PART_GROUPS["legs"]:
            assert out.parts[i] is armchair.parts[i]

    def test_magnitude_zero_is_identity(self, armchair):
        assert gen.apply_adjective(armchair, [3], "wide", 0.0) is armchair

    def test_open_moves_arms_apart_symmetrically(self, armchair):
        out = gen.apply_adjective(armchair, bs.PART_GROUPS["arms"], "open", 0.8)
        dl = out.parts[12].center[0] - armchair.parts[12].center[0]
        dr = out.parts[13].center[0] - armchair.parts[13].center[0]
        assert dl == pytest.approx(-0.2, abs=1e-12)
        assert dr == pytest.approx(0.2, abs=1e-12)

    def test_unknown_adjective_rejected(self, armchair):
        with pytest.raises(KeyError, match="unknown adjective"):
            gen.apply_adjective(armchair, [1], "bouncy", 0.5)

    def test_empty_parts_rejected(self, armchair):
        with pytest.raises(ValueError, match="at least one part"):
            gen.apply_adjective(armchair, [], "high", 0.5)

    def test_unselected_parts_bitwise_untouched(self, armchair):
        for adjective in gen.VOCABULARY:
            out = gen.apply_adjective(armchair, [8, 9], adjective, 0.9)
            for i in range(bs.N_PARTS):
                if i not in (8, 9):
                    assert out.parts[i] is armchair.parts[i]

    def test_all_rules_keep_shapes_valid_at_full_magnitude(self, armchair):
        all_parts = list(range(bs.N_PARTS))
        for adjective in gen.VOCABULARY:
            out = gen.apply_adjective(armchair, all_parts, adjective, 1.0)
            for p in out.parts:
                p.validate()

    @given(st.floats(0.01, 0.17))
    @settings(max_examples=25, deadline=None)
    def test_wide_then_thin_roughly_inverts(self, magnitude):
        shape = bs.generate_procedural_chair("dining", 3)
        sel = bs.PART_GROUPS["seat"]
        wide = gen.apply_adjective(shape, sel, "wide", magnitude)
        back = gen.apply_adjective(wide, sel, "thin", magnitude)
        for i in sel:
            ratio = back.parts[i].eigenvalues / shape.parts[i].eigenvalues
            assert np.all(np.abs(ratio - 1.0) <= 0.10)

    def test_tilt_rotates_frame_by_stated_angle(self, armchair):
        out = gen.apply_adjective(armchair, [8], "tilt-forward", 0.5)
        U0, U1 = armchair.parts[8].eigenvectors, out.parts[8].eigenvectors
        R = U1 @ U0.T
        angle = np.degrees(np.arccos(np.clip((np.trace(R) - 1) / 2, -1, 1)))
        assert angle == pytest.approx(10.0, abs=1e-6)


class TestSuggestions:
    def test_empty_history_default_set(self):
        s = gen.suggest_adjectives([], [])
        assert s.aligned == gen.VOCABULARY[:3]
        assert s.diversified == gen.VOCABULARY[-3:]

    def test_used_family_excluded_and_cosine_ranked(self):
        history = ["a wide chair", "make it wide and voluminous"]
        s = gen.suggest_adjectives(history, [])
        used = {"wide", "voluminous"}
        assert not (set(s.aligned) | set(s.diversified)) & used
        # oracle: rank the unused vocabulary by cosine similarity directly
        vec = gen.session_feature_vector(history, [])
        scored = sorted(
            ((a, gen._cosine(vec, gen.rule_for(a).feature_vector))
             for a in gen.VOCABULARY if a not in used),
            key=lambda t: (-t[1], gen.VOCABULARY.index(t[0])))
        assert list(s.aligned) == [a for a, _ in scored[:3]]
        assert list(s.diversified) == [a for a, _ in scored[-3:]][::-1]

    @given(st.lists(st.sampled_from(gen.VOCABULARY + ("blue", "cozy", "tall")),
                    min_size=0, max_size=12))
    @settings(max_examples=50, deadline=None)
    def test_disjoint_size_three_for_any_history(self, words):
        history = [" ".join(words)] if words else []
        s = gen.suggest_adjectives(history, [])
        assert len(s.aligned) == 3 and len(s.diversified) == 3
        assert not set(s.aligned) & set(s.diversified)
        assert set(s.aligned) | set(s.diversified) <= set(gen.VOCABULARY)

    def test_extraction_is_three_aligned_two_diversified(self):
        s = gen.suggest_adjectives(["wide sofa"], [])
        extracted = gen.extraction_adjectives(["wide sofa"], [])
        assert extracted == s.aligned + s.diversified[:2]
        assert len(extracted) == 5


class TestMockProvider:
    def test_deterministic_and_distinct(self, armchair):
        req = gen.GenerationRequest(base=bs.flatten(armchair), selected_parts=(8, 9),
                                    adjectives=("high", "round"), count=3, seed=5)
        r1, r2 = gen.mock_provider(req), gen.mock_provider(req)
        assert all(np.array_equal(a.vector, b.vector)
                   for a, b in zip(r1.results, r2.results))
        assert len(r1.results) == 3
        assert not np.array_equal(r1.results[0].vector, r1.results[1].vector)

    def test_untouched_parts_identical_to_base(self, armchair):
        base = bs.flatten(armchair)
        req = gen.GenerationRequest(base=base, selected_parts=(4, 5),
                                    adjectives=("wide",), count=3, seed=1)
        for result in gen.mock_provider(req).results:
            for i in range(bs.N_PARTS):
                block = slice(i * 16, (i + 1) * 16)
                if i not in (4, 5):
                    assert np.array_equal(result.vector[block], base[block])
                else:
                    assert not np.array_equal(result.vector[block], base[block])

    def test_results_unflatten_validly(self, armchair):
        req = gen.GenerationRequest(base=bs.flatten(armchair),
                                    selected_parts=tuple(range(16)),
                                    adjectives=gen.VOCABULARY[:5], count=6, seed=3)
        for j, result in enumerate(gen.mock_provider(req).results):
            bs.unflatten(result.vector, f"v{j}", "llm_edit")


class TestGenerateAlternatives:
    def test_mock_round_shape(self, armchair):
        kids = gen.generate_alternatives(["wide chair"], [], armchair, (8, 9),
                                         gen.mock_provider, seed=3)
        assert len(kids) == 3
        ids = [c.id for c, _ in kids]
        assert len(set(ids)) == 3
        for child, attribution in kids:
            assert child.parent_id == armchair.id
            assert child.provenance == "llm_edit"
            assert attribution in gen.VOCABULARY

    def test_deterministic(self, armchair):
        a = gen.generate_alternatives([], [], armchair, (4,), gen.mock_provider, seed=9)
        b = gen.generate_alternatives([], [], armchair, (4,), gen.mock_provider, seed=9)
        assert [c.id for c, _ in a] == [c.id for c, _ in b]
        assert all(x[0] == y[0] for x, y in zip(a, b))

    def test_short_provider_response_falls_back_to_mock(self, armchair):
        def stingy_provider(request):
            full = gen.mock_provider(request)
            return gen.GenerationResponse(results=full.results[:2])

        kids = gen.generate_alternatives([], [], armchair, (8,), stingy_provider, seed=2)
        mock_kids = gen.generate_alternatives([], [], armchair, (8,), gen.mock_provider, seed=2)
        assert [c.id for c, _ in kids] == [c.id for c, _ in mock_kids]

    def test_raising_provider_falls_back_to_mock(self, armchair):
        def broken(request):
            raise gen.ProviderError("boom")

        kids = gen.generate_alternatives([], [], armchair, (8,), broken, seed=2)
        assert len(kids) == 3


def make_remote(handler, timeout=20.0):
    transport = httpx.MockTransport(handler)
    return gen.RemoteProvider(
        gen.ProviderConfig(endpoint_url="http://provider.test/generate", timeout=timeout),
        client=httpx.Client(transport=transport))


class TestRemoteProvider:
    def test_echoing_stub_matches_mock(self, armchair):
        def handler(request: httpx.Request) -> httpx.Response:
            payload = gen.GenerationRequest(**json.loads(request.content))
            response = gen.mock_provider(payload)
            return httpx.Response(200, json={
                "results": [{"vector": r.vector.tolist(), "adjective": r.adjective}
                            for r in response.results]})

        provider = make_remote(handler)
        req = gen.GenerationRequest(base=bs.flatten(armchair), selected_parts=(8,),
                                    adjectives=("high", "low"), count=3, seed=4)
        remote = provider(req)
        mock = gen.mock_provider(req)
        assert all(np.allclose(a.vector, b.vector)
                   for a, b in zip(remote.results, mock.results))

    def test_nan_entry_backfilled(self, armchair):
        def handler(request: httpx.Request) -> httpx.Response:
            payload_req = gen.GenerationRequest(**json.loads(request.content))
            response = gen.mock_provider(payload_req)
            out = [{"vector": r.vector.tolist(), "adjective": r.adjective}
                   for r in response.results]
            out[1]["vector"][0] = float("nan")
            # stdlib dumps emits a NaN literal, as sloppy providers do
            return httpx.Response(200, content=json.dumps({"results": out}),
                                  headers={"content-type": "application/json"})

        provider = make_remote(handler)
        req = gen.GenerationRequest(base=bs.flatten(armchair), selected_parts=(8,),
                                    adjectives=("high",), count=3, seed=4)
        response = provider(req)
        assert len(response.results) == 3
        for r in response.results:
            assert np.all(np.isfinite(r.vector))

    def test_unreachable_endpoint_raises_within_budget(self, armchair):
        def handler(request: httpx.Request) -> httpx.Response:
            raise httpx.ConnectTimeout("no route")

        provider = make_remote(handler, timeout=0.2)
        req = gen.GenerationRequest(base=bs.flatten(armchair), selected_parts=(8,),
                                    adjectives=("high",), count=3, seed=4)
        import time
        t0 = time.time()
        with pytest.raises(gen.ProviderError, match="remote provider failed"):
            provider(req)
        assert time.time() - t0 < 5.0

    def test_malformed_payload_raises(self, armchair):
        provider = make_remote(lambda request: httpx.Response(200, json={"nope": 1}))
        req = gen.GenerationRequest(base=bs.flatten(armchair), selected_parts=(8,),
                                    adjectives=("high",), count=3, seed=4)
        with pytest.raises(gen.ProviderError, match="no results"):
            provider(req)


class TestPromptToDesigns:
    @pytest.fixture(scope="class")
    def corpus_and_positions(self, corpus120, model120):
        return corpus120, model120.positions

    def test_armchair_prompt_returns_armed_shapes(self, corpus_and_positions):
        corpus, positions = corpus_and_positions
        picks = gen.prompt_to_designs("a comfy armchair", corpus, positions, seed=3)
        assert len(picks) == 5
        for s in picks:
            assert all(s.parts[i].blend_weight > 0 for i in bs.PART_GROUPS["arms"])

    def test_empty_prompt_spans_clusters(self, corpus_and_positions, model120):
        corpus, positions = corpus_and_positions
        labels = em.cluster_map(positions, 5, seed=0)
        picks = gen.prompt_to_designs("", corpus, positions, seed=1, cluster_labels=labels)
        rows = {s.id: i for i, s in enumerate(corpus)}
        picked_clusters = {labels[rows[s.id]] for s in picks}
        assert len(picked_clusters) == 5

    def test_deterministic(self, corpus_and_positions):
        corpus, positions = corpus_and_positions
        a = gen.prompt_to_designs("wide sofa", corpus, positions, seed=7)
        b = gen.prompt_to_designs("wide sofa", corpus, positions, seed=7)
        assert [s.id for s in a] == [s.id for s in b]
