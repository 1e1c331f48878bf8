import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sectra.labels import LABELS
from sectra.metrics import macro_scores
from sectra.sfr import (STANDARD_STRATEGIES, Chapter, CompositionStrategy, SfrModel, TrainConfig,
                        compose_input, cross_entropy, cross_entropy_grad, evaluate, featurize,
                        head_tail_indices, predict, softmax, train)
from sectra.synthetic import disjoint_vocabulary_corpus

B, M, R, C = LABELS


def chapter(n, title="3. Methods"):
    return Chapter(title, tuple(f"s{i}" for i in range(1, n + 1)))


class TestCompose:
    def test_head_tail_50_of_10(self):
        out = compose_input(chapter(10), CompositionStrategy("title_head_tail", 50))
        assert out == "methods s1 s2 s3 s9 s10"

    def test_head_tail_75_of_4(self):
        out = compose_input(chapter(4), CompositionStrategy("title_head_tail", 75))
        assert out == "methods s1 s2 s4"

    def test_title_only(self):
        assert compose_input(chapter(3), CompositionStrategy("title")) == "methods"

    def test_text_and_title_text(self):
        assert compose_input(chapter(2), CompositionStrategy("text")) == "s1 s2"
        assert compose_input(chapter(2), CompositionStrategy("title_text")) == "methods s1 s2"

    def test_half_rounds_up(self):
        # 25% of 10 sentences is 2.5 -> k = 3 -> 2 head + 1 tail
        assert head_tail_indices(10, 25) == [0, 1, 9]

    def test_full_percent_is_whole_chapter(self):
        assert head_tail_indices(7, 100) == list(range(7))

    def test_empty_chapter_with_text_strategy(self):
        with pytest.raises(ValueError):
            compose_input(Chapter("Methods", ()), CompositionStrategy("text"))
        assert compose_input(Chapter("Methods", ()), CompositionStrategy("title")) == "methods"

    def test_bad_strategy(self):
        with pytest.raises(ValueError):
            CompositionStrategy("abstract")
        with pytest.raises(ValueError):
            CompositionStrategy("title_head_tail", 0)
        with pytest.raises(ValueError):
            CompositionStrategy(token_budget=0)

    def test_title_longer_than_budget_is_cut(self):
        ch = Chapter(" ".join(["word"] * 20), ("body",))
        out = compose_input(ch, CompositionStrategy("title_text", token_budget=5))
        assert out.split() == ["word"] * 5

    @given(st.integers(1, 200), st.sampled_from(STANDARD_STRATEGIES),
           st.lists(st.integers(1, 30), min_size=1, max_size=5))
    def test_budget_and_title_prefix(self, n, strategy, lens):
        sents = tuple(" ".join(f"w{i}" for i in range(lens[i % len(lens)])) for i in range(n))
        ch = Chapter("2.1 Experimental Setup", sents)
        out = compose_input(ch, strategy).split()
        assert len(out) <= strategy.token_budget
        if strategy.uses_title:
            assert out[:2] == ["experimental", "setup"]

    @given(st.integers(1, 200), st.sampled_from([25, 50, 75]))
    def test_head_tail_count(self, n, p):
        k = math.floor(p / 100 * n + 0.5)
        idx = head_tail_indices(n, p)
        assert len(idx) == math.ceil(k / 2) + k // 2
        assert idx == sorted(set(idx))
        head = [i for i in idx if i < math.ceil(k / 2)]
        assert head == list(range(math.ceil(k / 2)))


class TestFeaturize:
    def test_empty(self):
        assert featurize("") == {}

    def test_single_bucket(self):
        f = featurize("a a", ngram_orders=(1,))
        assert list(f.values()) == [1.0]

    def test_unigram_permutation_invariance(self):
        a = featurize("results show gains here", ngram_orders=(1,))
        b = featurize("here gains show results", ngram_orders=(1,))
        assert a == b

    def test_l2_normalized(self):
        f = featurize("the model improves the baseline by a wide margin")
        assert math.isclose(sum(v * v for v in f.values()), 1.0)

    def test_stable_across_processes(self):
        # crc32 buckets, not Python's salted hash()
        assert featurize("methods", feature_dim=1 << 10, ngram_orders=(1,)) == {
            __import__("zlib").crc32(b"methods") & 1023: 1.0}


class TestSoftmax:
    def test_zero_model_uniform_background(self):
        label, probs = predict(SfrModel(feature_dim=16), "anything")
        assert label is B
        np.testing.assert_array_equal(probs, [0.25] * 4)

    def test_ln2_example(self):
        np.testing.assert_allclose(softmax([math.log(2), 0, 0, 0]), [0.4, 0.2, 0.2, 0.2],
                                   rtol=0, atol=1e-15)

    @given(st.lists(st.floats(-50, 50), min_size=4, max_size=4), st.floats(-1e3, 1e3))
    def test_shift_invariance(self, z, c):
        p, q = softmax(z), softmax(np.asarray(z) + c)
        assert abs(p.sum() - 1.0) <= 1e-9
        np.testing.assert_allclose(p, q, atol=1e-9)
        top2 = np.sort(z)[-2:]
        if top2[1] - top2[0] > 1e-6 * max(1.0, abs(c)):  # no near-tie for rounding to flip
            assert int(np.argmax(p)) == int(np.argmax(q))

    def test_large_logits_stable(self):
        p = softmax([1000.0, 0.0, 0.0, 0.0])
        assert np.all(np.isfinite(p)) and p[0] == pytest.approx(1.0)

    def test_non_finite(self):
        with pytest.raises(FloatingPointError):
            softmax([np.inf, 0, 0, 0])
        m = SfrModel(feature_dim=16)
        m.bias[0] = np.nan
        with pytest.raises(FloatingPointError):
            predict(m, "x")


class TestCrossEntropy:
    def test_examples(self):
        assert cross_entropy([[1.0, 0, 0, 0]], [B]) == 0.0
        assert cross_entropy([[0.25] * 4], [M]) == pytest.approx(math.log(4), abs=1e-12)
        assert cross_entropy([[0.5, 0.5, 0, 0], [0.0, 0.5, 0.5, 0]], [B, R]) == \
            pytest.approx(math.log(2), abs=1e-12)

    def test_floor(self):
        assert cross_entropy([[0.0, 1.0, 0, 0]], [B]) == pytest.approx(-math.log(1e-12))

    def test_empty(self):
        with pytest.raises(ValueError):
            cross_entropy(np.zeros((0, 4)), [])

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            m = int(rng.integers(1, 6))
            z = rng.normal(scale=2.0, size=(m, 4))
            y = rng.integers(0, 4, size=m)
            g = cross_entropy_grad(z, y)
            h = 1e-6
            fd = np.zeros_like(z)
            for i in range(m):
                for j in range(4):
                    zp, zm = z.copy(), z.copy()
                    zp[i, j] += h
                    zm[i, j] -= h
                    fd[i, j] = (cross_entropy(softmax(zp), y) - cross_entropy(softmax(zm), y)) / (2 * h)
            np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-9)


class TestTrain:
    def test_separable_two_labels(self):
        texts, labels = disjoint_vocabulary_corpus(40, seed=1)
        keep = [i for i, lab in enumerate(labels) if lab in (M, C)]
        texts = [texts[i] for i in keep]
        labels = [labels[i] for i in keep]
        model = train(texts, labels, TrainConfig(epochs=40))
        assert model.final_loss < 0.05
        assert all(predict(model, t)[0] is lab for t, lab in zip(texts, labels))

    def test_deterministic(self):
        texts, labels = disjoint_vocabulary_corpus(10, seed=2)
        a = train(texts, labels, TrainConfig(epochs=3, seed=9), feature_dim=1 << 12)
        b = train(texts, labels, TrainConfig(epochs=3, seed=9), feature_dim=1 << 12)
        assert a.weights.tobytes() == b.weights.tobytes()
        assert a.bias.tobytes() == b.bias.tobytes()

    def test_zero_epochs(self):
        texts, labels = disjoint_vocabulary_corpus(3)
        m = train(texts, labels, TrainConfig(epochs=0), feature_dim=64)
        assert not m.weights.any() and not m.bias.any()
        assert m.final_loss is None

    def test_degenerate_data_warns(self):
        with pytest.warns(RuntimeWarning, match="degenerate"):
            m = train(["a b", "c d"], [R, R], TrainConfig(epochs=1), feature_dim=64)
        assert m.warnings

    def test_loss_non_increasing_small_lr(self):
        texts, labels = disjoint_vocabulary_corpus(20, seed=4)
        m = train(texts, labels, TrainConfig(learning_rate=1e-3, epochs=15))
        hist = m.metadata["loss_history"]
        assert all(b <= a for a, b in zip(hist, hist[1:]))

    def test_feature_dim_power_of_two(self):
        with pytest.raises(ValueError):
            SfrModel(feature_dim=100)


class TestEvaluate:
    def test_perfect_model_is_diagonal(self):
        texts, labels = disjoint_vocabulary_corpus(30, seed=3)
        model = train(texts, labels, TrainConfig(epochs=10))
        test_texts = texts[::12]
        test_labels = labels[::12]
        cm = evaluate(model, test_texts, test_labels)
        assert cm.total == len(test_texts) == 10
        assert np.count_nonzero(cm.counts - np.diag(np.diag(cm.counts))) == 0

    def test_constant_background(self):
        cm = evaluate(SfrModel(feature_dim=16), ["a", "b", "c", "d"], list(LABELS))
        assert cm.counts[:, 0].tolist() == [1, 1, 1, 1]
        assert macro_scores(cm).macro_r == 0.25

    def test_empty(self):
        with pytest.raises(ValueError):
            evaluate(SfrModel(feature_dim=16), [], [])


class TestSerialization:
    def test_roundtrip(self, tmp_path):
        texts, labels = disjoint_vocabulary_corpus(5)
        m = train(texts, labels, TrainConfig(epochs=2), feature_dim=1 << 12)
        m.save(tmp_path / "m.npz")
        loaded = SfrModel.load(tmp_path / "m.npz")
        assert loaded.weights.tobytes() == m.weights.tobytes()
        assert loaded.bias.tobytes() == m.bias.tobytes()
        assert loaded.ngram_orders == m.ngram_orders
        assert loaded.metadata == m.metadata
        for t in texts:
            assert predict(loaded, t)[0] is predict(m, t)[0]

    def test_version_mismatch(self, tmp_path, monkeypatch):
        import sectra.sfr as sfr
        m = SfrModel(feature_dim=16)
        monkeypatch.setattr(sfr, "MODEL_FORMAT_VERSION", 99)
        m.save(tmp_path / "m.npz")
        monkeypatch.undo()
        with pytest.raises(ValueError, match="format version 99"):
            SfrModel.load(tmp_path / "m.npz")
