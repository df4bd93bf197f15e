import numpy as np
import pytest

from crimedistill.data import EventClass, Vocabulary, popularity_negatives


@pytest.fixture
def vocab():
    classes = [EventClass(slot=i % 8, category=f"C{i // 8}") for i in range(200)]
    frequency = np.arange(200)[::-1] + 1  # class 0 is the most popular
    return Vocabulary(classes=classes, frequency=frequency)


def test_negatives_exclude_history_without_duplicates(vocab):
    history = list(range(0, 50))
    negatives = popularity_negatives(vocab, history, n=100, rng=np.random.default_rng(1))
    assert len(negatives) == 100
    assert len(set(negatives.tolist())) == 100
    assert not set(negatives.tolist()) & set(history)


def test_negatives_favour_popular_classes(vocab):
    rng = np.random.default_rng(2)
    hits = np.zeros(vocab.size)
    for _ in range(300):
        hits[popularity_negatives(vocab, [], n=20, rng=rng)] += 1
    assert hits[:20].sum() > hits[-20:].sum() * 3


def test_zero_frequency_classes_need_smoothing():
    vocab = Vocabulary(classes=[EventClass(0, c) for c in "ABCDE"], frequency=[5, 0, 3, 0, 1])
    plain = popularity_negatives(vocab, [0], n=3, rng=np.random.default_rng(0), warn=False)
    assert sorted(plain.tolist()) == [2, 4]
    smoothed = popularity_negatives(vocab, [0], n=3, rng=np.random.default_rng(0), smoothing=1.0)
    assert len(smoothed) == 3 and 0 not in smoothed.tolist()


def test_shortfall_warns(caplog):
    vocab = Vocabulary(classes=[EventClass(0, c) for c in "ABC"], frequency=[1, 1, 1])
    with caplog.at_level("WARNING", logger="crimedistill.data"):
        negatives = popularity_negatives(vocab, [1], n=100, rng=np.random.default_rng(0))
    assert sorted(negatives.tolist()) == [0, 2]
    assert "Only 2 eligible negatives" in caplog.text


def test_uniform_frequencies_draw_uniformly():
    vocab = Vocabulary(classes=[EventClass(i % 8, f"C{i}") for i in range(10)], frequency=np.full(10, 7))
    rng = np.random.default_rng(3)
    draws = 10_000
    counts = np.zeros(vocab.size)
    for _ in range(draws):
        counts[popularity_negatives(vocab, [], n=1, rng=rng)] += 1
    expected = draws / vocab.size
    chi2 = ((counts - expected) ** 2 / expected).sum()
    # 99.9th percentile of chi-squared with 9 degrees of freedom
    assert chi2 < 27.88


def test_draws_follow_class_popularity():
    vocab = Vocabulary(classes=[EventClass(0, "A"), EventClass(1, "B")], frequency=[90, 10])
    rng = np.random.default_rng(4)
    picks = [int(popularity_negatives(vocab, [], n=1, rng=rng)[0]) for _ in range(10_000)]
    assert np.mean(np.array(picks) == 0) == pytest.approx(0.9, abs=0.015)
