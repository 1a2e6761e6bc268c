import numpy as np

from excursus.rng import block_rng, block_sizes, default_threads, map_blocks


def _draw(b, size, rng):
    return rng.standard_normal(size)


def test_block_sizes():
    assert block_sizes(5, 2) == [2, 2, 1]
    assert block_sizes(4, 2) == [2, 2]


def test_results_independent_of_thread_count():
    a = np.concatenate(map_blocks(_draw, 1000, 7, block=64, threads=1))
    b = np.concatenate(map_blocks(_draw, 1000, 7, block=64, threads=4))
    np.testing.assert_array_equal(a, b)


def test_salt_and_seed_separate_streams():
    x = block_rng(1, 0).random(4)
    assert not np.array_equal(x, block_rng(1, 0, salt=1).random(4))
    assert not np.array_equal(x, block_rng(2, 0).random(4))
    assert not np.array_equal(x, block_rng(1, 1).random(4))
    np.testing.assert_array_equal(x, block_rng(1, 0).random(4))


def test_default_threads_env(monkeypatch):
    monkeypatch.setenv("EXCURSUS_THREADS", "3")
    assert default_threads() == 3
    monkeypatch.setenv("EXCURSUS_THREADS", "junk")
    assert default_threads() == 1
