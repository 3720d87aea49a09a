import math

import numpy as np
import pytest

from squats import bits
from squats.codebook import Codebook, check_distinct_feasible, generate
from squats.errors import FeasibilityError


def test_bit_probability_and_slots():
    cb = generate(2, 1, 1, 16, seed=0)
    assert cb.p == pytest.approx(math.log(2))
    assert cb.n_codewords == 3
    assert generate(5, 3, 4, 8, seed=0).p == pytest.approx(math.log(2) / 4)


def test_ones_fraction_within_three_sigma():
    T, l, k, b = 100, 4, 3, 200
    cb = generate(T, l, k, b, seed=11)
    p = math.log(2) / k
    n = T * l * b
    assert abs(cb.ones_fraction() - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_per_bit_marginals_match_p():
    # chi-square on the bit-position histogram: positions are exchangeable
    cb = generate(200, 5, 2, 40, seed=5)
    ones = cb.bit_matrix().reshape(-1, 40).sum(axis=0)
    n = 200 * 5
    p = math.log(2) / 2
    z = (ones - n * p) / math.sqrt(n * p * (1 - p))
    assert np.all(np.abs(z) < 4.5)


def test_zero_codeword_and_accessors():
    cb = generate(3, 2, 1, 70, seed=2)
    assert not cb.codeword(1, 0).any()
    assert np.array_equal(cb.codeword(2, 2), cb.words[2, 1])
    assert cb.bit_matrix().shape == (3, 2, 70)
    assert not np.any(cb.words[..., -1] >> np.uint64(6))


def test_deterministic_in_seed():
    assert generate(20, 3, 2, 90, seed=7) == generate(20, 3, 2, 90, seed=7)
    assert generate(20, 3, 2, 90, seed=7) != generate(20, 3, 2, 90, seed=8)
    assert generate(4, 2, 1, 10).seed != generate(4, 2, 1, 10).seed


@pytest.mark.parametrize("b", [1, 63, 64, 65, 130])
def test_save_load_roundtrip(tmp_path, b):
    cb = generate(6, 3, 2, b, seed=b)
    path = cb.save(tmp_path / "cb.sqts")
    assert Codebook.load(path) == cb
    assert (tmp_path / "cb.sqts.json").exists()


def test_load_rejects_corrupt_files(tmp_path):
    cb = generate(3, 2, 1, 20, seed=1)
    path = cb.save(tmp_path / "cb.sqts")
    raw = path.read_bytes()
    (tmp_path / "magic.sqts").write_bytes(b"XXXX" + raw[4:])
    (tmp_path / "short.sqts").write_bytes(raw[:-1])
    (tmp_path / "head.sqts").write_bytes(raw[:5])
    for name in ("magic", "short", "head"):
        with pytest.raises(ValueError):
            Codebook.load(tmp_path / f"{name}.sqts")


def test_reject_duplicates_gives_distinct_nonzero_words():
    cb = generate(30, 4, 2, 40, seed=3, reject_duplicates=True)
    flat = cb.words.reshape(-1, cb.words.shape[-1])
    assert np.all(bits.popcount(flat) > 0)
    assert len({w.tobytes() for w in flat}) == flat.shape[0]


def test_feasibility_errors():
    with pytest.raises(FeasibilityError):
        check_distinct_feasible(10, 2, 1, 4)   # 20 words, only 15 nonzero patterns
    with pytest.raises(FeasibilityError):
        generate(1000, 64, 8, 20, seed=0, reject_duplicates=True)
    with pytest.raises(ValueError):
        generate(0, 2, 1, 8)
    check_distinct_feasible(10, 2, 1, 64)
