import itertools

import numpy as np
import pytest

from geotorsion.numeric import backend, cofactor_det, leibniz_det, permutation_parity, reorder_sign, use_precision


@pytest.mark.parametrize("n", range(1, 7))
def test_det_oracles_agree(n):
    rng = np.random.default_rng(n)
    for _ in range(10):
        m = rng.normal(size=(n, n))
        ref = np.linalg.det(m)
        assert cofactor_det(m.tolist()) == pytest.approx(ref, rel=1e-10, abs=1e-12)
        assert leibniz_det(m.tolist()) == pytest.approx(ref, rel=1e-10, abs=1e-12)
        assert backend().det(m) == pytest.approx(ref, rel=1e-12, abs=1e-14)


def test_extended_det_matches_double():
    m = np.random.default_rng(0).normal(size=(5, 5))
    with use_precision("extended") as b:
        ext = b.det(b.array(m))
    assert float(ext) == pytest.approx(np.linalg.det(m), rel=1e-12)


def test_empty_det_is_one():
    assert backend().det(np.zeros((0, 0))) == 1


def test_parity_against_inversions():
    for perm in itertools.permutations(range(5)):
        inv = sum(1 for i, j in itertools.combinations(range(5), 2) if perm[i] > perm[j])
        assert permutation_parity(perm) == (-1) ** inv


def test_reorder_sign():
    assert reorder_sign("abc", "abc") == 1
    assert reorder_sign("abc", "bac") == -1
    assert reorder_sign("abc", "cab") == 1
    with pytest.raises(ValueError):
        reorder_sign("ab", "ac")
