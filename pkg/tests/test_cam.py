import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nmsim.cam import CamArray, CamBank, cam_area, cell_area_from_feature, program, search


def test_universal_match_and_mismatch():
    cam = CamArray(words=[0x2A5] * 64, e_precharge=1.0, e_discharge=10.0)
    assert search(cam, 0x2A5) == set(range(64))
    assert cam.energy == 64.0
    assert search(cam, 0x2A4) == set()
    assert cam.counters.discharges == 64
    assert cam.energy == 64.0 + 64 * 1.0 + 64 * 10.0


def test_search_equals_linear_scan():
    rng = np.random.default_rng(0)
    words = rng.integers(0, 1 << 12, 64)
    words[:8] = words[8]  # guarantee repeated tags
    cam = CamArray(words=words.tolist())
    for q in rng.integers(0, 1 << 12, 10_000).tolist() + words[:50].tolist():
        assert search(cam, q) == {i for i, w in enumerate(words) if w == q}


@given(st.lists(st.integers(0, 15), min_size=16, max_size=16), st.integers(0, 15))
def test_energy_nonincreasing_in_matches(words, tag):
    cam = CamArray(n_words=16, word_bits=4, e_precharge=1e-15, e_discharge=3e-15, words=words)
    n = len(search(cam, tag))
    assert cam.search_energy(n) == pytest.approx(cam.energy)
    assert all(cam.search_energy(k + 1) <= cam.search_energy(k) for k in range(16))


def test_repeat_search_is_idempotent_and_charges_each_time():
    cam = CamArray(words=[1, 2, 3], e_precharge=1.0)
    assert search(cam, 2) == search(cam, 2) == {1}
    assert cam.counters.searches == 2 and cam.energy == 128.0


def test_program_then_search_and_overwrite():
    cam = CamArray()
    program(cam, 5, 0xABC)
    assert 5 in search(cam, 0xABC)
    program(cam, 5, 0x123)
    assert 5 not in search(cam, 0xABC)
    assert search(cam, 0x123) == {5}


def test_unprogrammed_rows_never_match():
    assert search(CamArray(), 0) == set()
    cam = CamArray().program(3, 0)
    assert search(cam, 0) == {3}
    cam.erase(3)
    assert search(cam, 0) == set()


def test_range_errors():
    cam = CamArray()
    with pytest.raises(ValueError):
        search(cam, 1 << 12)
    with pytest.raises(ValueError):
        program(cam, 0, -1)
    with pytest.raises(IndexError):
        program(cam, 64, 1)
    with pytest.raises(ValueError):
        CamArray(n_words=0)
    with pytest.raises(ValueError):
        CamArray(words=[0] * 65)


def test_tag_columns_ignore_payload_bits():
    cam = CamArray(word_bits=12, tag_bits=10).program(0, (2 << 10) | 77)
    assert search(cam, 77) == {0}
    with pytest.raises(ValueError):
        search(cam, 1 << 10)


def test_area():
    assert cam_area(64, 12, 0.25) == 192.0
    assert cam_area(1, 1, 0.7) == 0.7
    assert cell_area_from_feature(330, 0.18) == pytest.approx(10.69, abs=0.005)
    assert CamArray().area == 192.0
    with pytest.raises(ValueError):
        cam_area(0, 12, 0.25)


def test_bank_matches_per_array_search():
    rng = np.random.default_rng(2)
    bank = CamBank(8, n_words=16, word_bits=6, e_precharge=1.0, e_discharge=2.0)
    for a in bank.arrays:
        for k in rng.choice(16, 10, replace=False):
            a.program(int(k), int(rng.integers(0, 64)))
    loose = [CamArray(16, 6, words=None) for _ in range(8)]
    for i, a in enumerate(bank.arrays):
        for k, w in a.dump():
            loose[i].program(k, w)
    for tag in range(64):
        want = [(i, int(k), int(bank.words[i, k])) for i, cam in enumerate(loose) for k in sorted(search(cam, tag))]
        assert bank.search(tag) == want
    assert bank.counters.searches == 64 * 8 and bank.broadcasts == 64
    assert bank.energy == pytest.approx(sum(loose_c.counters.precharges * 1.0 + loose_c.counters.discharges * 2.0
                                            for loose_c in loose))
