"""Binary CAM model of the per-neuron synapse tag memory.

Each neuron owns ``n_words`` words of ``word_bits`` bits (NOR-type 9T cells).
A search precharges every match line high; any word that differs from the key
in a compared bit discharges its line.  The low ``tag_bits`` columns sit on
the match line; remaining high columns (if any) are stored alongside the tag
and read out on a match, which is how the network keeps the synapse kernel
next to the source tag.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class CamCounters:
    searches: int = 0
    precharges: int = 0
    discharges: int = 0
    writes: int = 0


class CamArray:
    def __init__(
        self,
        n_words: int = 64,
        word_bits: int = 12,
        tag_bits: int | None = None,
        cell_area: float = 0.25,
        e_precharge: float = 0.0,
        e_discharge: float = 0.0,
        words=None,
        _storage: tuple[np.ndarray, np.ndarray] | None = None,
    ):
        if n_words <= 0 or word_bits <= 0:
            raise ValueError("n_words and word_bits must be positive")
        tag_bits = word_bits if tag_bits is None else tag_bits
        if not 0 < tag_bits <= word_bits:
            raise ValueError("tag_bits must lie in 1..word_bits")
        if cell_area <= 0:
            raise ValueError("cell_area must be positive")
        self.n_words = n_words
        self.word_bits = word_bits
        self.tag_bits = tag_bits
        self.cell_area = cell_area
        self.e_precharge = e_precharge
        self.e_discharge = e_discharge
        if _storage is None:
            _storage = (np.zeros(n_words, dtype=np.int64), np.zeros(n_words, dtype=bool))
        # ``valid`` is False for unprogrammed rows: their match line stays discharged
        self.words, self.valid = _storage
        self.counters = CamCounters()
        if words is not None:
            words = list(words)
            if len(words) > n_words:
                raise ValueError(f"{len(words)} words do not fit in a {n_words}-word array")
            for i, w in enumerate(words):
                self.program(i, w)
            self.counters.writes = 0

    @property
    def tag_mask(self) -> int:
        return (1 << self.tag_bits) - 1

    def _check_word(self, value: int, bits: int, what: str) -> None:
        if not 0 <= value < (1 << bits):
            raise ValueError(f"{what} {value:#x} outside 0..2^{bits}-1")

    def program(self, index: int, tag: int) -> "CamArray":
        if not 0 <= index < self.n_words:
            raise IndexError(f"word index {index} outside 0..{self.n_words - 1}")
        self._check_word(tag, self.word_bits, "tag")
        self.words[index] = tag
        self.valid[index] = True
        self.counters.writes += 1
        return self

    def erase(self, index: int) -> "CamArray":
        if not 0 <= index < self.n_words:
            raise IndexError(f"word index {index} outside 0..{self.n_words - 1}")
        self.valid[index] = False
        self.words[index] = 0
        return self

    @property
    def n_programmed(self) -> int:
        return int(self.valid.sum())

    def search(self, tag: int) -> np.ndarray:
        """Indices of words whose compared bits equal ``tag``; charges one search."""
        self._check_word(tag, self.tag_bits, "search tag")
        hits = np.flatnonzero(((self.words & self.tag_mask) == tag) & self.valid)
        c = self.counters
        c.searches += 1
        c.precharges += self.n_words
        c.discharges += self.n_words - len(hits)
        return hits

    def search_energy(self, n_matches: int) -> float:
        return self.n_words * self.e_precharge + (self.n_words - n_matches) * self.e_discharge

    @property
    def energy(self) -> float:
        c = self.counters
        return c.precharges * self.e_precharge + c.discharges * self.e_discharge

    @property
    def area(self) -> float:
        return cam_area(self.n_words, self.word_bits, self.cell_area)

    def dump(self) -> list[tuple[int, int]]:
        """(word index, stored word) for every programmed row."""
        return [(int(i), int(self.words[i])) for i in np.flatnonzero(self.valid)]


class CamBank:
    """All per-neuron arrays of one core, stored as one 2-D block.

    ``arrays[i]`` is a CamArray whose storage is row i of the block, so
    programming an array writes straight into the bank.  A broadcast search
    compares every array at once and charges one search per array.
    """

    def __init__(self, n_arrays: int, n_words: int = 64, word_bits: int = 12, tag_bits: int | None = None,
                 cell_area: float = 0.25, e_precharge: float = 0.0, e_discharge: float = 0.0):
        if n_arrays <= 0:
            raise ValueError("n_arrays must be positive")
        self.words = np.zeros((n_arrays, n_words), dtype=np.int64)
        self.valid = np.zeros((n_arrays, n_words), dtype=bool)
        self.arrays = [
            CamArray(n_words, word_bits, tag_bits, cell_area, e_precharge, e_discharge,
                     _storage=(self.words[i], self.valid[i]))
            for i in range(n_arrays)
        ]
        a = self.arrays[0]
        self.n_words, self.word_bits, self.tag_bits = a.n_words, a.word_bits, a.tag_bits
        self.e_precharge, self.e_discharge = e_precharge, e_discharge
        self.counters = CamCounters()
        self.broadcasts = 0

    def __len__(self) -> int:
        return len(self.arrays)

    def search(self, tag: int) -> list[tuple[int, int, int]]:
        """(array, word index, stored word) for every match, in row-major order."""
        self.arrays[0]._check_word(tag, self.tag_bits, "search tag")
        hit = ((self.words & self.arrays[0].tag_mask) == tag) & self.valid
        rows, cols = np.nonzero(hit)
        n = self.words.size
        c = self.counters
        c.searches += len(self.arrays)
        c.precharges += n
        c.discharges += n - len(rows)
        self.broadcasts += 1
        return [(int(r), int(k), int(self.words[r, k])) for r, k in zip(rows, cols)]

    @property
    def energy(self) -> float:
        c = self.counters
        return c.precharges * self.e_precharge + c.discharges * self.e_discharge

    def dump(self) -> list[tuple[int, int, int]]:
        """(array, word index, stored word) for every programmed row."""
        return [(i, k, w) for i, a in enumerate(self.arrays) for k, w in a.dump()]


def search(array: CamArray, tag: int) -> set[int]:
    return set(array.search(tag).tolist())


def program(array: CamArray, index: int, tag: int) -> CamArray:
    return array.program(index, tag)


def cam_area(n_words: int, word_bits: int, cell_area: float) -> float:
    """Silicon area in um^2 of an n_words x word_bits array of cells."""
    if n_words <= 0 or word_bits <= 0 or cell_area <= 0:
        raise ValueError("cam_area arguments must be positive")
    return n_words * word_bits * cell_area


def cell_area_from_feature(cells_f2: float, feature_um: float) -> float:
    """Cell area in um^2 from a layout size quoted in F^2."""
    return cells_f2 * feature_um**2
