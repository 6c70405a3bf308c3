"""Baker-Campbell-Hausdorff product through Dynkin's series.

log(e^X e^Y) is expanded as a sum of right-nested brackets of words in X and Y,
with rational coefficients generated once per order and cached. For a nilpotent
bracket of step m, truncating at order m is exact.
"""

import logging
from collections import defaultdict
from fractions import Fraction
from functools import lru_cache
from math import factorial, prod
from typing import Dict, Iterator, List, Tuple

import numpy as np

logger = logging.getLogger(__name__)

Word = Tuple[int, ...]  # 0 stands for X, 1 for Y


def bracket(C: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """[x, y] for structure tensor C[i,j,k]; x and y may carry leading batch axes"""
    return np.einsum("...i,...j,ijk->...k", x, y, C)


def _pair_sequences(n: int, budget: int) -> Iterator[List[Tuple[int, int]]]:
    if n == 0:
        yield []
        return
    for degree in range(1, budget - (n - 1) + 1):
        for r in range(degree + 1):
            for rest in _pair_sequences(n - 1, budget - degree):
                yield [(r, degree - r)] + rest


@lru_cache(maxsize=None)
def dynkin_words(order: int) -> Tuple[Tuple[Word, Fraction], ...]:
    """Nonzero Dynkin coefficients for all words of length <= order"""
    coeffs: Dict[Word, Fraction] = defaultdict(Fraction)
    for n in range(1, order + 1):
        for pairs in _pair_sequences(n, order):
            degree = sum(r + s for r, s in pairs)
            word: Word = tuple(letter for r, s in pairs for letter in (0,) * r + (1,) * s)
            if len(word) > 1 and word[-1] == word[-2]:
                continue
            denom = n * degree * prod(factorial(r) * factorial(s) for r, s in pairs)
            coeffs[word] += Fraction((-1) ** (n - 1), denom)
    words = tuple(
        (w, c) for w, c in sorted(coeffs.items(), key=lambda kv: (len(kv[0]), kv[0])) if c != 0
    )
    logger.debug(f"Dynkin series of order {order}: {len(words)} nonzero words")
    return words


def bch(C: np.ndarray, x: np.ndarray, y: np.ndarray, order: int) -> np.ndarray:
    """log(exp(x) exp(y)) truncated after brackets of length ``order``"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    nested: Dict[Word, np.ndarray] = {(0,): x, (1,): y}

    def value(word: Word) -> np.ndarray:
        if word not in nested:
            head = x if word[0] == 0 else y
            nested[word] = bracket(C, head, value(word[1:]))
        return nested[word]

    total = np.zeros_like(x)
    for word, coefficient in dynkin_words(order):
        total = total + float(coefficient) * value(word)
    return total


def bch_chain(C: np.ndarray, factors: np.ndarray, order: int) -> np.ndarray:
    """Ordered product of factors[..., 0, :], factors[..., 1, :], ... in exponential coordinates"""
    factors = np.asarray(factors, dtype=float)
    result = factors[..., 0, :]
    for k in range(1, factors.shape[-2]):
        result = bch(C, result, factors[..., k, :], order)
    return result
