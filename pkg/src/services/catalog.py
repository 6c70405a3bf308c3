"""Built-in algebras used by the command line, the examples and the test-suite"""

from itertools import combinations
from typing import Callable, Dict

from src.exceptions import InputError
from src.models import LieAlgebraSpec


def heisenberg(n: int = 1) -> LieAlgebraSpec:
    """h(n): basis q_1..q_n, p_1..p_n, Z with [q_i, p_i] = Z"""
    if n < 1:
        raise InputError("Heisenberg algebra needs n >= 1")
    center = 2 * n
    return LieAlgebraSpec(
        name=f"h{n}",
        dim=2 * n + 1,
        brackets=[(i, n + i, center, 1.0) for i in range(n)],
        generators=list(range(2 * n)),
    )


def sussmann(alpha: float = 1.0, beta: float = 1.0) -> LieAlgebraSpec:
    """
    Four-dimensional filtered algebra generated by X1, X2 with X3 = [X1,X2],
    X4 = [X1,X3] and [X2,X3] = alpha X1 + beta X2.

    The remaining brackets [X2,X4] = beta X3, [X3,X4] = beta X4 complete it to a Lie algebra.
    """
    if beta == 0:
        raise InputError("Sussmann algebra requires beta != 0")
    return LieAlgebraSpec(
        name="sussmann",
        dim=4,
        brackets=[
            (0, 1, 2, 1.0),
            (0, 2, 3, 1.0),
            (1, 2, 0, alpha),
            (1, 2, 1, beta),
            (1, 3, 2, beta),
            (2, 3, 3, beta),
        ],
        generators=[0, 1],
    )


def engel() -> LieAlgebraSpec:
    """Step-3 Carnot algebra [X1,X2] = X3, [X1,X3] = X4"""
    return LieAlgebraSpec(
        name="engel", dim=4, brackets=[(0, 1, 2, 1.0), (0, 2, 3, 1.0)], generators=[0, 1]
    )


def free_step2(r: int = 3) -> LieAlgebraSpec:
    """Free step-2 nilpotent algebra on r generators"""
    pairs = list(combinations(range(r), 2))
    return LieAlgebraSpec(
        name=f"free_step2_{r}gen",
        dim=r + len(pairs),
        brackets=[(a, b, r + k, 1.0) for k, (a, b) in enumerate(pairs)],
        generators=list(range(r)),
    )


def abelian(d: int = 2, generators=None) -> LieAlgebraSpec:
    return LieAlgebraSpec(
        name=f"abelian{d}",
        dim=d,
        brackets=[],
        generators=list(range(d)) if generators is None else list(generators),
    )


CATALOG: Dict[str, Callable[[], LieAlgebraSpec]] = {
    "h1": lambda: heisenberg(1),
    "h2": lambda: heisenberg(2),
    "h3": lambda: heisenberg(3),
    "sussmann": sussmann,
    "engel": engel,
    "free_step2_3gen": lambda: free_step2(3),
    "abelian": lambda: abelian(2),
}


def builtin(name: str) -> LieAlgebraSpec:
    try:
        return CATALOG[name]()
    except KeyError:
        raise InputError(f"Unknown built-in algebra '{name}'. Known: {', '.join(sorted(CATALOG))}")
