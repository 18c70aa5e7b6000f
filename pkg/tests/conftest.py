import numpy as np
import pytest

from lagrange import RootSet


def random_rootset(
    rng: np.random.Generator,
    max_degree: int = 6,
    max_mult: int = 3,
    stable: bool = True,
    allow_complex: bool = True,
    min_sep: float = 0.15,
) -> RootSet:
    """Random conjugate-symmetric root set with well-separated values."""
    entries: list[tuple[complex, int]] = []
    degree = 0
    target = int(rng.integers(2, max_degree + 1))
    reals_used: list[float] = []
    while degree < target:
        room = target - degree
        mult = int(rng.integers(1, max_mult + 1))
        make_pair = allow_complex and room >= 2 * mult and rng.random() < 0.4
        if not make_pair and mult > room:
            mult = room
        for _ in range(50):
            re = -float(rng.uniform(0.2, 2.5))
            if not stable:
                re = float(rng.uniform(-2.5, 2.5))
                if abs(re) < 0.2:
                    continue
            if all(abs(re - r) > min_sep for r in reals_used):
                break
        else:
            break
        if make_pair:
            im = float(rng.uniform(0.4, 2.0))
            entries.append((complex(re, im), mult))
            entries.append((complex(re, -im), mult))
            degree += 2 * mult
        else:
            entries.append((complex(re, 0.0), mult))
            degree += mult
        reals_used.append(re)
    if not entries:
        entries = [(complex(-1.0, 0.0), 1)]
    return RootSet(tuple(entries))


@pytest.fixture
def rng():
    return np.random.default_rng(0)
