"""Input validation helpers shared by estimators and pipeline functions."""

from __future__ import annotations


def check_power_of_two(n, name: str = "value") -> int:
    if not isinstance(n, int) or isinstance(n, bool) or n < 1 or (n & (n - 1)):
        raise ValueError(f"{name} must be a positive power of two, got {n!r}")
    return n


def check_ngram_range(ngram_range) -> tuple:
    try:
        lo, hi = ngram_range
    except (TypeError, ValueError):
        raise ValueError(f"ngram_range must be a (lo, hi) pair, "
                         f"got {ngram_range!r}") from None
    if not (isinstance(lo, int) and isinstance(hi, int)) or lo < 1 or hi < lo:
        raise ValueError(f"ngram_range must satisfy 1 <= lo <= hi, "
                         f"got {ngram_range!r}")
    return lo, hi


def check_texts(X) -> list:
    """Coerce X to a list of str, rejecting non-string items."""
    if isinstance(X, str):
        raise ValueError("expected an iterable of strings, got a single str")
    texts = list(X)
    for i, t in enumerate(texts):
        if not isinstance(t, str):
            raise ValueError(f"item {i} is not a string: {t!r}")
    return texts


def check_positive(value, name: str, strict: bool = True):
    bound_ok = value > 0 if strict else value >= 0
    if not bound_ok:
        op = ">" if strict else ">="
        raise ValueError(f"{name} must be {op} 0, got {value!r}")
    return value


def check_unit_interval(value, name: str, open_ends: bool = False):
    inside = 0.0 < value < 1.0 if open_ends else 0.0 <= value <= 1.0
    if not inside:
        kind = "strictly between" if open_ends else "between"
        raise ValueError(f"{name} must be {kind} 0 and 1, got {value!r}")
    return value


def check_seed(seed) -> int:
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ValueError(f"seed must be an integer, got {seed!r}")
    return seed & 0xFFFFFFFFFFFFFFFF
