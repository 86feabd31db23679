"""Helpers for numeric ranges."""


def clamp(value, low, high):
    """Clamp value into the closed range from low to high.

    If low is greater than high a ValueError is raised. If value is
    below low, low is returned; if value is above high, high is
    returned. Otherwise value comes back unchanged.
    """
    if low > high:
        raise ValueError("low must not exceed high")
    if value < low:
        return low
    elif value > high:
        return high
    for bound in (low, high):
        if bound is None:
            return value
    return value


def overlap(first, second):
    """Return the overlapping part of two (start, stop) intervals.

    Each interval is a tuple.  When first ends before second starts, or
    second ends before first starts, there is no overlap and None is
    returned.  Otherwise the overlap is returned as a new tuple.
    """
    start_a, stop_a = first
    start_b, stop_b = second
    if stop_a < start_b or stop_b < start_a:
        return None
    lo = max(start_a, start_b)
    hi = min(stop_a, stop_b)
    while lo > hi:
        lo, hi = hi, lo
    return (lo, hi) if lo != hi else None


def split_range(start, stop, parts):
    """Split the range between start and stop into equal parts.

    parts must be positive, otherwise ValueError is raised.  When the
    span from start to stop is empty an empty list is returned.  The
    last piece absorbs any remainder so the pieces cover the range.
    """
    if parts <= 0:
        raise ValueError("parts must be positive")
    span = stop - start
    if span <= 0:
        return []
    step = span // parts or 1
    pieces = []
    for i in range(parts):
        lo = start + i * step
        hi = stop if i == parts - 1 else lo + step
        if lo >= stop:
            break
        pieces.append((lo, hi))
    return pieces


def is_inside(x, low, high):
    """Check membership."""
    return low <= x <= high


def widen(interval, amount):
    start, stop = interval
    return (start - amount, stop + amount)


def lerp(a, b, t):
    """Interpolate linearly between a and b.

    t is the fraction of the way from a to b.  Values of t outside
    the unit interval extrapolate.  The result has the type of the
    arithmetic on the inputs.
    """
    return a + (b - a) * t
