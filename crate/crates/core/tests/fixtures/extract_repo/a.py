"""Module docstring is not a function."""


def add(a, b):
    """Add two numbers."""
    return a + b


def undocumented(x):
    return x * 2


def classify(n):
    """Classify a number.

    Returns a label.
    """
    if n < 0:
        return "neg"
    elif n == 0:
        return "zero"
    for _ in range(1):
        pass
    return "pos"
