class Stack:
    """A stack; class docstrings are not pairs."""

    def push(self, item):
        """Push an item."""
        self.items.append(item)

    def pop(self):
        """Pop the top item."""
        return self.items.pop()

    @property
    def size(self):
        """Number of items."""
        return len(self.items)


def outer(xs):
    """Sum positive values."""

    def keep(x):
        """Keep positives."""
        return x > 0 and x < 100

    return sum(x for x in xs if keep(x))
