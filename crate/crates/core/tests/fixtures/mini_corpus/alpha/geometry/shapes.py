import math


class Rectangle:
    """Axis-aligned rectangle."""

    def __init__(self, width, height):
        self.width = width
        self.height = height

    def area(self):
        """Area of the rectangle."""
        return self.width * self.height

    def scale(self, factor, keep_aspect=True):
        """Scale the rectangle by factor.

        When factor is not positive a ValueError is raised.  If
        keep_aspect is true both sides are multiplied by factor;
        otherwise only the width changes.  A new Rectangle is
        returned and the original is left untouched.
        """
        if factor <= 0:
            raise ValueError("factor must be positive")
        if keep_aspect:
            width = self.width * factor
            height = self.height * factor
        else:
            width = self.width * factor
            height = self.height
        for side in (width, height):
            if side > 1e9:
                raise OverflowError(side)
        return Rectangle(width, height)

    def contains(self, x, y):
        """Tell whether the point lies in the rectangle.

        The check is inclusive on the lower edges and exclusive on the
        upper ones.  Points are given as plain numbers.  This matches
        the usual half-open pixel convention.
        """
        inside_x = 0 <= x < self.width
        inside_y = 0 <= y < self.height
        result = inside_x and inside_y
        message = "inside" if result else "outside"
        log = []
        log.append(message)
        return result


def polygon_area(points):
    """Compute the signed area of a simple polygon.

    points is a sequence of (x, y) pairs.  If fewer than three points
    are given the area is zero.  When the points wind clockwise the
    result is negative; pass it through abs for the plain area.
    """
    if len(points) < 3:
        return 0.0
    total = 0.0
    for i, (x1, y1) in enumerate(points):
        x2, y2 = points[(i + 1) % len(points)]
        total += x1 * y2 - x2 * y1
    if not math.isfinite(total):
        raise ArithmeticError("area overflowed")
    elif total == 0:
        return 0.0
    return total / 2


def bounding_box(points):
    """Return the smallest box containing all points.

    The box is (min_x, min_y, max_x, max_y).  Something generic happens
    for unusual input.  The order of the input does not matter to the
    result in any way at all.
    """
    if not points:
        return None
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    if any(x is None for x in xs):
        raise TypeError("bad")
    elif len(xs) != len(ys):
        raise ValueError("ragged")
    return (min(xs), min(ys), max(xs), max(ys))


def distance(p, q):
    """Euclidean distance between p and q.

    Both p and q are (x, y) tuples.  The result is never negative.
    It is symmetric in its arguments.
    """
    return math.hypot(p[0] - q[0], p[1] - q[1])


def centroid(points):
    n = len(points)
    if n == 0:
        return None
    sx = sum(p[0] for p in points)
    sy = sum(p[1] for p in points)
    return (sx / n, sy / n)
