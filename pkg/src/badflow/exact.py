"""Small exact linear-algebra helpers over int / Fraction."""

from fractions import Fraction


def det(matrix):
    """Exact determinant by fraction-free Bareiss elimination.

    Entries may be ints or Fractions; an int matrix yields an int.
    """
    a = [list(row) for row in matrix]
    n = len(a)
    if n == 0:
        return 1
    if any(isinstance(x, Fraction) for row in a for x in row):
        # clear denominators, then rescale
        den = 1
        for row in a:
            for x in row:
                den = den * Fraction(x).denominator // _gcd(den, Fraction(x).denominator)
        ints = [[int(Fraction(x) * den) for x in row] for row in a]
        return Fraction(det(ints), den**n)
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for i in range(k + 1, n):
                if a[i][k] != 0:
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


def inverse(matrix):
    """Exact inverse over the rationals (Gauss-Jordan)."""
    n = len(matrix)
    a = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(n)]
         for i, row in enumerate(matrix)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        a[col], a[piv] = a[piv], a[col]
        p = a[col][col]
        a[col] = [x / p for x in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [row[n:] for row in a]


def matmul(a, b):
    return [[sum(x * y for x, y in zip(row, col)) for col in zip(*b)] for row in a]
