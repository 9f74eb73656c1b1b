"""Gauss-Jordan elimination over Q (the matrices here are at most a few dozen wide)."""
from fractions import Fraction


def invert_matrix(rows):
    n = len(rows)
    aug = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(rows)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col]), None)
        if pivot is None:
            raise ZeroDivisionError("singular matrix")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv = 1 / aug[col][col]
        aug[col] = [x * inv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def solve(rows, rhs):
    """Solve rows · x = rhs for square nonsingular ``rows``."""
    inv = invert_matrix(rows)
    return [sum((a * b for a, b in zip(row, rhs)), Fraction(0)) for row in inv]


def rank(rows):
    mat = [[Fraction(x) for x in row] for row in rows]
    if not mat:
        return 0
    r = 0
    ncols = len(mat[0])
    for col in range(ncols):
        pivot = next((i for i in range(r, len(mat)) if mat[i][col]), None)
        if pivot is None:
            continue
        mat[r], mat[pivot] = mat[pivot], mat[r]
        for i in range(len(mat)):
            if i != r and mat[i][col]:
                f = mat[i][col] / mat[r][col]
                mat[i] = [a - f * b for a, b in zip(mat[i], mat[r])]
        r += 1
    return r
