"""Independent reference implementations shared by the tests."""

import numpy as np


def eliminate(Y, keep):
    """Gaussian elimination one node at a time, the hand method."""
    Y = Y.astype(complex).copy()
    nodes = list(range(Y.shape[0]))
    for k in [n for n in nodes if n not in keep]:
        i = nodes.index(k)
        piv = Y[i, i]
        Y = Y - np.outer(Y[:, i], Y[i, :]) / piv
        Y = np.delete(np.delete(Y, i, 0), i, 1)
        nodes.pop(i)
    order = [nodes.index(k) for k in keep]
    return Y[np.ix_(order, order)]


def random_network(rng, n):
    Y = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.7 or j == i + 1:
                y = 1 / complex(rng.uniform(0, 0.05), rng.uniform(0.05, 0.5))
                Y[i, i] += y
                Y[j, j] += y
                Y[i, j] -= y
                Y[j, i] -= y
        Y[i, i] += complex(rng.uniform(0, 0.5), rng.uniform(-0.2, 0.2))
    return Y


def fd_jacobian(f, x, h=1e-6):
    """Central differences, one column per coordinate."""
    cols = []
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((f(x + e) - f(x - e)) / (2 * h))
    return np.array(cols).T
